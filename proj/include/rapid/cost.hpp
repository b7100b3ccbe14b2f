#pragma once

#include <optional>
#include <vector>

namespace rapid {

// FLOPs accounting inputs for one generation step producing gamma tokens.
struct cost_params {
    double target_params = 8e9;    // target model parameter count
    double draft_params = 8e9;     // drafter parameter count
    double context_len = 131072;   // long-context length, tokens
    double retrieval_len = 4096;   // drafter input length, tokens
    double gamma = 10;
    double beta_sd = 0.6;          // expected accepted fraction per block, plain SD
    double beta_rapid = 0.8;       // same, retrieval-augmented verification

    void validate() const;
};

struct cost_report {
    double flops_lc = 0.0;       // 2*g*T*L + g^2*T
    double flops_drafter = 0.0;  // 2*g*D*LR + g^2*D
    double flops_sd = 0.0;       // (2*g*D*LR + g^2*D + 2*T*(L+g)) / beta_sd
    double flops_rapid = 0.0;    // same numerator / beta_rapid
};

cost_report flops_per_step(const cost_params& params);

struct speedup_point {
    double context_len = 0.0;
    double rapid_speedup = 0.0;  // flops_lc / flops_rapid
    double sd_speedup = 0.0;     // flops_lc / flops_sd
    cost_report report;
};

// Evaluates the FLOPs ratios over an ascending grid of context lengths
// with the other parameters held fixed. A FLOPs proxy, not wall clock:
// memory-bandwidth effects are deliberately out of the model.
std::vector<speedup_point> speedup_curve(const cost_params& params,
                                         const std::vector<double>& context_lens);

// Smallest grid length whose rapid speedup reaches the threshold.
std::optional<double> crossover_length(const cost_params& params,
                                       const std::vector<double>& context_lens,
                                       double threshold = 1.0);

}  // namespace rapid
