#include "rapid/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rapid {

void cost_params::validate() const {
    const double positives[] = {target_params, draft_params, context_len, retrieval_len, gamma};
    for (double x : positives) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw std::invalid_argument("cost_params: all sizes must be positive and finite");
        }
    }
    if (gamma < 1.0) {
        throw std::invalid_argument("cost_params: gamma must be >= 1");
    }
    if (!(beta_sd > 0.0 && beta_sd <= 1.0) || !(beta_rapid > 0.0 && beta_rapid <= 1.0)) {
        throw std::invalid_argument("cost_params: beta values must be in (0, 1]");
    }
}

cost_report flops_per_step(const cost_params& params) {
    params.validate();
    const double t = params.target_params;
    const double d = params.draft_params;
    const double l = params.context_len;
    const double lr = params.retrieval_len;
    const double g = params.gamma;

    cost_report report;
    report.flops_lc = 2.0 * g * t * l + g * g * t;
    report.flops_drafter = 2.0 * g * d * lr + g * g * d;
    const double speculative_numerator = report.flops_drafter + 2.0 * t * (l + g);
    report.flops_sd = speculative_numerator / params.beta_sd;
    report.flops_rapid = speculative_numerator / params.beta_rapid;
    return report;
}

std::vector<speedup_point> speedup_curve(const cost_params& params,
                                         const std::vector<double>& context_lens) {
    if (!std::is_sorted(context_lens.begin(), context_lens.end())) {
        throw std::invalid_argument("speedup_curve: context lengths must be ascending");
    }
    std::vector<speedup_point> curve;
    curve.reserve(context_lens.size());
    cost_params p = params;
    for (double l : context_lens) {
        p.context_len = l;
        speedup_point pt;
        pt.context_len = l;
        pt.report = flops_per_step(p);
        pt.rapid_speedup = pt.report.flops_lc / pt.report.flops_rapid;
        pt.sd_speedup = pt.report.flops_lc / pt.report.flops_sd;
        curve.push_back(pt);
    }
    return curve;
}

std::optional<double> crossover_length(const cost_params& params,
                                       const std::vector<double>& context_lens,
                                       double threshold) {
    for (const auto& pt : speedup_curve(params, context_lens)) {
        if (pt.rapid_speedup >= threshold) {
            return pt.context_len;
        }
    }
    return std::nullopt;
}

}  // namespace rapid
