#pragma once

#include <functional>
#include <vector>

#include "rapid/engine.hpp"
#include "rapid/types.hpp"

namespace rapid {

// Exact single-position output law of the draft/verify step:
//   P(x) = min(q(x), p_hat(x)) + (1 - beta) * residual(x)
// with residual the l1-normalized clamped vector the engine samples on
// rejection. `variant_output` is the diagnostic where the residual is
// divided by (1 - beta) instead of its own l1 norm; when clamping binds
// that vector is improper and its TV against the target quantifies the
// deviation the clamped normalizer introduces.
struct step_distribution_report {
    prob_vec exact_output;
    prob_vec target_p;
    double tv_distance = 0.0;      // TV(exact_output, target_p)
    double beta = 0.0;             // sum_x min(q(x), p_hat(x))
    std::vector<double> variant_output;  // may not sum to 1
    double tv_variant = 0.0;       // TV(variant_output, target_p)
};

step_distribution_report exact_step_distribution(const prob_vec& p, const prob_vec& p_hat,
                                                 const prob_vec& q);

// Empirical frequency vector of `step` over n independent trials.
prob_vec monte_carlo_step(const std::function<token_id(rng_stream&)>& step, int64_t n,
                          rng_stream& rng, int32_t vocab_size);

// Single engine step at one position: draft one token from the drafter,
// verify against the target, return the accepted draft or the residual
// correction. Useful as a monte_carlo_step closure.
std::function<token_id(rng_stream&)> single_position_step(const lm_backend& target,
                                                          const lm_backend& drafter,
                                                          const token_seq& full_ctx,
                                                          const token_seq& retrieval_ctx,
                                                          const token_seq& prefix,
                                                          const engine_config& cfg);

// Max relative error between the analytic distillation gradient and
// central finite differences of L = T^2 * KL(q || softmax(z/T)).
// Returns +inf when q has support where the student is numerically zero.
double fd_gradient_check(const logit_vec& z, const prob_vec& q, double temperature, double h);

struct eta_curve_point {
    double eta = 0.0;
    double kl_q_phat = 0.0;        // KL(q || softmax(z_hat / T)), shift only
    double tv_output_vs_p = 0.0;   // TV of the exact step output against p
    double beta = 0.0;
    double tv_variant = 0.0;       // (1-beta)-normalizer diagnostic
};

// Sweep of the logits shift alone (no tail preservation): for each eta,
// shift z toward q, recompute the distribution, and report divergence
// plus the exact step-output deviation from the target.
std::vector<eta_curve_point> eta_divergence_curve(const logit_vec& z, const prob_vec& q,
                                                  double temperature,
                                                  const std::vector<double>& etas);

}  // namespace rapid
