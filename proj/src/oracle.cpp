#include "rapid/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rapid/sampling.hpp"

namespace rapid {

step_distribution_report exact_step_distribution(const prob_vec& p, const prob_vec& p_hat,
                                                 const prob_vec& q) {
    if (p.size() != p_hat.size() || p.size() != q.size()) {
        throw std::invalid_argument("exact_step_distribution: size mismatch");
    }
    const size_t n = p.size();
    step_distribution_report report;
    report.target_p = p;

    std::vector<double> accept(n);
    std::vector<double> residual(n);
    double beta = 0.0;
    double residual_mass = 0.0;
    for (size_t i = 0; i < n; ++i) {
        accept[i] = std::min(q[i], p_hat[i]);
        beta += accept[i];
        residual[i] = std::max(p[i] - std::min(p_hat[i], q[i]), 0.0);
        residual_mass += residual[i];
    }
    report.beta = beta;

    report.exact_output.resize(n);
    report.variant_output.resize(n);
    const double reject = 1.0 - beta;
    for (size_t i = 0; i < n; ++i) {
        // degenerate residual: the engine falls back to sampling from p
        const double res_norm = residual_mass > 0.0 ? residual[i] / residual_mass : p[i];
        report.exact_output[i] = accept[i] + reject * res_norm;
        report.variant_output[i] = accept[i] + residual[i];
    }
    report.tv_distance = tv_distance(report.exact_output, p);
    report.tv_variant = tv_distance(report.variant_output, p);
    return report;
}

prob_vec monte_carlo_step(const std::function<token_id(rng_stream&)>& step, int64_t n,
                          rng_stream& rng, int32_t vocab_size) {
    if (n < 1) {
        throw std::invalid_argument("monte_carlo_step: n must be >= 1");
    }
    std::vector<int64_t> counts(vocab_size, 0);
    for (int64_t i = 0; i < n; ++i) {
        const token_id t = step(rng);
        if (t < 0 || t >= vocab_size) {
            throw std::logic_error("monte_carlo_step: token out of range");
        }
        counts[t] += 1;
    }
    prob_vec freq(vocab_size);
    for (int32_t t = 0; t < vocab_size; ++t) {
        freq[t] = static_cast<double>(counts[t]) / static_cast<double>(n);
    }
    return freq;
}

std::function<token_id(rng_stream&)> single_position_step(const lm_backend& target,
                                                          const lm_backend& drafter,
                                                          const token_seq& full_ctx,
                                                          const token_seq& retrieval_ctx,
                                                          const token_seq& prefix,
                                                          const engine_config& cfg) {
    engine_config step_cfg = cfg;
    step_cfg.gamma = 1;
    return [&target, &drafter, full_ctx, retrieval_ctx, prefix, step_cfg](rng_stream& rng) {
        auto [drafted, draft_probs] =
            draft_block(drafter, retrieval_ctx, prefix, 1, step_cfg.temperature, rng);
        const step_trace trace =
            verify_block(target, full_ctx, prefix, drafted, draft_probs, step_cfg, rng);
        return trace.accepted_count > 0 ? trace.drafted[0] : *trace.correction_token;
    };
}

double fd_gradient_check(const logit_vec& z, const prob_vec& q, double temperature, double h) {
    if (!(h >= 1e-7 && h <= 1e-3)) {
        throw std::invalid_argument("fd_gradient_check: h must be in [1e-7, 1e-3]");
    }
    const auto loss = [&](const logit_vec& logits) {
        return temperature * temperature * kl_divergence(q, softmax_t(logits, temperature));
    };
    // reject q-support where the student underflows to zero
    const prob_vec p = softmax_t(z, temperature);
    for (size_t i = 0; i < q.size(); ++i) {
        if (q[i] > 0.0 && p[i] == 0.0) {
            return std::numeric_limits<double>::infinity();
        }
    }
    const std::vector<double> analytic = kd_gradient(z, q, temperature);
    double max_rel = 0.0;
    logit_vec zp = z;
    for (size_t i = 0; i < z.size(); ++i) {
        zp[i] = z[i] + h;
        const double up = loss(zp);
        zp[i] = z[i] - h;
        const double down = loss(zp);
        zp[i] = z[i];
        const double fd = (up - down) / (2.0 * h);
        const double rel = std::abs(analytic[i] - fd) / (std::abs(fd) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

std::vector<eta_curve_point> eta_divergence_curve(const logit_vec& z, const prob_vec& q,
                                                  double temperature,
                                                  const std::vector<double>& etas) {
    if (etas.empty() || etas.front() != 0.0) {
        throw std::invalid_argument("eta_divergence_curve: etas must start at 0");
    }
    if (!std::is_sorted(etas.begin(), etas.end())) {
        throw std::invalid_argument("eta_divergence_curve: etas must be ascending");
    }
    const prob_vec p = softmax_t(z, temperature);
    std::vector<eta_curve_point> curve;
    curve.reserve(etas.size());
    for (double eta : etas) {
        const prob_vec p_hat =
            softmax_t(augment_logits(z, p, q, eta, temperature), temperature);
        const auto report = exact_step_distribution(p, p_hat, q);
        curve.push_back({eta, kl_divergence(q, p_hat), report.tv_distance, report.beta,
                         report.tv_variant});
    }
    return curve;
}

}  // namespace rapid
