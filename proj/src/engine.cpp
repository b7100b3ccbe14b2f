#include "rapid/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rapid {

void engine_config::validate() const {
    if (gamma < 1) {
        throw std::invalid_argument("engine_config: gamma must be >= 1");
    }
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
        throw std::invalid_argument("engine_config: eta must be >= 0 and finite");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("engine_config: temperature must be > 0");
    }
    if (!(tail_factor > 0.0 && tail_factor < 1.0)) {
        throw std::invalid_argument("engine_config: tail_factor must be in (0,1)");
    }
    if (max_tokens < 0) {
        throw std::invalid_argument("engine_config: max_tokens must be >= 0");
    }
}

std::pair<token_seq, std::vector<prob_vec>> draft_block(const lm_backend& drafter,
                                                        const token_seq& retrieval_ctx,
                                                        const token_seq& prefix, int32_t gamma,
                                                        double temperature, rng_stream& rng) {
    if (gamma < 1) {
        throw std::invalid_argument("draft_block: gamma must be >= 1");
    }
    token_seq drafted;
    std::vector<prob_vec> probs;
    drafted.reserve(gamma);
    probs.reserve(gamma);
    token_seq ctx = concat(retrieval_ctx, prefix);
    for (int32_t k = 0; k < gamma; ++k) {
        prob_vec q = softmax_t(drafter.logits(ctx), temperature);
        const token_id t = sample_categorical(q, rng);
        drafted.push_back(t);
        probs.push_back(std::move(q));
        ctx.push_back(t);
    }
    return {std::move(drafted), std::move(probs)};
}

logit_vec augment_logits(const logit_vec& z, const prob_vec& p, const prob_vec& q, double eta,
                         double temperature) {
    if (z.size() != p.size() || z.size() != q.size()) {
        throw std::invalid_argument("augment_logits: size mismatch");
    }
    if (eta == 0.0) {
        return z;
    }
    logit_vec out(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        out[i] = z[i] + eta * temperature * (q[i] - p[i]);
    }
    return out;
}

prob_vec tail_preserve(const prob_vec& target_p, const prob_vec& p_hat_raw, double tail_factor) {
    if (target_p.size() != p_hat_raw.size()) {
        throw std::invalid_argument("tail_preserve: size mismatch");
    }
    if (!(tail_factor > 0.0 && tail_factor < 1.0)) {
        throw std::invalid_argument("tail_preserve: tail_factor must be in (0,1)");
    }
    const double threshold = tail_factor * *std::max_element(p_hat_raw.begin(), p_hat_raw.end());
    prob_vec out = p_hat_raw;
    bool changed = false;
    double sum = 0.0;
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i] < threshold && out[i] != target_p[i]) {
            out[i] = target_p[i];
            changed = true;
        }
        sum += out[i];
    }
    if (!changed) {
        return out;
    }
    for (double& x : out) {
        x /= sum;
    }
    return out;
}

token_id residual_sample(const prob_vec& p, const prob_vec& p_hat, const prob_vec& q,
                         rng_stream& rng) {
    if (p.size() != p_hat.size() || p.size() != q.size()) {
        throw std::invalid_argument("residual_sample: size mismatch");
    }
    // max(p - p_hat, p - q, 0) == max(p - min(p_hat, q), 0)
    std::vector<double> residual(p.size());
    bool any_positive = false;
    for (size_t i = 0; i < p.size(); ++i) {
        residual[i] = std::max(p[i] - std::min(p_hat[i], q[i]), 0.0);
        any_positive = any_positive || residual[i] > 0.0;
    }
    if (!any_positive) {
        // p is dominated everywhere; fall back to the target itself
        return sample_categorical(p, rng);
    }
    return sample_categorical(norm_clamped(residual), rng);
}

step_trace verify_block(const lm_backend& target, const token_seq& full_ctx,
                        const token_seq& prefix, const token_seq& drafted,
                        const std::vector<prob_vec>& draft_probs, const engine_config& cfg,
                        rng_stream& rng) {
    cfg.validate();
    if (drafted.size() != static_cast<size_t>(cfg.gamma) || draft_probs.size() != drafted.size()) {
        throw std::invalid_argument("verify_block: drafted block size != gamma");
    }
    const auto target_logits = logits_batch(target, concat(full_ctx, prefix), drafted);

    step_trace trace;
    trace.drafted = drafted;
    trace.draft_probs = draft_probs;

    for (int32_t j = 0; j < cfg.gamma; ++j) {
        const logit_vec& z = target_logits[j];
        const prob_vec p = softmax_t(z, cfg.temperature);
        const prob_vec& q = draft_probs[j];
        const prob_vec p_hat_raw = softmax_t(augment_logits(z, p, q, cfg.eta, cfg.temperature),
                                             cfg.temperature);
        const prob_vec p_hat = tail_preserve(p, p_hat_raw, cfg.tail_factor);

        const token_id x = drafted[j];
        if (!(q[x] > 0.0)) {
            throw std::logic_error("verify_block: drafted token has zero draft probability");
        }
        const double r = rng.uniform();
        trace.acceptance_randoms.push_back(r);
        if (r <= std::min(1.0, p_hat[x] / q[x])) {
            trace.accepted_count += 1;
            continue;
        }
        trace.p_vec = p;
        trace.p_hat_vec = p_hat;
        trace.q_vec = q;
        trace.correction_token = residual_sample(p, p_hat, q, rng);
        break;
    }

    if (trace.accepted_count == cfg.gamma && cfg.bonus_token) {
        // classical extra token: one more target sample at the position
        // following the fully accepted block
        const logit_vec z = target.logits(concat(concat(full_ctx, prefix), drafted));
        trace.bonus = sample_categorical(softmax_t(z, cfg.temperature), rng);
    }
    return trace;
}

generation_stats stats_from_traces(const std::vector<step_trace>& traces) {
    generation_stats stats;
    for (const auto& t : traces) {
        stats.steps += 1;
        stats.total_drafted += static_cast<int64_t>(t.drafted.size());
        stats.total_accepted += t.accepted_count;
        stats.tokens_emitted += t.emitted();
    }
    stats.acceptance_rate = stats.total_drafted > 0
                                ? static_cast<double>(stats.total_accepted) / static_cast<double>(stats.total_drafted)
                                : 0.0;
    return stats;
}

generation_result generate(const lm_backend& target, const lm_backend& drafter,
                           const token_seq& full_ctx, const token_seq& retrieval_ctx,
                           const token_seq& query_prefix, const engine_config& cfg) {
    cfg.validate();
    if (target.vocabulary().size != drafter.vocabulary().size) {
        throw std::invalid_argument("generate: target and drafter must share a vocabulary");
    }

    generation_result result;
    rng_stream rng(cfg.seed);
    token_seq committed = query_prefix;
    int64_t emitted = 0;

    while (emitted < cfg.max_tokens) {
        auto [drafted, draft_probs] =
            draft_block(drafter, retrieval_ctx, committed, cfg.gamma, cfg.temperature, rng);
        step_trace trace =
            verify_block(target, full_ctx, committed, drafted, draft_probs, cfg, rng);

        for (int32_t j = 0; j < trace.accepted_count; ++j) {
            committed.push_back(trace.drafted[j]);
        }
        if (trace.correction_token) {
            committed.push_back(*trace.correction_token);
        }
        if (trace.bonus) {
            committed.push_back(*trace.bonus);
        }
        emitted += trace.emitted();
        result.traces.push_back(std::move(trace));
    }

    result.stats = stats_from_traces(result.traces);
    const int64_t keep = std::min<int64_t>(cfg.max_tokens, emitted);
    result.tokens.assign(committed.begin() + static_cast<int64_t>(query_prefix.size()),
                         committed.begin() + static_cast<int64_t>(query_prefix.size()) + keep);
    return result;
}

}  // namespace rapid
