#pragma once

#include <optional>
#include <vector>

#include "rapid/lm.hpp"
#include "rapid/rng.hpp"
#include "rapid/sampling.hpp"
#include "rapid/types.hpp"

namespace rapid {

struct engine_config {
    int32_t gamma = 10;        // speculative tokens per step
    double eta = 0.0;          // knowledge-transfer strength, >= 0
    double temperature = 1.0;
    double tail_factor = 0.1;  // entries of the shifted distribution below
                               // tail_factor * max are restored from the target
    int64_t max_tokens = 64;
    uint64_t seed = 0;
    bool bonus_token = false;  // classical extra target sample when all
                               // gamma drafts are accepted; off by default

    void validate() const;
};

// Audit record for one draft/verify step.
struct step_trace {
    token_seq drafted;                   // length gamma
    std::vector<prob_vec> draft_probs;   // drafter distribution per position
    int32_t accepted_count = 0;
    std::optional<token_id> correction_token;  // present iff a draft was rejected
    std::optional<token_id> bonus;             // present iff all accepted and bonus enabled
    // vectors at the rejection point, for audit
    std::optional<prob_vec> p_vec;
    std::optional<prob_vec> p_hat_vec;
    std::optional<prob_vec> q_vec;
    std::vector<double> acceptance_randoms;  // one uniform per tested position

    int32_t emitted() const {
        return accepted_count + (correction_token ? 1 : 0) + (bonus ? 1 : 0);
    }
};

struct generation_stats {
    int64_t total_drafted = 0;
    int64_t total_accepted = 0;
    int64_t steps = 0;
    int64_t tokens_emitted = 0;
    double acceptance_rate = 0.0;  // total_accepted / total_drafted
};

struct generation_result {
    token_seq tokens;  // at most max_tokens, excludes the prompt
    generation_stats stats;
    std::vector<step_trace> traces;
};

// Sample gamma speculative tokens from the drafter on the retrieval
// context; returns the tokens and the full drafter distribution at each
// position (the verifier needs them for the logits shift and the
// acceptance ratio).
std::pair<token_seq, std::vector<prob_vec>> draft_block(const lm_backend& drafter,
                                                        const token_seq& retrieval_ctx,
                                                        const token_seq& prefix, int32_t gamma,
                                                        double temperature, rng_stream& rng);

// One distillation descent step on the target logits toward the drafter:
// z_hat = z + eta * T * (q - p). Caller guarantees p = softmax_t(z, T).
// eta == 0 returns z unchanged.
logit_vec augment_logits(const logit_vec& z, const prob_vec& p, const prob_vec& q, double eta,
                         double temperature);

// Entries of the shifted distribution below tail_factor * max are
// restored to the target's values, then the vector is l1-renormalized.
// If no entry changes the input is returned as-is (it is already a
// distribution), which keeps the eta = 0 path bit-exact.
prob_vec tail_preserve(const prob_vec& target_p, const prob_vec& p_hat_raw, double tail_factor);

// Residual distribution sampled on rejection:
//   norm(max(p - p_hat, p - q, 0)),
// falling back to p itself when the clamped residual has no mass.
token_id residual_sample(const prob_vec& p, const prob_vec& p_hat, const prob_vec& q,
                         rng_stream& rng);

// Sequential verification of a drafted block. For each position j the
// target logits condition on [full_ctx; prefix; drafted_{<j}]; the
// shifted, tail-preserved distribution p_hat accepts drafted[j] iff
// r <= min(1, p_hat[x] / q[x]) with one fresh uniform per position.
// On first rejection a correction token is drawn from the residual.
step_trace verify_block(const lm_backend& target, const token_seq& full_ctx,
                        const token_seq& prefix, const token_seq& drafted,
                        const std::vector<prob_vec>& draft_probs, const engine_config& cfg,
                        rng_stream& rng);

// Full generation loop: draft against the retrieval context, verify
// against the full context, emit accepted tokens plus the correction on
// rejection, until max_tokens tokens have been produced. The returned
// sequence is truncated to max_tokens; stats cover every traced step.
generation_result generate(const lm_backend& target, const lm_backend& drafter,
                           const token_seq& full_ctx, const token_seq& retrieval_ctx,
                           const token_seq& query_prefix, const engine_config& cfg);

generation_stats stats_from_traces(const std::vector<step_trace>& traces);

}  // namespace rapid
