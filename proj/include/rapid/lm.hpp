#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "rapid/types.hpp"

namespace rapid {

// Conditional next-token distribution provider. Implementations are
// immutable after construction and deterministic: identical contexts
// yield bit-identical logit vectors. All stochasticity lives in the
// sampler. Logits are log-probabilities, so softmax at T=1 recovers
// the underlying distribution and temperature semantics are the usual
// p^(1/T) renormalization.
class lm_backend {
public:
    virtual ~lm_backend() = default;

    virtual const vocab& vocabulary() const = 0;
    virtual std::optional<int32_t> context_window() const { return std::nullopt; }

    // Next-token logits given the full context. Throws
    // std::invalid_argument on out-of-vocab token ids.
    logit_vec logits(const token_seq& ctx) const;

protected:
    // ctx already vocab-checked and truncated to the context window
    virtual logit_vec logits_impl(const token_seq& ctx) const = 0;
};

// Log-probability assigned to tokens with zero stored mass. Large enough
// in magnitude that exp underflows to exactly 0 after max-subtraction,
// while keeping every logit finite.
inline constexpr double log_prob_floor = -1.0e4;

logit_vec log_probs(const prob_vec& p);

// result[k] = logits(prefix ++ candidates[0..k-1]) for k = 0..len-1,
// i.e. the target-side single-pass evaluation of all candidate positions.
std::vector<logit_vec> logits_batch(const lm_backend& backend, const token_seq& prefix,
                                    const token_seq& candidates);

// Fixed table from the last-m token window to a stored distribution;
// unseen or too-short windows fall back to `fallback`.
class table_lm : public lm_backend {
public:
    table_lm(vocab v, int32_t order, prob_vec fallback,
             std::map<token_seq, prob_vec> table = {},
             std::optional<int32_t> window = std::nullopt);

    const vocab& vocabulary() const override { return vocab_; }
    std::optional<int32_t> context_window() const override { return window_; }
    int32_t order() const { return order_; }
    const prob_vec& fallback() const { return fallback_; }
    const std::map<token_seq, prob_vec>& table() const { return table_; }

protected:
    logit_vec logits_impl(const token_seq& ctx) const override;

private:
    vocab vocab_;
    int32_t order_;
    prob_vec fallback_;
    std::map<token_seq, prob_vec> table_;
    std::optional<int32_t> window_;
};

// Add-k smoothed counts over last-m windows:
//   p(t | w) = (count(w, t) + k) / (total(w) + k * |V|)
class ngram_lm : public lm_backend {
public:
    ngram_lm(vocab v, int32_t order, double smoothing,
             std::map<token_seq, std::vector<double>> counts = {},
             std::optional<int32_t> window = std::nullopt);

    const vocab& vocabulary() const override { return vocab_; }
    std::optional<int32_t> context_window() const override { return window_; }
    int32_t order() const { return order_; }
    double smoothing() const { return smoothing_; }
    const std::map<token_seq, std::vector<double>>& counts() const { return counts_; }

    void observe(const token_seq& window, token_id next, double weight = 1.0);

protected:
    logit_vec logits_impl(const token_seq& ctx) const override;

private:
    vocab vocab_;
    int32_t order_;
    double smoothing_;
    std::map<token_seq, std::vector<double>> counts_;
    std::optional<int32_t> window_;
};

// Emits `base` unless a fact trigger occurs anywhere in the context, in
// which case the answer token gets exactly `confidence` and the rest of
// the mass is spread over the other tokens proportionally to `base`.
// The first matching fact (in stored order) wins.
class context_oracle_lm : public lm_backend {
public:
    struct fact {
        token_seq trigger;
        token_id answer = 0;
        double confidence = 0.0;  // in (0, 1)
    };

    context_oracle_lm(vocab v, prob_vec base, std::vector<fact> facts,
                      std::optional<int32_t> window = std::nullopt);

    const vocab& vocabulary() const override { return vocab_; }
    std::optional<int32_t> context_window() const override { return window_; }
    const prob_vec& base() const { return base_; }
    const std::vector<fact>& facts() const { return facts_; }

protected:
    logit_vec logits_impl(const token_seq& ctx) const override;

private:
    vocab vocab_;
    prob_vec base_;
    std::vector<fact> facts_;
    std::optional<int32_t> window_;
};

// Line-delimited text format. Header: kind, |V|, order, smoothing.
// Then one record per entry; table/count records are the window tokens
// followed by |V| values. Values print with 17 significant digits so a
// save/load round trip of a table_lm is exact.
void save_lm(std::ostream& os, const lm_backend& backend);
void save_lm_file(const std::string& path, const lm_backend& backend);
std::unique_ptr<lm_backend> load_lm(std::istream& is);
std::unique_ptr<lm_backend> load_lm_file(const std::string& path);

}  // namespace rapid
