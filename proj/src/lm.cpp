#include "rapid/lm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rapid {

namespace {

void check_dist(const prob_vec& p, size_t vocab_size, const char* what) {
    if (p.size() != vocab_size) {
        throw std::invalid_argument(std::string(what) + ": distribution size != vocab size");
    }
    if (!is_prob_vec(p)) {
        throw std::invalid_argument(std::string(what) + ": not a probability vector");
    }
}

token_seq tail_window(const token_seq& ctx, int32_t m) {
    if (static_cast<int32_t>(ctx.size()) <= m) {
        return ctx;
    }
    return token_seq(ctx.end() - m, ctx.end());
}

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

logit_vec log_probs(const prob_vec& p) {
    logit_vec z(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        z[i] = p[i] > 0.0 ? std::log(p[i]) : log_prob_floor;
    }
    return z;
}

logit_vec lm_backend::logits(const token_seq& ctx) const {
    check_tokens(vocabulary(), ctx);
    if (auto w = context_window(); w && static_cast<int32_t>(ctx.size()) > *w) {
        // keep the most recent tokens, causal-LM style
        return logits_impl(token_seq(ctx.end() - *w, ctx.end()));
    }
    return logits_impl(ctx);
}

std::vector<logit_vec> logits_batch(const lm_backend& backend, const token_seq& prefix,
                                    const token_seq& candidates) {
    if (candidates.empty()) {
        throw std::invalid_argument("logits_batch: empty candidates");
    }
    std::vector<logit_vec> out;
    out.reserve(candidates.size());
    token_seq ctx = prefix;
    for (size_t k = 0; k < candidates.size(); ++k) {
        out.push_back(backend.logits(ctx));
        ctx.push_back(candidates[k]);
    }
    return out;
}

// ---- table_lm ----

table_lm::table_lm(vocab v, int32_t order, prob_vec fallback, std::map<token_seq, prob_vec> table,
                   std::optional<int32_t> window)
    : vocab_(v), order_(order), fallback_(std::move(fallback)), table_(std::move(table)), window_(window) {
    if (!vocab_.valid()) {
        throw std::invalid_argument("table_lm: vocab size must be >= 2");
    }
    if (order_ < 0) {
        throw std::invalid_argument("table_lm: negative order");
    }
    check_dist(fallback_, vocab_.size, "table_lm fallback");
    for (const auto& [window_tokens, dist] : table_) {
        if (static_cast<int32_t>(window_tokens.size()) != order_) {
            throw std::invalid_argument("table_lm: window length != order");
        }
        check_tokens(vocab_, window_tokens);
        check_dist(dist, vocab_.size, "table_lm entry");
    }
}

logit_vec table_lm::logits_impl(const token_seq& ctx) const {
    if (static_cast<int32_t>(ctx.size()) >= order_) {
        auto it = table_.find(tail_window(ctx, order_));
        if (it != table_.end()) {
            return log_probs(it->second);
        }
    }
    return log_probs(fallback_);
}

// ---- ngram_lm ----

ngram_lm::ngram_lm(vocab v, int32_t order, double smoothing,
                   std::map<token_seq, std::vector<double>> counts, std::optional<int32_t> window)
    : vocab_(v), order_(order), smoothing_(smoothing), counts_(std::move(counts)), window_(window) {
    if (!vocab_.valid()) {
        throw std::invalid_argument("ngram_lm: vocab size must be >= 2");
    }
    if (order_ < 0) {
        throw std::invalid_argument("ngram_lm: negative order");
    }
    if (!(smoothing_ > 0.0) || !std::isfinite(smoothing_)) {
        throw std::invalid_argument("ngram_lm: smoothing must be > 0");
    }
    for (const auto& [window_tokens, row] : counts_) {
        if (static_cast<int32_t>(window_tokens.size()) != order_) {
            throw std::invalid_argument("ngram_lm: window length != order");
        }
        check_tokens(vocab_, window_tokens);
        if (row.size() != static_cast<size_t>(vocab_.size)) {
            throw std::invalid_argument("ngram_lm: count row size != vocab size");
        }
        for (double c : row) {
            if (!(c >= 0.0) || !std::isfinite(c)) {
                throw std::invalid_argument("ngram_lm: negative or non-finite count");
            }
        }
    }
}

void ngram_lm::observe(const token_seq& window, token_id next, double weight) {
    if (static_cast<int32_t>(window.size()) != order_) {
        throw std::invalid_argument("ngram_lm::observe: window length != order");
    }
    check_tokens(vocab_, window);
    if (!vocab_.contains(next)) {
        throw std::invalid_argument("ngram_lm::observe: next token out of vocab");
    }
    auto& row = counts_.try_emplace(window, std::vector<double>(vocab_.size, 0.0)).first->second;
    row[next] += weight;
}

logit_vec ngram_lm::logits_impl(const token_seq& ctx) const {
    const std::vector<double>* row = nullptr;
    if (static_cast<int32_t>(ctx.size()) >= order_) {
        auto it = counts_.find(tail_window(ctx, order_));
        if (it != counts_.end()) {
            row = &it->second;
        }
    }
    prob_vec p(vocab_.size);
    double total = 0.0;
    if (row) {
        for (double c : *row) {
            total += c;
        }
    }
    const double denom = total + smoothing_ * vocab_.size;
    for (int32_t t = 0; t < vocab_.size; ++t) {
        const double c = row ? (*row)[t] : 0.0;
        p[t] = (c + smoothing_) / denom;
    }
    return log_probs(p);
}

// ---- context_oracle_lm ----

context_oracle_lm::context_oracle_lm(vocab v, prob_vec base, std::vector<fact> facts,
                                     std::optional<int32_t> window)
    : vocab_(v), base_(std::move(base)), facts_(std::move(facts)), window_(window) {
    if (!vocab_.valid()) {
        throw std::invalid_argument("context_oracle_lm: vocab size must be >= 2");
    }
    check_dist(base_, vocab_.size, "context_oracle_lm base");
    for (const auto& f : facts_) {
        if (f.trigger.empty()) {
            throw std::invalid_argument("context_oracle_lm: empty trigger");
        }
        check_tokens(vocab_, f.trigger);
        if (!vocab_.contains(f.answer)) {
            throw std::invalid_argument("context_oracle_lm: answer token out of vocab");
        }
        if (!(f.confidence > 0.0 && f.confidence < 1.0)) {
            throw std::invalid_argument("context_oracle_lm: confidence must be in (0,1)");
        }
    }
}

logit_vec context_oracle_lm::logits_impl(const token_seq& ctx) const {
    for (const auto& f : facts_) {
        if (!contains_subseq(ctx, f.trigger)) {
            continue;
        }
        prob_vec p(vocab_.size, 0.0);
        double other_mass = 0.0;
        for (int32_t t = 0; t < vocab_.size; ++t) {
            if (t != f.answer) {
                other_mass += base_[t];
            }
        }
        const double remainder = 1.0 - f.confidence;
        for (int32_t t = 0; t < vocab_.size; ++t) {
            if (t == f.answer) {
                p[t] = f.confidence;
            } else if (other_mass > 0.0) {
                p[t] = remainder * base_[t] / other_mass;
            } else {
                // base is a point mass on the answer: spread evenly
                p[t] = remainder / (vocab_.size - 1);
            }
        }
        return log_probs(p);
    }
    return log_probs(base_);
}

// ---- serialization ----

namespace {

void write_values(std::ostream& os, const std::vector<double>& vals) {
    for (double x : vals) {
        os << ' ' << fmt17(x);
    }
    os << '\n';
}

void write_window(std::ostream& os, const token_seq& w) {
    for (size_t i = 0; i < w.size(); ++i) {
        os << (i ? " " : "") << w[i];
    }
}

}  // namespace

void save_lm(std::ostream& os, const lm_backend& backend) {
    if (const auto* t = dynamic_cast<const table_lm*>(&backend)) {
        os << "tablelm " << t->vocabulary().size << ' ' << t->order() << " 0\n";
        os << "fallback";
        write_values(os, t->fallback());
        for (const auto& [w, dist] : t->table()) {
            write_window(os, w);
            write_values(os, dist);
        }
        return;
    }
    if (const auto* n = dynamic_cast<const ngram_lm*>(&backend)) {
        os << "ngramlm " << n->vocabulary().size << ' ' << n->order() << ' ' << fmt17(n->smoothing())
           << '\n';
        for (const auto& [w, row] : n->counts()) {
            write_window(os, w);
            write_values(os, row);
        }
        return;
    }
    if (const auto* o = dynamic_cast<const context_oracle_lm*>(&backend)) {
        os << "oraclelm " << o->vocabulary().size << " 0 0\n";
        os << "base";
        write_values(os, o->base());
        for (const auto& f : o->facts()) {
            os << "fact " << f.answer << ' ' << fmt17(f.confidence);
            for (token_id t : f.trigger) {
                os << ' ' << t;
            }
            os << '\n';
        }
        return;
    }
    throw std::invalid_argument("save_lm: unknown backend kind");
}

void save_lm_file(const std::string& path, const lm_backend& backend) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("save_lm_file: cannot open " + path);
    }
    save_lm(os, backend);
}

std::unique_ptr<lm_backend> load_lm(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) {
        throw std::runtime_error("load_lm: empty input");
    }
    std::istringstream hs(header);
    std::string kind;
    int32_t vocab_size = 0;
    int32_t order = 0;
    double smoothing = 0.0;
    if (!(hs >> kind >> vocab_size >> order >> smoothing)) {
        throw std::runtime_error("load_lm: malformed header: " + header);
    }
    const vocab v{vocab_size};

    auto parse_values = [&](std::istringstream& ls, size_t count, const std::string& line) {
        std::vector<double> vals(count);
        for (auto& x : vals) {
            if (!(ls >> x)) {
                throw std::runtime_error("load_lm: malformed record: " + line);
            }
        }
        return vals;
    };

    std::string line;
    if (kind == "tablelm") {
        prob_vec fallback;
        std::map<token_seq, prob_vec> table;
        while (std::getline(is, line)) {
            if (line.empty()) {
                continue;
            }
            std::istringstream ls(line);
            std::string first;
            ls >> first;
            if (first == "fallback") {
                fallback = parse_values(ls, vocab_size, line);
            } else {
                token_seq w(order);
                std::istringstream rs(line);
                for (auto& t : w) {
                    if (!(rs >> t)) {
                        throw std::runtime_error("load_lm: malformed window: " + line);
                    }
                }
                table[w] = parse_values(rs, vocab_size, line);
            }
        }
        if (fallback.empty()) {
            throw std::runtime_error("load_lm: tablelm missing fallback record");
        }
        return std::make_unique<table_lm>(v, order, std::move(fallback), std::move(table));
    }
    if (kind == "ngramlm") {
        std::map<token_seq, std::vector<double>> counts;
        while (std::getline(is, line)) {
            if (line.empty()) {
                continue;
            }
            std::istringstream ls(line);
            token_seq w(order);
            for (auto& t : w) {
                if (!(ls >> t)) {
                    throw std::runtime_error("load_lm: malformed window: " + line);
                }
            }
            counts[w] = parse_values(ls, vocab_size, line);
        }
        return std::make_unique<ngram_lm>(v, order, smoothing, std::move(counts));
    }
    if (kind == "oraclelm") {
        prob_vec base;
        std::vector<context_oracle_lm::fact> facts;
        while (std::getline(is, line)) {
            if (line.empty()) {
                continue;
            }
            std::istringstream ls(line);
            std::string first;
            ls >> first;
            if (first == "base") {
                base = parse_values(ls, vocab_size, line);
            } else if (first == "fact") {
                context_oracle_lm::fact f;
                if (!(ls >> f.answer >> f.confidence)) {
                    throw std::runtime_error("load_lm: malformed fact: " + line);
                }
                token_id t;
                while (ls >> t) {
                    f.trigger.push_back(t);
                }
                facts.push_back(std::move(f));
            } else {
                throw std::runtime_error("load_lm: unknown record: " + line);
            }
        }
        if (base.empty()) {
            throw std::runtime_error("load_lm: oraclelm missing base record");
        }
        return std::make_unique<context_oracle_lm>(v, std::move(base), std::move(facts));
    }
    throw std::runtime_error("load_lm: unknown kind: " + kind);
}

std::unique_ptr<lm_backend> load_lm_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("load_lm_file: cannot open " + path);
    }
    return load_lm(is);
}

}  // namespace rapid
