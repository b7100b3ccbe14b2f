#include "rapid/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rapid {

namespace {

uint64_t splitmix64_once(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

void retrieval_config::validate() const {
    if (chunk_size < 1) {
        throw std::invalid_argument("retrieval_config: chunk_size must be >= 1");
    }
    if (min_budget < chunk_size) {
        throw std::invalid_argument("retrieval_config: min_budget must be >= chunk_size");
    }
    if (!(length_divisor > 1.0)) {
        throw std::invalid_argument("retrieval_config: length_divisor must be > 1");
    }
    if (!(sim_threshold >= 0.0 && sim_threshold <= 1.0)) {
        throw std::invalid_argument("retrieval_config: sim_threshold must be in [0,1]");
    }
    if (embed_dim < 1) {
        throw std::invalid_argument("retrieval_config: embed_dim must be >= 1");
    }
}

std::vector<chunk> chunk_context(const token_seq& context, const retrieval_config& cfg) {
    cfg.validate();
    if (context.empty()) {
        throw std::invalid_argument("chunk_context: empty context");
    }
    std::vector<chunk> chunks;
    const int64_t n = static_cast<int64_t>(context.size());
    for (int64_t off = 0; off < n; off += cfg.chunk_size) {
        const int64_t len = std::min(cfg.chunk_size, n - off);
        chunks.push_back({token_seq(context.begin() + off, context.begin() + off + len), off});
    }
    return chunks;
}

embedding_vec embed(const token_seq& tokens, const retrieval_config& cfg) {
    embedding_vec v(cfg.embed_dim, 0.0);
    if (tokens.empty()) {
        return v;
    }
    for (token_id t : tokens) {
        const uint64_t bucket = splitmix64_once(static_cast<uint64_t>(static_cast<uint32_t>(t))) %
                                static_cast<uint64_t>(cfg.embed_dim);
        v[bucket] += 1.0;
    }
    double norm2 = 0.0;
    for (double x : v) {
        norm2 += x * x;
    }
    const double norm = std::sqrt(norm2);
    for (double& x : v) {
        x /= norm;
    }
    return v;
}

double cosine(const embedding_vec& a, const embedding_vec& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine: dimension mismatch");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

int64_t retrieval_budget(int64_t context_len, const retrieval_config& cfg) {
    if (context_len < 1) {
        throw std::invalid_argument("retrieval_budget: context_len must be >= 1");
    }
    const int64_t cap = static_cast<int64_t>(std::floor(static_cast<double>(context_len) / cfg.length_divisor));
    return std::max(cfg.min_budget, cap);
}

token_seq select_chunks(const token_seq& query, const token_seq& context,
                        const retrieval_config& cfg, std::vector<scored_chunk>* trace) {
    cfg.validate();
    const std::vector<chunk> chunks = chunk_context(context, cfg);
    const embedding_vec query_emb = embed(query, cfg);

    std::vector<scored_chunk> scored;
    scored.reserve(chunks.size());
    for (const auto& c : chunks) {
        scored.push_back({c.start_offset, static_cast<int64_t>(c.tokens.size()),
                          cosine(query_emb, embed(c.tokens, cfg)), false});
    }

    // rank by score, ties to the earlier chunk
    std::vector<size_t> order(scored.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scored[a].score != scored[b].score) {
            return scored[a].score > scored[b].score;
        }
        return scored[a].start_offset < scored[b].start_offset;
    });

    int64_t budget = retrieval_budget(static_cast<int64_t>(context.size()), cfg);
    for (size_t idx : order) {
        if (scored[idx].score < cfg.sim_threshold) {
            break;  // the rest score lower still
        }
        if (scored[idx].length <= budget) {
            scored[idx].selected = true;
            budget -= scored[idx].length;
        }
    }

    token_seq out;
    for (size_t i = 0; i < chunks.size(); ++i) {
        if (scored[i].selected) {
            out.insert(out.end(), chunks[i].tokens.begin(), chunks[i].tokens.end());
        }
    }
    if (trace) {
        *trace = std::move(scored);
    }
    return out;
}

}  // namespace rapid
