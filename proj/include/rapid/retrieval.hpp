#pragma once

#include <vector>

#include "rapid/types.hpp"

namespace rapid {

struct chunk {
    token_seq tokens;
    int64_t start_offset = 0;  // token offset into the source context
};

using embedding_vec = std::vector<double>;

struct retrieval_config {
    int64_t chunk_size = 512;
    double sim_threshold = 0.3;
    int64_t min_budget = 4096;   // retrieval length lower bound, tokens
    double length_divisor = 24.0;  // upper bound is context_len / divisor
    int32_t embed_dim = 64;

    void validate() const;
};

// Splits C into consecutive chunks; all but possibly the last have
// exactly chunk_size tokens and concatenation reproduces C.
std::vector<chunk> chunk_context(const token_seq& context, const retrieval_config& cfg);

// Deterministic hashed bag-of-tokens embedding: token id -> bucket via
// splitmix64, counts accumulated, then L2-normalized. Empty input maps
// to the zero vector.
embedding_vec embed(const token_seq& tokens, const retrieval_config& cfg);

// Cosine similarity; zero vectors score 0 by convention.
double cosine(const embedding_vec& a, const embedding_vec& b);

// max(min_budget, floor(context_len / divisor)): the divisor cap only
// binds once it exceeds the lower bound.
int64_t retrieval_budget(int64_t context_len, const retrieval_config& cfg);

struct scored_chunk {
    int64_t start_offset = 0;
    int64_t length = 0;
    double score = 0.0;
    bool selected = false;
};

// Greedy top-score selection subject to the similarity threshold and
// token budget; selected chunks are reassembled in source order. Ties
// on score prefer the lower start offset. If trace is non-null it
// receives one row per chunk in source order.
token_seq select_chunks(const token_seq& query, const token_seq& context,
                        const retrieval_config& cfg, std::vector<scored_chunk>* trace = nullptr);

}  // namespace rapid
