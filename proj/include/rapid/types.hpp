#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rapid {

using token_id = int32_t;
using token_seq = std::vector<token_id>;

// Unnormalized scores and probability vectors over a dense vocabulary.
// Both are plain vectors; validity is checked at interface boundaries.
using logit_vec = std::vector<double>;
using prob_vec = std::vector<double>;

struct vocab {
    int32_t size = 0;

    bool valid() const { return size >= 2; }
    bool contains(token_id id) const { return id >= 0 && id < size; }
};

inline void check_tokens(const vocab& v, const token_seq& ctx) {
    for (token_id id : ctx) {
        if (!v.contains(id)) {
            throw std::invalid_argument("token id " + std::to_string(id) +
                                        " out of range for vocab of size " + std::to_string(v.size));
        }
    }
}

bool is_finite_vec(const std::vector<double>& v);

// sum within tol of 1, all entries >= 0
bool is_prob_vec(const prob_vec& p, double tol = 1e-9);

token_seq concat(const token_seq& a, const token_seq& b);

// true if `needle` occurs as a contiguous subsequence of `hay`
bool contains_subseq(const token_seq& hay, const token_seq& needle);

}  // namespace rapid
