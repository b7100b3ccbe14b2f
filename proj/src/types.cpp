#include "rapid/types.hpp"

#include <algorithm>
#include <cmath>

namespace rapid {

bool is_finite_vec(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

bool is_prob_vec(const prob_vec& p, double tol) {
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            return false;
        }
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

token_seq concat(const token_seq& a, const token_seq& b) {
    token_seq out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

bool contains_subseq(const token_seq& hay, const token_seq& needle) {
    if (needle.empty()) {
        return true;
    }
    if (needle.size() > hay.size()) {
        return false;
    }
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace rapid
