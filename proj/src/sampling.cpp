#include "rapid/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rapid {

prob_vec softmax_t(const logit_vec& z, double temperature) {
    if (z.empty()) {
        throw std::invalid_argument("softmax_t: empty logit vector");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("softmax_t: temperature must be positive and finite");
    }
    if (!is_finite_vec(z)) {
        throw std::invalid_argument("softmax_t: non-finite logit");
    }
    const double z_max = *std::max_element(z.begin(), z.end());
    prob_vec p(z.size());
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp((z[i] - z_max) / temperature);
        sum += p[i];
    }
    for (double& x : p) {
        x /= sum;
    }
    return p;
}

token_id sample_categorical(const prob_vec& p, rng_stream& rng) {
    if (p.empty()) {
        throw std::invalid_argument("sample_categorical: empty distribution");
    }
    double total = 0.0;
    for (double x : p) {
        total += x;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("sample_categorical: all-zero distribution");
    }
    const double u = rng.uniform() * total;
    double cum = 0.0;
    token_id last_positive = -1;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            last_positive = static_cast<token_id>(i);
        }
        cum += p[i];
        if (u < cum) {
            return static_cast<token_id>(i);
        }
    }
    // u landed past the accumulated sum due to rounding
    return last_positive;
}

prob_vec norm_clamped(const std::vector<double>& v) {
    prob_vec out(v.size());
    double sum = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] > 0.0 ? v[i] : 0.0;
        sum += out[i];
    }
    if (!(sum > 0.0)) {
        throw std::domain_error("norm_clamped: no positive mass after clamping");
    }
    for (double& x : out) {
        x /= sum;
    }
    return out;
}

std::vector<double> kd_gradient(const logit_vec& z, const prob_vec& q, double temperature) {
    if (z.size() != q.size()) {
        throw std::invalid_argument("kd_gradient: size mismatch");
    }
    const prob_vec p = softmax_t(z, temperature);
    std::vector<double> grad(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        grad[i] = temperature * (p[i] - q[i]);
    }
    return grad;
}

double kl_divergence(const prob_vec& q, const prob_vec& p) {
    if (q.size() != p.size()) {
        throw std::invalid_argument("kl_divergence: size mismatch");
    }
    double kl = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (q[i] == 0.0) {
            continue;
        }
        if (p[i] == 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        kl += q[i] * std::log(q[i] / p[i]);
    }
    return kl;
}

double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("tv_distance: size mismatch");
    }
    double l1 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        l1 += std::abs(a[i] - b[i]);
    }
    return 0.5 * l1;
}

}  // namespace rapid
