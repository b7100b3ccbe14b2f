#pragma once

#include "rapid/rng.hpp"
#include "rapid/types.hpp"

namespace rapid {

// p_i = exp(z_i / T) / sum_j exp(z_j / T), computed with max-subtraction.
// T must be positive and finite; all logits must be finite.
prob_vec softmax_t(const logit_vec& z, double temperature);

// Inverse-CDF draw over ascending token id using a single uniform.
token_id sample_categorical(const prob_vec& p, rng_stream& rng);

// max(v, 0) / l1(max(v, 0)). Throws std::domain_error when no entry is
// positive after clamping; callers that need a fallback check first.
prob_vec norm_clamped(const std::vector<double>& v);

// Gradient of the distillation loss L = T^2 * KL(q || softmax(z/T))
// with respect to z: grad_i = T * (p_i - q_i). Entries sum to zero,
// so the descent step z - eta*grad equals z + eta*T*(q - p).
std::vector<double> kd_gradient(const logit_vec& z, const prob_vec& q, double temperature);

// KL(q || p) with the convention 0*log(0/x) = 0. Returns +inf when q
// has support where p is numerically zero.
double kl_divergence(const prob_vec& q, const prob_vec& p);

// total variation distance, 0.5 * l1(a - b)
double tv_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rapid
