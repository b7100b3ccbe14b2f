#include "rapid/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rapid/engine.hpp"
#include "rapid/oracle.hpp"
#include "rapid/retrieval.hpp"
#include "rapid/rng.hpp"
#include "rapid/sampling.hpp"

namespace rapid {

namespace {

std::string vec_str(const std::vector<double>& v) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < v.size(); ++i) {
        os << (i ? ", " : "") << v[i];
    }
    os << ']';
    return os.str();
}

prob_vec random_simplex(rng_stream& rng, int32_t n, double min_mass = 0.0) {
    prob_vec p(n);
    double sum = 0.0;
    for (auto& x : p) {
        x = min_mass - std::log(1.0 - rng.uniform());  // exponential draws
        sum += x;
    }
    for (auto& x : p) {
        x /= sum;
    }
    return p;
}

logit_vec random_logits(rng_stream& rng, int32_t n, double bound) {
    logit_vec z(n);
    for (auto& x : z) {
        x = bound * (2.0 * rng.uniform() - 1.0);
    }
    return z;
}

prob_vec tail_no_renorm(const prob_vec& target_p, const prob_vec& p_hat_raw, double tail_factor) {
    const double threshold = tail_factor * *std::max_element(p_hat_raw.begin(), p_hat_raw.end());
    prob_vec out = p_hat_raw;
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i] < threshold) {
            out[i] = target_p[i];
        }
    }
    return out;
}

suite_result check_gradient_vs_fd(uint64_t seed, mutation mut) {
    suite_result res{"gradient_vs_finite_differences", true, 0, ""};
    rng_stream rng(seed ^ 0x67726164ULL);
    const double h = 1e-5;
    for (double temperature : {0.5, 1.0, 2.0}) {
        for (int i = 0; i < 100; ++i) {
            const int32_t n = 3 + static_cast<int32_t>(rng.next_below(5));
            const logit_vec z = random_logits(rng, n, 2.0);
            const prob_vec q = random_simplex(rng, n);
            std::vector<double> analytic = kd_gradient(z, q, temperature);
            if (mut == mutation::kd_sign_flip) {
                for (auto& g : analytic) {
                    g = -g;
                }
            }
            const auto loss = [&](const logit_vec& logits) {
                return temperature * temperature * kl_divergence(q, softmax_t(logits, temperature));
            };
            logit_vec zp = z;
            double max_rel = 0.0;
            for (int32_t k = 0; k < n; ++k) {
                zp[k] = z[k] + h;
                const double up = loss(zp);
                zp[k] = z[k] - h;
                const double down = loss(zp);
                zp[k] = z[k];
                const double fd = (up - down) / (2.0 * h);
                max_rel = std::max(max_rel, std::abs(analytic[k] - fd) / (std::abs(fd) + 1e-12));
            }
            res.cases += 1;
            if (max_rel > 1e-4) {
                res.passed = false;
                std::ostringstream os;
                os << "rel err " << max_rel << " at T=" << temperature << " z=" << vec_str(z)
                   << " q=" << vec_str(q);
                res.detail = os.str();
                return res;
            }
        }
    }
    return res;
}

suite_result check_step_losslessness(uint64_t seed) {
    suite_result res{"step_distribution_losslessness_eta0", true, 0, ""};
    // exhaustive |V|=3 simplex grid, step 0.05, eta = 0 so p_hat = p
    const int steps = 20;
    std::vector<prob_vec> grid;
    for (int i = 0; i <= steps; ++i) {
        for (int j = 0; i + j <= steps; ++j) {
            grid.push_back({i / 20.0, j / 20.0, (steps - i - j) / 20.0});
        }
    }
    for (const auto& p : grid) {
        for (const auto& q : grid) {
            res.cases += 1;
            const auto report = exact_step_distribution(p, p, q);
            if (report.tv_distance > 1e-9) {
                res.passed = false;
                res.detail = "TV=" + std::to_string(report.tv_distance) + " p=" + vec_str(p) +
                             " q=" + vec_str(q);
                return res;
            }
        }
    }
    rng_stream rng(seed ^ 0x6c6f7373ULL);
    for (int i = 0; i < 200; ++i) {
        const int32_t n = 2 + static_cast<int32_t>(rng.next_below(7));
        const prob_vec p = random_simplex(rng, n);
        const prob_vec q = random_simplex(rng, n);
        res.cases += 1;
        const auto report = exact_step_distribution(p, p, q);
        if (report.tv_distance > 1e-9) {
            res.passed = false;
            res.detail = "TV=" + std::to_string(report.tv_distance) + " p=" + vec_str(p) +
                         " q=" + vec_str(q);
            return res;
        }
    }
    return res;
}

// shared fixture pieces for the two empirical suites
struct step_vectors {
    prob_vec p;
    prob_vec q;
    prob_vec p_hat_engine;  // via the (possibly mutated) tail function
    prob_vec p_hat_correct;
};

step_vectors make_step_vectors(rng_stream& rng, double eta, double temperature, double tail_factor,
                               mutation mut) {
    const int32_t n = 3 + static_cast<int32_t>(rng.next_below(6));
    step_vectors sv;
    const logit_vec z = random_logits(rng, n, 2.5);
    sv.p = softmax_t(z, temperature);
    sv.q = random_simplex(rng, n);
    const prob_vec p_hat_raw =
        softmax_t(augment_logits(z, sv.p, sv.q, eta, temperature), temperature);
    sv.p_hat_correct = tail_preserve(sv.p, p_hat_raw, tail_factor);
    sv.p_hat_engine = mut == mutation::tail_skip_renorm ? tail_no_renorm(sv.p, p_hat_raw, tail_factor)
                                                        : sv.p_hat_correct;
    return sv;
}

token_id sample_step(const step_vectors& sv, rng_stream& rng) {
    const token_id x = sample_categorical(sv.q, rng);
    const double r = rng.uniform();
    if (r <= std::min(1.0, sv.p_hat_engine[x] / sv.q[x])) {
        return x;
    }
    return residual_sample(sv.p, sv.p_hat_engine, sv.q, rng);
}

suite_result check_engine_oracle_conformance(uint64_t seed, mutation mut) {
    suite_result res{"engine_oracle_conformance", true, 0, ""};
    rng_stream rng(seed ^ 0x636f6e66ULL);
    const int64_t n_draws = 200000;
    for (double eta : {0.0, 5.0, 20.0}) {
        for (int f = 0; f < 2; ++f) {
            const step_vectors sv = make_step_vectors(rng, eta, 1.0, 0.1, mut);
            const auto exact = exact_step_distribution(sv.p, sv.p_hat_correct, sv.q);
            const prob_vec freq = monte_carlo_step(
                [&](rng_stream& r) { return sample_step(sv, r); }, n_draws, rng,
                static_cast<int32_t>(sv.p.size()));
            const double tv = tv_distance(freq, exact.exact_output);
            res.cases += 1;
            if (tv > 0.01) {
                res.passed = false;
                std::ostringstream os;
                os << "TV=" << tv << " at eta=" << eta << " p=" << vec_str(sv.p)
                   << " q=" << vec_str(sv.q);
                res.detail = os.str();
                return res;
            }
        }
    }
    return res;
}

suite_result check_acceptance_rate_identity(uint64_t seed, mutation mut) {
    suite_result res{"acceptance_rate_identity", true, 0, ""};
    rng_stream rng(seed ^ 0x62657461ULL);
    const int64_t n_draws = 200000;
    for (double eta : {0.0, 20.0}) {
        for (int f = 0; f < 2; ++f) {
            const step_vectors sv = make_step_vectors(rng, eta, 1.0, 0.1, mut);
            double beta = 0.0;
            for (size_t i = 0; i < sv.p.size(); ++i) {
                beta += std::min(sv.q[i], sv.p_hat_correct[i]);
            }
            int64_t accepted = 0;
            for (int64_t i = 0; i < n_draws; ++i) {
                const token_id x = sample_categorical(sv.q, rng);
                if (rng.uniform() <= std::min(1.0, sv.p_hat_engine[x] / sv.q[x])) {
                    accepted += 1;
                }
            }
            const double empirical = static_cast<double>(accepted) / static_cast<double>(n_draws);
            const double sigma = std::sqrt(std::max(beta * (1.0 - beta), 1e-12) /
                                           static_cast<double>(n_draws));
            res.cases += 1;
            if (std::abs(empirical - beta) > 4.0 * sigma + 1e-6) {
                res.passed = false;
                std::ostringstream os;
                os << "empirical=" << empirical << " beta=" << beta << " at eta=" << eta
                   << " q=" << vec_str(sv.q);
                res.detail = os.str();
                return res;
            }
        }
    }
    return res;
}

suite_result check_tail_substitution(uint64_t seed) {
    suite_result res{"tail_substitution", true, 0, ""};
    rng_stream rng(seed ^ 0x7461696cULL);
    for (int i = 0; i < 100; ++i) {
        const int32_t n = 3 + static_cast<int32_t>(rng.next_below(6));
        const prob_vec p = random_simplex(rng, n);
        const prob_vec p_hat_raw = random_simplex(rng, n);
        const double alpha = 0.1;
        const prob_vec out = tail_preserve(p, p_hat_raw, alpha);

        // independent reconstruction
        const double threshold = alpha * *std::max_element(p_hat_raw.begin(), p_hat_raw.end());
        std::vector<double> expected(n);
        double sum = 0.0;
        for (int32_t k = 0; k < n; ++k) {
            expected[k] = p_hat_raw[k] < threshold ? p[k] : p_hat_raw[k];
            sum += expected[k];
        }
        double total = 0.0;
        double max_err = 0.0;
        for (int32_t k = 0; k < n; ++k) {
            max_err = std::max(max_err, std::abs(out[k] - expected[k] / sum));
            total += out[k];
        }
        res.cases += 1;
        if (max_err > 1e-12 || std::abs(total - 1.0) > 1e-12) {
            res.passed = false;
            res.detail = "err=" + std::to_string(max_err) + " p_hat_raw=" + vec_str(p_hat_raw);
            return res;
        }
    }
    return res;
}

suite_result check_retrieval_contract(uint64_t seed) {
    suite_result res{"retrieval_contract", true, 0, ""};
    rng_stream rng(seed ^ 0x72657472ULL);
    retrieval_config cfg;

    // budget bounds, exact
    if (retrieval_budget(122880, cfg) != 5120 || retrieval_budget(4096, cfg) != 4096) {
        res.passed = false;
        res.detail = "budget bounds mismatch";
        return res;
    }
    res.cases += 2;

    for (int i = 0; i < 20; ++i) {
        retrieval_config rc;
        rc.chunk_size = 1 + static_cast<int64_t>(rng.next_below(64));
        rc.min_budget = rc.chunk_size;
        const int64_t len = 1 + static_cast<int64_t>(rng.next_below(2000));
        token_seq context(len);
        for (auto& t : context) {
            t = static_cast<token_id>(rng.next_below(50));
        }
        token_seq joined;
        for (const auto& c : chunk_context(context, rc)) {
            joined.insert(joined.end(), c.tokens.begin(), c.tokens.end());
        }
        res.cases += 1;
        if (joined != context) {
            res.passed = false;
            res.detail = "chunk round trip failed at len=" + std::to_string(len);
            return res;
        }

        token_seq query(8);
        for (auto& t : query) {
            t = static_cast<token_id>(rng.next_below(50));
        }
        std::vector<scored_chunk> trace;
        const token_seq selected = select_chunks(query, context, rc, &trace);
        int64_t selected_len = 0;
        for (const auto& sc : trace) {
            if (sc.selected) {
                selected_len += sc.length;
                if (sc.score < rc.sim_threshold) {
                    res.passed = false;
                    res.detail = "selected chunk below threshold";
                    return res;
                }
            }
        }
        res.cases += 1;
        if (static_cast<int64_t>(selected.size()) != selected_len ||
            selected_len > retrieval_budget(len, rc)) {
            res.passed = false;
            res.detail = "budget violated at len=" + std::to_string(len);
            return res;
        }
    }
    return res;
}

suite_result check_sampling_properties(uint64_t seed) {
    suite_result res{"sampling_properties", true, 0, ""};
    rng_stream rng(seed ^ 0x73616d70ULL);

    for (int i = 0; i < 50; ++i) {
        const int32_t n = 2 + static_cast<int32_t>(rng.next_below(7));
        const logit_vec z = random_logits(rng, n, 3.0);
        const double temperature = 0.25 + 2.0 * rng.uniform();
        const double shift = 10.0 * (2.0 * rng.uniform() - 1.0);
        logit_vec shifted = z;
        for (auto& x : shifted) {
            x += shift;
        }
        const prob_vec a = softmax_t(z, temperature);
        const prob_vec b = softmax_t(shifted, temperature);
        res.cases += 1;
        if (tv_distance(a, b) > 1e-12) {
            res.passed = false;
            res.detail = "shift invariance violated, z=" + vec_str(z);
            return res;
        }
    }

    // seeded reproducibility
    const prob_vec p = {0.2, 0.5, 0.3};
    rng_stream r1(12345);
    rng_stream r2(12345);
    for (int i = 0; i < 1000; ++i) {
        res.cases += 1;
        if (sample_categorical(p, r1) != sample_categorical(p, r2)) {
            res.passed = false;
            res.detail = "sampler not reproducible at draw " + std::to_string(i);
            return res;
        }
    }

    // frequency bands
    const int64_t n_draws = 200000;
    std::vector<int64_t> counts(3, 0);
    for (int64_t i = 0; i < n_draws; ++i) {
        counts[sample_categorical(p, rng)] += 1;
    }
    for (size_t t = 0; t < p.size(); ++t) {
        const double freq = static_cast<double>(counts[t]) / static_cast<double>(n_draws);
        const double sigma = std::sqrt(p[t] * (1.0 - p[t]) / static_cast<double>(n_draws));
        res.cases += 1;
        if (std::abs(freq - p[t]) > 4.0 * sigma) {
            res.passed = false;
            res.detail = "frequency out of band for token " + std::to_string(t);
            return res;
        }
    }
    return res;
}

suite_result check_shift_descent(uint64_t seed) {
    suite_result res{"shift_descent_and_receptivity", true, 0, ""};
    rng_stream rng(seed ^ 0x64657363ULL);
    int descended = 0;
    const int total = 100;
    for (int i = 0; i < total; ++i) {
        const int32_t n = 2 + static_cast<int32_t>(rng.next_below(7));
        const logit_vec z = random_logits(rng, n, 1.0);
        const prob_vec q = random_simplex(rng, n);
        const auto curve = eta_divergence_curve(z, q, 1.0, {0.0, 0.01});
        if (curve[1].kl_q_phat <= curve[0].kl_q_phat) {
            descended += 1;
        }
        res.cases += 1;
    }
    if (descended < 99) {
        res.passed = false;
        res.detail = "descent held in only " + std::to_string(descended) + "/100 instances";
        return res;
    }

    // dominant-mode drafter: mode margin exceeds the bounded target spread,
    // so the huge shift must move the argmax onto the drafter's mode
    for (int i = 0; i < 50; ++i) {
        const int32_t n = 3 + static_cast<int32_t>(rng.next_below(6));
        const logit_vec z = random_logits(rng, n, 1.0);
        prob_vec q = random_simplex(rng, n);
        const auto mode = static_cast<int32_t>(rng.next_below(n));
        for (auto& x : q) {
            x *= 0.25;
        }
        q[mode] += 0.75;
        const prob_vec p = softmax_t(z, 1.0);
        const prob_vec p_hat =
            softmax_t(augment_logits(z, p, q, 1e6, 1.0), 1.0);
        const auto argmax = static_cast<int32_t>(
            std::max_element(p_hat.begin(), p_hat.end()) - p_hat.begin());
        res.cases += 1;
        if (argmax != mode) {
            res.passed = false;
            res.detail = "receptivity failed: mode=" + std::to_string(mode) + " argmax=" +
                         std::to_string(argmax) + " z=" + vec_str(z) + " q=" + vec_str(q);
            return res;
        }
    }
    return res;
}

}  // namespace

mutation mutation_from_name(const std::string& name) {
    if (name.empty() || name == "none") {
        return mutation::none;
    }
    if (name == "kd_sign_flip") {
        return mutation::kd_sign_flip;
    }
    if (name == "tail_skip_renorm") {
        return mutation::tail_skip_renorm;
    }
    throw std::invalid_argument("unknown mutation: " + name);
}

std::vector<suite_result> run_verify_suites(uint64_t seed, mutation mut) {
    std::vector<suite_result> results;
    results.push_back(check_gradient_vs_fd(seed, mut));
    results.push_back(check_step_losslessness(seed));
    results.push_back(check_engine_oracle_conformance(seed, mut));
    results.push_back(check_acceptance_rate_identity(seed, mut));
    results.push_back(check_tail_substitution(seed));
    results.push_back(check_retrieval_contract(seed));
    results.push_back(check_sampling_properties(seed));
    results.push_back(check_shift_descent(seed));
    return results;
}

}  // namespace rapid
