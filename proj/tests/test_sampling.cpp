#include <doctest.h>

#include <cmath>

#include "rapid/rng.hpp"
#include "rapid/sampling.hpp"

using namespace rapid;

TEST_CASE("softmax_t basics") {
    SUBCASE("constant logits give uniform at any temperature") {
        for (double t : {0.1, 1.0, 7.5}) {
            const prob_vec p = softmax_t({3.0, 3.0, 3.0}, t);
            for (double x : p) {
                CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
            }
        }
    }
    SUBCASE("z = [ln 2, 0] at T=1 gives [2/3, 1/3]") {
        const prob_vec p = softmax_t({std::log(2.0), 0.0}, 1.0);
        CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("z = [0.8, -0.8] at T=1") {
        // e^1.6 / (e^1.6 + 1) = 0.83202...
        const prob_vec p = softmax_t({0.8, -0.8}, 1.0);
        CHECK(p[0] == doctest::Approx(0.8320).epsilon(2e-4));
        CHECK(p[1] == doctest::Approx(0.1680).epsilon(2e-3));
    }
    SUBCASE("sums to one and is monotone in the logits") {
        const logit_vec z = {1.5, -0.2, 0.0, 3.1, -2.0};
        const prob_vec p = softmax_t(z, 0.7);
        double sum = 0.0;
        for (double x : p) {
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        for (size_t i = 0; i < z.size(); ++i) {
            for (size_t j = 0; j < z.size(); ++j) {
                if (z[i] > z[j]) {
                    CHECK(p[i] > p[j]);
                }
            }
        }
    }
    SUBCASE("rejects bad input") {
        CHECK_THROWS_AS(softmax_t({1.0, std::nan("")}, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(softmax_t({1.0, 2.0}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(softmax_t({}, 1.0), std::invalid_argument);
    }
}

TEST_CASE("softmax_t shift invariance") {
    rng_stream rng(7);
    for (int i = 0; i < 200; ++i) {
        const size_t n = 2 + rng.next_below(6);
        logit_vec z(n);
        for (auto& x : z) {
            x = 6.0 * rng.uniform() - 3.0;
        }
        const double c = 20.0 * rng.uniform() - 10.0;
        logit_vec shifted = z;
        for (auto& x : shifted) {
            x += c;
        }
        const double t = 0.25 + 2.0 * rng.uniform();
        const prob_vec a = softmax_t(z, t);
        const prob_vec b = softmax_t(shifted, t);
        for (size_t k = 0; k < n; ++k) {
            CHECK(std::abs(a[k] - b[k]) <= 1e-12);
        }
    }
}

TEST_CASE("softmax_t concentrates on the argmax as T -> 0") {
    const prob_vec p = softmax_t({0.5, 0.1, -0.3}, 1e-3);
    CHECK(p[0] >= 1.0 - 1e-6);
}

TEST_CASE("sample_categorical") {
    SUBCASE("point mass always returns its token") {
        rng_stream rng(1);
        for (int i = 0; i < 100; ++i) {
            CHECK(sample_categorical({1.0, 0.0, 0.0}, rng) == 0);
        }
    }
    SUBCASE("inverse-CDF boundary at u = 0.5") {
        // locate seeds whose first uniform falls on either side of 0.5
        bool saw_low = false;
        bool saw_high = false;
        for (uint64_t seed = 0; seed < 64 && !(saw_low && saw_high); ++seed) {
            rng_stream probe(seed);
            const double u = probe.uniform();
            rng_stream replay(seed);
            const token_id t = sample_categorical({0.5, 0.5}, replay);
            if (u < 0.5) {
                CHECK(t == 0);
                saw_low = true;
            } else {
                CHECK(t == 1);
                saw_high = true;
            }
        }
        CHECK(saw_low);
        CHECK(saw_high);
    }
    SUBCASE("empirical frequencies approach the distribution") {
        const prob_vec p = {0.2, 0.5, 0.3};
        const int64_t n = 1000000;
        rng_stream rng(99);
        std::vector<int64_t> counts(3, 0);
        for (int64_t i = 0; i < n; ++i) {
            counts[sample_categorical(p, rng)] += 1;
        }
        for (size_t t = 0; t < p.size(); ++t) {
            const double freq = static_cast<double>(counts[t]) / static_cast<double>(n);
            const double sigma = std::sqrt(p[t] * (1.0 - p[t]) / static_cast<double>(n));
            CHECK(std::abs(freq - p[t]) <= 3.0 * sigma);
        }
    }
    SUBCASE("fixed seed fixes the token sequence") {
        const prob_vec p = {0.25, 0.25, 0.25, 0.25};
        rng_stream a(42);
        rng_stream b(42);
        for (int i = 0; i < 500; ++i) {
            CHECK(sample_categorical(p, a) == sample_categorical(p, b));
        }
    }
    SUBCASE("all-zero vector is rejected") {
        rng_stream rng(5);
        CHECK_THROWS_AS(sample_categorical({0.0, 0.0}, rng), std::invalid_argument);
    }
}

TEST_CASE("norm_clamped") {
    SUBCASE("clamps negatives then divides by the l1 norm") {
        const prob_vec p = norm_clamped({0.3, -0.2, 0.1});
        CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(p[1] == 0.0);
        CHECK(p[2] == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("a distribution is a fixed point") {
        const std::vector<double> v = {0.5, 0.3, 0.2};
        const prob_vec p = norm_clamped(v);
        for (size_t i = 0; i < v.size(); ++i) {
            CHECK(p[i] == doctest::Approx(v[i]).epsilon(1e-14));
        }
    }
    SUBCASE("single positive entry becomes a point mass") {
        const prob_vec p = norm_clamped({0.0, 0.0, 2.0});
        CHECK(p[2] == 1.0);
    }
    SUBCASE("no positive mass throws") {
        CHECK_THROWS_AS(norm_clamped({-1.0, 0.0}), std::domain_error);
    }
}

TEST_CASE("kd_gradient") {
    SUBCASE("zero when the teacher equals the student") {
        const logit_vec z = {0.4, -1.1, 0.7};
        const auto grad = kd_gradient(z, softmax_t(z, 1.3), 1.3);
        for (double g : grad) {
            CHECK(std::abs(g) <= 1e-15);
        }
    }
    SUBCASE("hand value: z=[ln 2, 0], T=1, q=[1/2, 1/2]") {
        const auto grad = kd_gradient({std::log(2.0), 0.0}, {0.5, 0.5}, 1.0);
        CHECK(grad[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
        CHECK(grad[1] == doctest::Approx(-1.0 / 6.0).epsilon(1e-12));
    }
    SUBCASE("entries sum to zero") {
        rng_stream rng(17);
        for (int i = 0; i < 100; ++i) {
            const size_t n = 2 + rng.next_below(5);
            logit_vec z(n);
            prob_vec q(n);
            double qs = 0.0;
            for (size_t k = 0; k < n; ++k) {
                z[k] = 4.0 * rng.uniform() - 2.0;
                q[k] = -std::log(1.0 - rng.uniform());
                qs += q[k];
            }
            for (auto& x : q) {
                x /= qs;
            }
            const auto grad = kd_gradient(z, q, 0.5 + rng.uniform());
            double sum = 0.0;
            for (double g : grad) {
                sum += g;
            }
            CHECK(std::abs(sum) <= 1e-12);
        }
    }
    SUBCASE("descent step moves the student toward the teacher") {
        // z - eta*grad == z + eta*T*(q - p), so KL(q || p) must drop
        const logit_vec z = {1.0, -0.5, 0.2};
        const prob_vec q = {0.6, 0.3, 0.1};
        const double temperature = 2.0;
        const double eta = 0.05;
        const auto grad = kd_gradient(z, q, temperature);
        logit_vec stepped = z;
        for (size_t i = 0; i < z.size(); ++i) {
            stepped[i] -= eta * grad[i];
        }
        const double before = kl_divergence(q, softmax_t(z, temperature));
        const double after = kl_divergence(q, softmax_t(stepped, temperature));
        CHECK(after < before);
    }
}

TEST_CASE("kl and tv helpers") {
    CHECK(kl_divergence({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(0.0));
    CHECK(std::isinf(kl_divergence({0.5, 0.5}, {1.0, 0.0})));
    CHECK(kl_divergence({1.0, 0.0}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(tv_distance({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(1.0));
    CHECK(tv_distance({0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}) == 0.0);
}

TEST_CASE("rng stream reproducibility and range") {
    rng_stream a(123456789);
    rng_stream b(123456789);
    for (int i = 0; i < 10000; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(a.next_u64() == b.next_u64());
    // distinct seeds should not collide on their opening draw
    rng_stream c(0);
    rng_stream d(1);
    CHECK(c.next_u64() != d.next_u64());
}
