#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rapid {

// Deliberate defects for exercising the verify suites themselves: the
// suites must go red when one of these is injected into the checked path.
enum class mutation {
    none,
    kd_sign_flip,       // analytic gradient with flipped sign
    tail_skip_renorm,   // tail substitution without renormalization
};

mutation mutation_from_name(const std::string& name);

struct suite_result {
    std::string name;
    bool passed = false;
    int64_t cases = 0;
    std::string detail;  // first failing case, when any
};

// Self-contained invariant suites over randomized instances, seeded for
// reproducibility. Covers the distillation gradient, step-distribution
// losslessness at eta = 0, engine/oracle conformance, the acceptance
// rate identity, tail substitution, retrieval contracts, sampler
// properties, and the shift descent/receptivity behavior.
std::vector<suite_result> run_verify_suites(uint64_t seed, mutation mut = mutation::none);

}  // namespace rapid
