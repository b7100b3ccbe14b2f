#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rapid/cost.hpp"
#include "rapid/engine.hpp"
#include "rapid/retrieval.hpp"
#include "rapid/types.hpp"

namespace rapid {

inline constexpr const char* artifact_version = "rapid 0.1.0";

// exit codes shared by all commands
inline constexpr int exit_ok = 0;
inline constexpr int exit_verify_failure = 1;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_internal_error = 3;

struct experiment_config {
    std::string corpus_path;
    std::string target_lm_path;
    std::string drafter_lm_path;
    std::string out_dir = "out";
    int64_t doc_index = 0;
    token_seq query;
    std::optional<token_id> gold_token;
    int64_t repetitions = 1;

    engine_config engine;
    retrieval_config retrieval;
    std::vector<double> eta_grid = {0, 5, 10, 20, 40, 50};

    cost_params cost;
    std::vector<double> context_grid = {1024,  2048,  4096,  8192,   16384,
                                        32768, 65536, 131072};

    std::string mutate;  // verify-only: inject a deliberate defect

    // canonical key-value snapshot, re-parseable by parse_config_text
    std::string to_config_text() const;
};

// Config file grammar: one `key = value` per line, `#` starts a comment,
// lists are space-separated. Unknown keys are an error.
experiment_config parse_config_text(const std::string& text);
experiment_config load_config_file(const std::string& path);

// single-line overrides in the same grammar, applied after the file
void apply_override(experiment_config& cfg, const std::string& key, const std::string& value);

// one document per line, space-separated token ids
std::vector<token_seq> load_corpus(const std::string& path);

uint64_t fnv1a64(const std::string& bytes);
uint64_t fnv1a64_file(const std::string& path);

int run_verify(const experiment_config& cfg);
int run_simulate(const experiment_config& cfg);
int run_sweep(const experiment_config& cfg);
int run_cost(const experiment_config& cfg);

}  // namespace rapid
