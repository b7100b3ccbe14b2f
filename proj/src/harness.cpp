#include "rapid/harness.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "rapid/lm.hpp"
#include "rapid/oracle.hpp"
#include "rapid/sampling.hpp"
#include "rapid/verify.hpp"

namespace fs = std::filesystem;

namespace rapid {

namespace {

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string join_tokens(const token_seq& toks) {
    std::ostringstream os;
    for (size_t i = 0; i < toks.size(); ++i) {
        os << (i ? " " : "") << toks[i];
    }
    return os.str();
}

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        os << (i ? " " : "") << fmt17(v[i]);
    }
    return os.str();
}

std::string json_int_array(const token_seq& toks) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < toks.size(); ++i) {
        os << (i ? "," : "") << toks[i];
    }
    os << ']';
    return os.str();
}

std::string json_double_array(const std::vector<double>& v) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < v.size(); ++i) {
        os << (i ? "," : "") << fmt17(v[i]);
    }
    os << ']';
    return os.str();
}

struct output_writer {
    fs::path dir;
    std::vector<std::string> written;

    explicit output_writer(const std::string& out_dir) : dir(out_dir) {
        fs::create_directories(dir);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) {
            throw std::runtime_error("cannot write " + (dir / name).string());
        }
        os << content;
        written.push_back(name);
    }
};

void write_manifest(output_writer& out, const experiment_config& cfg, const std::string& command,
                    const std::vector<uint64_t>& run_seeds, double wall_time_sec) {
    nlohmann::json manifest;
    manifest["artifact_version"] = artifact_version;
    manifest["rng_algorithm"] = rng_stream::algorithm_id;
    manifest["command"] = command;
    manifest["config_text"] = cfg.to_config_text();
    manifest["base_seed"] = cfg.engine.seed;
    manifest["run_seeds"] = run_seeds;
    manifest["wall_time_sec"] = wall_time_sec;
    auto outputs = nlohmann::json::array();
    for (const auto& name : out.written) {
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file((out.dir / name).string())));
        outputs.push_back({{"path", name}, {"fnv1a64", hex}});
    }
    manifest["outputs"] = outputs;
    out.write("manifest.json", manifest.dump(2) + "\n");
}

struct loaded_fixture {
    token_seq full_ctx;
    token_seq retrieval_ctx;
    std::vector<scored_chunk> retrieval_trace;
    std::unique_ptr<lm_backend> target;
    std::unique_ptr<lm_backend> drafter;
};

loaded_fixture load_fixture(const experiment_config& cfg) {
    loaded_fixture fx;
    const auto docs = load_corpus(cfg.corpus_path);
    if (cfg.doc_index < 0 || cfg.doc_index >= static_cast<int64_t>(docs.size())) {
        throw std::invalid_argument("doc_index out of range for corpus with " +
                                    std::to_string(docs.size()) + " documents");
    }
    fx.full_ctx = docs[cfg.doc_index];
    fx.target = load_lm_file(cfg.target_lm_path);
    fx.drafter = load_lm_file(cfg.drafter_lm_path);
    check_tokens(fx.target->vocabulary(), fx.full_ctx);
    check_tokens(fx.drafter->vocabulary(), cfg.query);
    fx.retrieval_ctx = select_chunks(cfg.query, fx.full_ctx, cfg.retrieval, &fx.retrieval_trace);
    return fx;
}

std::string retrieval_trace_csv(const std::vector<scored_chunk>& rows) {
    std::ostringstream os;
    os << "chunk_offset,score,selected\n";
    for (const auto& r : rows) {
        os << r.start_offset << ',' << fmt17(r.score) << ',' << (r.selected ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string trace_jsonl_line(int64_t rep, int64_t step, const step_trace& t) {
    std::ostringstream os;
    os << "{\"rep\":" << rep << ",\"step\":" << step;
    os << ",\"drafted\":" << json_int_array(t.drafted);
    os << ",\"draft_probs\":[";
    for (size_t i = 0; i < t.draft_probs.size(); ++i) {
        os << (i ? "," : "") << json_double_array(t.draft_probs[i]);
    }
    os << "],\"accepted_count\":" << t.accepted_count;
    if (t.correction_token) {
        os << ",\"correction_token\":" << *t.correction_token;
    }
    if (t.bonus) {
        os << ",\"bonus_token\":" << *t.bonus;
    }
    if (t.p_vec) {
        os << ",\"p_vec\":" << json_double_array(*t.p_vec);
        os << ",\"p_hat_vec\":" << json_double_array(*t.p_hat_vec);
        os << ",\"q_vec\":" << json_double_array(*t.q_vec);
    }
    os << ",\"acceptance_randoms\":" << json_double_array(t.acceptance_randoms);
    os << "}\n";
    return os.str();
}

struct rep_outcome {
    uint64_t seed = 0;
    generation_result result;
    bool success = false;
};

std::string stats_json(const std::vector<rep_outcome>& reps, const experiment_config& cfg) {
    generation_stats agg;
    int64_t successes = 0;
    for (const auto& r : reps) {
        agg.total_drafted += r.result.stats.total_drafted;
        agg.total_accepted += r.result.stats.total_accepted;
        agg.steps += r.result.stats.steps;
        agg.tokens_emitted += r.result.stats.tokens_emitted;
        successes += r.success ? 1 : 0;
    }
    agg.acceptance_rate = agg.total_drafted > 0
                              ? static_cast<double>(agg.total_accepted) / static_cast<double>(agg.total_drafted)
                              : 0.0;
    std::ostringstream os;
    os << "{\"total_drafted\":" << agg.total_drafted;
    os << ",\"total_accepted\":" << agg.total_accepted;
    os << ",\"steps\":" << agg.steps;
    os << ",\"tokens_emitted\":" << agg.tokens_emitted;
    os << ",\"acceptance_rate\":" << fmt17(agg.acceptance_rate);
    os << ",\"repetitions\":" << reps.size();
    if (cfg.gold_token) {
        os << ",\"gold_token\":" << *cfg.gold_token;
        os << ",\"task_success\":" << fmt17(reps.empty() ? 0.0
                                                         : static_cast<double>(successes) /
                                                               static_cast<double>(reps.size()));
    }
    os << ",\"per_rep\":[";
    for (size_t i = 0; i < reps.size(); ++i) {
        const auto& r = reps[i];
        os << (i ? "," : "") << "{\"seed\":" << r.seed;
        os << ",\"acceptance_rate\":" << fmt17(r.result.stats.acceptance_rate);
        os << ",\"tokens_emitted\":" << r.result.stats.tokens_emitted;
        os << ",\"tokens\":" << json_int_array(r.result.tokens) << "}";
    }
    os << "]}\n";
    return os.str();
}

std::vector<rep_outcome> run_repetitions(const loaded_fixture& fx, const experiment_config& cfg) {
    std::vector<rep_outcome> reps;
    reps.reserve(cfg.repetitions);
    for (int64_t i = 0; i < cfg.repetitions; ++i) {
        rep_outcome rep;
        engine_config ecfg = cfg.engine;
        ecfg.seed = cfg.engine.seed + static_cast<uint64_t>(i);
        rep.seed = ecfg.seed;
        rep.result = generate(*fx.target, *fx.drafter, fx.full_ctx, fx.retrieval_ctx, cfg.query, ecfg);
        rep.success = cfg.gold_token && !rep.result.tokens.empty() &&
                      rep.result.tokens.front() == *cfg.gold_token;
        reps.push_back(std::move(rep));
    }
    return reps;
}

int config_failure(const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
}

}  // namespace

// ---- config ----

std::string experiment_config::to_config_text() const {
    std::ostringstream os;
    os << "corpus = " << corpus_path << '\n';
    os << "target_lm = " << target_lm_path << '\n';
    os << "drafter_lm = " << drafter_lm_path << '\n';
    os << "out_dir = " << out_dir << '\n';
    os << "doc_index = " << doc_index << '\n';
    os << "query = " << join_tokens(query) << '\n';
    if (gold_token) {
        os << "gold_token = " << *gold_token << '\n';
    }
    os << "repetitions = " << repetitions << '\n';
    os << "gamma = " << engine.gamma << '\n';
    os << "eta = " << fmt17(engine.eta) << '\n';
    os << "temperature = " << fmt17(engine.temperature) << '\n';
    os << "tail_factor = " << fmt17(engine.tail_factor) << '\n';
    os << "max_tokens = " << engine.max_tokens << '\n';
    os << "seed = " << engine.seed << '\n';
    os << "bonus_token = " << (engine.bonus_token ? "true" : "false") << '\n';
    os << "chunk_size = " << retrieval.chunk_size << '\n';
    os << "sim_threshold = " << fmt17(retrieval.sim_threshold) << '\n';
    os << "min_budget = " << retrieval.min_budget << '\n';
    os << "length_divisor = " << fmt17(retrieval.length_divisor) << '\n';
    os << "embed_dim = " << retrieval.embed_dim << '\n';
    os << "eta_grid = " << join_doubles(eta_grid) << '\n';
    os << "target_params = " << fmt17(cost.target_params) << '\n';
    os << "draft_params = " << fmt17(cost.draft_params) << '\n';
    os << "retrieval_len = " << fmt17(cost.retrieval_len) << '\n';
    os << "beta_sd = " << fmt17(cost.beta_sd) << '\n';
    os << "beta_rapid = " << fmt17(cost.beta_rapid) << '\n';
    os << "context_grid = " << join_doubles(context_grid) << '\n';
    return os.str();
}

void apply_override(experiment_config& cfg, const std::string& key, const std::string& value) {
    std::istringstream vs(value);
    auto parse_tokens = [&] {
        token_seq toks;
        token_id t;
        while (vs >> t) {
            toks.push_back(t);
        }
        return toks;
    };
    auto parse_doubles = [&] {
        std::vector<double> xs;
        double x;
        while (vs >> x) {
            xs.push_back(x);
        }
        return xs;
    };
    auto want = [&](auto& field) {
        if (!(vs >> field) || !(vs >> std::ws).eof()) {
            throw std::invalid_argument("bad value for " + key + ": " + value);
        }
    };

    if (key == "corpus") {
        cfg.corpus_path = value;
    } else if (key == "target_lm") {
        cfg.target_lm_path = value;
    } else if (key == "drafter_lm") {
        cfg.drafter_lm_path = value;
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "doc_index") {
        want(cfg.doc_index);
    } else if (key == "query") {
        cfg.query = parse_tokens();
    } else if (key == "gold_token") {
        token_id t;
        want(t);
        cfg.gold_token = t;
    } else if (key == "repetitions") {
        want(cfg.repetitions);
    } else if (key == "gamma") {
        want(cfg.engine.gamma);
    } else if (key == "eta") {
        want(cfg.engine.eta);
    } else if (key == "temperature") {
        want(cfg.engine.temperature);
    } else if (key == "tail_factor") {
        want(cfg.engine.tail_factor);
    } else if (key == "max_tokens") {
        want(cfg.engine.max_tokens);
    } else if (key == "seed") {
        want(cfg.engine.seed);
    } else if (key == "bonus_token") {
        cfg.engine.bonus_token = value == "true" || value == "1";
    } else if (key == "chunk_size") {
        want(cfg.retrieval.chunk_size);
    } else if (key == "sim_threshold") {
        want(cfg.retrieval.sim_threshold);
    } else if (key == "min_budget") {
        want(cfg.retrieval.min_budget);
    } else if (key == "length_divisor") {
        want(cfg.retrieval.length_divisor);
    } else if (key == "embed_dim") {
        want(cfg.retrieval.embed_dim);
    } else if (key == "eta_grid") {
        cfg.eta_grid = parse_doubles();
    } else if (key == "target_params") {
        want(cfg.cost.target_params);
    } else if (key == "draft_params") {
        want(cfg.cost.draft_params);
    } else if (key == "retrieval_len") {
        want(cfg.cost.retrieval_len);
    } else if (key == "beta_sd") {
        want(cfg.cost.beta_sd);
    } else if (key == "beta_rapid") {
        want(cfg.cost.beta_rapid);
    } else if (key == "context_grid") {
        cfg.context_grid = parse_doubles();
    } else if (key == "mutate") {
        cfg.mutate = value;
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

experiment_config parse_config_text(const std::string& text) {
    experiment_config cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        lineno += 1;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": expected key = value");
            }
            continue;
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        apply_override(cfg, key, value);
    }
    return cfg;
}

experiment_config load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open config file " + path);
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

std::vector<token_seq> load_corpus(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open corpus " + path);
    }
    std::vector<token_seq> docs;
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        token_seq doc;
        token_id t;
        while (ls >> t) {
            doc.push_back(t);
        }
        if (!doc.empty()) {
            docs.push_back(std::move(doc));
        }
    }
    return docs;
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot hash missing file " + path);
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    return fnv1a64(buf.str());
}

// ---- commands ----

int run_verify(const experiment_config& cfg) {
    const auto start = std::chrono::steady_clock::now();
    mutation mut;
    try {
        mut = mutation_from_name(cfg.mutate);
    } catch (const std::exception& e) {
        return config_failure(e);
    }
    const auto results = run_verify_suites(cfg.engine.seed, mut);

    bool all_passed = true;
    nlohmann::json suites = nlohmann::json::array();
    for (const auto& r : results) {
        all_passed = all_passed && r.passed;
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.cases << " cases)";
        if (!r.passed) {
            std::cout << "\n       " << r.detail;
        }
        std::cout << "\n";
        suites.push_back({{"name", r.name},
                          {"passed", r.passed},
                          {"cases", r.cases},
                          {"detail", r.detail}});
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    try {
        output_writer out(cfg.out_dir);
        nlohmann::json report;
        report["artifact_version"] = artifact_version;
        report["seed"] = cfg.engine.seed;
        report["mutation"] = cfg.mutate.empty() ? "none" : cfg.mutate;
        report["all_passed"] = all_passed;
        report["suites"] = suites;
        out.write("verify_report.json", report.dump(2) + "\n");
        write_manifest(out, cfg, "verify", {cfg.engine.seed}, wall);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_internal_error;
    }
    std::cout << (all_passed ? "verify: all suites passed\n" : "verify: FAILURES\n");
    return all_passed ? exit_ok : exit_verify_failure;
}

int run_simulate(const experiment_config& cfg) {
    const auto start = std::chrono::steady_clock::now();
    loaded_fixture fx;
    try {
        cfg.engine.validate();
        cfg.retrieval.validate();
        if (cfg.repetitions < 1) {
            throw std::invalid_argument("repetitions must be >= 1");
        }
        fx = load_fixture(cfg);
    } catch (const std::exception& e) {
        return config_failure(e);
    }

    try {
        const auto reps = run_repetitions(fx, cfg);
        std::ostringstream traces;
        std::vector<uint64_t> seeds;
        for (size_t i = 0; i < reps.size(); ++i) {
            seeds.push_back(reps[i].seed);
            for (size_t s = 0; s < reps[i].result.traces.size(); ++s) {
                traces << trace_jsonl_line(static_cast<int64_t>(i), static_cast<int64_t>(s),
                                           reps[i].result.traces[s]);
            }
        }
        output_writer out(cfg.out_dir);
        out.write("traces.jsonl", traces.str());
        out.write("stats.json", stats_json(reps, cfg));
        out.write("retrieval_trace.csv", retrieval_trace_csv(fx.retrieval_trace));
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(out, cfg, "simulate", seeds, wall);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_internal_error;
    }
    return exit_ok;
}

int run_sweep(const experiment_config& cfg) {
    const auto start = std::chrono::steady_clock::now();
    loaded_fixture fx;
    try {
        cfg.engine.validate();
        cfg.retrieval.validate();
        if (cfg.eta_grid.empty()) {
            throw std::invalid_argument("eta_grid must be non-empty");
        }
        if (cfg.repetitions < 1) {
            throw std::invalid_argument("repetitions must be >= 1");
        }
        fx = load_fixture(cfg);
    } catch (const std::exception& e) {
        return config_failure(e);
    }

    try {
        // first-position vectors for the exact columns
        const logit_vec z0 = fx.target->logits(concat(fx.full_ctx, cfg.query));
        const prob_vec p0 = softmax_t(z0, cfg.engine.temperature);
        const prob_vec q0 =
            softmax_t(fx.drafter->logits(concat(fx.retrieval_ctx, cfg.query)), cfg.engine.temperature);

        std::ostringstream sweep;
        sweep << "eta,acceptance_rate,task_success,exact_beta,exact_tv_output_vs_p\n";
        for (double eta : cfg.eta_grid) {
            experiment_config run_cfg = cfg;
            run_cfg.engine.eta = eta;
            const auto reps = run_repetitions(fx, run_cfg);
            int64_t drafted = 0;
            int64_t accepted = 0;
            int64_t successes = 0;
            for (const auto& r : reps) {
                drafted += r.result.stats.total_drafted;
                accepted += r.result.stats.total_accepted;
                successes += r.success ? 1 : 0;
            }
            const prob_vec p_hat0 = tail_preserve(
                p0,
                softmax_t(augment_logits(z0, p0, q0, eta, cfg.engine.temperature),
                          cfg.engine.temperature),
                cfg.engine.tail_factor);
            const auto exact = exact_step_distribution(p0, p_hat0, q0);
            sweep << fmt17(eta) << ','
                  << fmt17(drafted > 0 ? static_cast<double>(accepted) / static_cast<double>(drafted) : 0.0)
                  << ','
                  << (cfg.gold_token
                          ? fmt17(static_cast<double>(successes) / static_cast<double>(reps.size()))
                          : std::string("nan"))
                  << ',' << fmt17(exact.beta) << ',' << fmt17(exact.tv_distance) << '\n';
        }

        // shift-only divergence curve from the same first-position vectors
        std::vector<double> curve_etas = cfg.eta_grid;
        std::sort(curve_etas.begin(), curve_etas.end());
        if (curve_etas.front() != 0.0) {
            curve_etas.insert(curve_etas.begin(), 0.0);
        }
        std::ostringstream curve_csv;
        curve_csv << "eta,kl_q_phat,tv_output_vs_p,beta,tv_beta_norm_variant\n";
        for (const auto& pt : eta_divergence_curve(z0, q0, cfg.engine.temperature, curve_etas)) {
            curve_csv << fmt17(pt.eta) << ',' << fmt17(pt.kl_q_phat) << ','
                      << fmt17(pt.tv_output_vs_p) << ',' << fmt17(pt.beta) << ','
                      << fmt17(pt.tv_variant) << '\n';
        }

        output_writer out(cfg.out_dir);
        out.write("sweep.csv", sweep.str());
        out.write("oracle_curve.csv", curve_csv.str());
        out.write("retrieval_trace.csv", retrieval_trace_csv(fx.retrieval_trace));
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(out, cfg, "sweep", {cfg.engine.seed}, wall);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_internal_error;
    }
    return exit_ok;
}

int run_cost(const experiment_config& cfg) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<speedup_point> curve;
    std::optional<double> crossover;
    try {
        cost_params params = cfg.cost;
        params.gamma = cfg.engine.gamma;
        if (cfg.context_grid.empty()) {
            throw std::invalid_argument("context_grid must be non-empty");
        }
        curve = speedup_curve(params, cfg.context_grid);
        crossover = crossover_length(params, cfg.context_grid);
    } catch (const std::exception& e) {
        return config_failure(e);
    }

    try {
        std::ostringstream csv;
        csv << "L,flops_lc,flops_sd,flops_rapid,rapid_speedup,sd_speedup\n";
        for (const auto& pt : curve) {
            csv << fmt17(pt.context_len) << ',' << fmt17(pt.report.flops_lc) << ','
                << fmt17(pt.report.flops_sd) << ',' << fmt17(pt.report.flops_rapid) << ','
                << fmt17(pt.rapid_speedup) << ',' << fmt17(pt.sd_speedup) << '\n';
        }
        output_writer out(cfg.out_dir);
        out.write("cost.csv", csv.str());
        std::ostringstream cross;
        cross << "{\"threshold\":1,\"crossover_length\":"
              << (crossover ? fmt17(*crossover) : std::string("null")) << "}\n";
        out.write("crossover.json", cross.str());
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(out, cfg, "cost", {cfg.engine.seed}, wall);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_internal_error;
    }
    return exit_ok;
}

}  // namespace rapid
