#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rapid/harness.hpp"
#include "rapid/lm.hpp"

using namespace rapid;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

struct temp_dir {
    fs::path path;
    temp_dir() {
        path = fs::temp_directory_path() /
               ("rapid_test_" + std::to_string(rand()) + std::to_string(rand()));
        fs::create_directories(path);
    }
    ~temp_dir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RAPID_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

// a small self-speculation fixture: identical target and drafter, the
// retrieval settings make the retrieved context equal the full context
void write_self_spec_fixture(const fs::path& dir) {
    const vocab v{4};
    std::map<token_seq, prob_vec> table;
    table[{0}] = {0.1, 0.2, 0.3, 0.4};
    table[{1}] = {0.4, 0.3, 0.2, 0.1};
    table[{2}] = {0.25, 0.25, 0.25, 0.25};
    table[{3}] = {0.55, 0.15, 0.15, 0.15};
    const table_lm lm(v, 1, {0.25, 0.25, 0.25, 0.25}, table);
    save_lm_file((dir / "model.lm").string(), lm);

    std::ofstream corpus(dir / "corpus.txt");
    for (int i = 0; i < 64; ++i) {
        corpus << (i % 4) << (i + 1 < 64 ? " " : "");
    }
    corpus << "\n";
}

std::string self_spec_config(const fs::path& dir, const fs::path& out) {
    std::ostringstream cfg;
    cfg << "corpus = " << (dir / "corpus.txt").string() << "\n";
    cfg << "target_lm = " << (dir / "model.lm").string() << "\n";
    cfg << "drafter_lm = " << (dir / "model.lm").string() << "\n";
    cfg << "out_dir = " << out.string() << "\n";
    cfg << "query = 0 1\n";
    cfg << "gamma = 5\n";
    cfg << "eta = 0\n";
    cfg << "max_tokens = 30\n";
    cfg << "seed = 7\n";
    // retrieval reproduces the full context: threshold 0 and a budget
    // larger than the document select every chunk in source order
    cfg << "chunk_size = 16\n";
    cfg << "sim_threshold = 0\n";
    cfg << "min_budget = 4096\n";
    return cfg.str();
}

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("round trip through the canonical text") {
        experiment_config cfg;
        cfg.corpus_path = "corpus.txt";
        cfg.query = {7, 7, 3};
        cfg.gold_token = 5;
        cfg.engine.gamma = 4;
        cfg.engine.eta = 12.5;
        cfg.eta_grid = {0, 5, 10};
        const experiment_config parsed = parse_config_text(cfg.to_config_text());
        CHECK(parsed.corpus_path == cfg.corpus_path);
        CHECK(parsed.query == cfg.query);
        CHECK(parsed.gold_token == cfg.gold_token);
        CHECK(parsed.engine.gamma == 4);
        CHECK(parsed.engine.eta == 12.5);
        CHECK(parsed.eta_grid == cfg.eta_grid);
    }
    SUBCASE("comments and blank lines are ignored") {
        const auto cfg = parse_config_text("# a comment\n\ngamma = 3 # trailing\n");
        CHECK(cfg.engine.gamma == 3);
    }
    SUBCASE("unknown keys and malformed lines fail") {
        CHECK_THROWS(parse_config_text("no_such_key = 1\n"));
        CHECK_THROWS(parse_config_text("gamma\n"));
        CHECK_THROWS(parse_config_text("gamma = abc\n"));
    }
}

TEST_CASE("corpus loading") {
    temp_dir tmp;
    {
        std::ofstream os(tmp.path / "corpus.txt");
        os << "1 2 3\n\n4 5\n";
    }
    const auto docs = load_corpus((tmp.path / "corpus.txt").string());
    REQUIRE(docs.size() == 2);
    CHECK(docs[0] == token_seq{1, 2, 3});
    CHECK(docs[1] == token_seq{4, 5});
    CHECK_THROWS(load_corpus((tmp.path / "missing.txt").string()));
}

TEST_CASE("cli: verify passes clean and catches injected defects") {
    temp_dir tmp;
    SUBCASE("clean build exits 0") {
        CHECK(run_cli("verify --seed 1 --out " + (tmp.path / "v").string()) == 0);
        const auto report = nlohmann::json::parse(slurp(tmp.path / "v" / "verify_report.json"));
        CHECK(report["all_passed"] == true);
    }
    SUBCASE("flipped gradient sign fails the gradient suite") {
        CHECK(run_cli("verify --seed 1 --mutate kd_sign_flip --out " + (tmp.path / "m1").string()) ==
              1);
        const auto report = nlohmann::json::parse(slurp(tmp.path / "m1" / "verify_report.json"));
        bool gradient_failed = false;
        for (const auto& suite : report["suites"]) {
            if (suite["name"] == "gradient_vs_finite_differences") {
                gradient_failed = !suite["passed"].get<bool>();
            }
        }
        CHECK(gradient_failed);
    }
    SUBCASE("skipped tail renormalization fails the acceptance-rate identity") {
        CHECK(run_cli("verify --seed 1 --mutate tail_skip_renorm --out " +
                      (tmp.path / "m2").string()) == 1);
        const auto report = nlohmann::json::parse(slurp(tmp.path / "m2" / "verify_report.json"));
        bool beta_failed = false;
        for (const auto& suite : report["suites"]) {
            if (suite["name"] == "acceptance_rate_identity") {
                beta_failed = !suite["passed"].get<bool>();
            }
        }
        CHECK(beta_failed);
    }
    SUBCASE("unknown mutation is a config error") {
        CHECK(run_cli("verify --mutate bogus --out " + (tmp.path / "m3").string()) == 2);
    }
}

TEST_CASE("cli: simulate is deterministic and self-speculation accepts everything") {
    temp_dir tmp;
    write_self_spec_fixture(tmp.path);
    {
        std::ofstream os(tmp.path / "exp.cfg");
        os << self_spec_config(tmp.path, tmp.path / "run1");
    }

    REQUIRE(run_cli("simulate --config " + (tmp.path / "exp.cfg").string()) == 0);
    REQUIRE(run_cli("simulate --config " + (tmp.path / "exp.cfg").string() + " --out " +
                    (tmp.path / "run2").string()) == 0);

    SUBCASE("byte-identical outputs across runs") {
        for (const char* name : {"traces.jsonl", "stats.json", "retrieval_trace.csv"}) {
            CHECK(slurp(tmp.path / "run1" / name) == slurp(tmp.path / "run2" / name));
        }
    }
    SUBCASE("acceptance rate is exactly one") {
        const std::string stats = slurp(tmp.path / "run1" / "stats.json");
        CHECK(stats.find("\"acceptance_rate\":1") != std::string::npos);
    }
    SUBCASE("manifest hashes match the files on disk") {
        const auto manifest = nlohmann::json::parse(slurp(tmp.path / "run1" / "manifest.json"));
        for (const auto& entry : manifest["outputs"]) {
            const fs::path file = tmp.path / "run1" / entry["path"].get<std::string>();
            REQUIRE(fs::exists(file));
            char hex[32];
            std::snprintf(hex, sizeof(hex), "%016llx",
                          static_cast<unsigned long long>(fnv1a64_file(file.string())));
            CHECK(entry["fnv1a64"].get<std::string>() == hex);
        }
        CHECK(manifest["rng_algorithm"] == rng_stream::algorithm_id);
    }
    SUBCASE("repeated seeds reproduce token-for-token from the manifest snapshot") {
        const auto manifest = nlohmann::json::parse(slurp(tmp.path / "run1" / "manifest.json"));
        const std::string snapshot = manifest["config_text"].get<std::string>();
        experiment_config cfg = parse_config_text(snapshot);
        cfg.out_dir = (tmp.path / "run3").string();
        REQUIRE(run_simulate(cfg) == 0);
        CHECK(slurp(tmp.path / "run1" / "traces.jsonl") == slurp(tmp.path / "run3" / "traces.jsonl"));
        CHECK(slurp(tmp.path / "run1" / "stats.json") == slurp(tmp.path / "run3" / "stats.json"));
    }
    SUBCASE("missing files are config errors") {
        CHECK(run_cli("simulate --config " + (tmp.path / "nope.cfg").string()) == 2);
        std::ofstream os(tmp.path / "bad.cfg");
        os << "corpus = /does/not/exist\ntarget_lm = x\ndrafter_lm = y\n";
        os.close();
        CHECK(run_cli("simulate --config " + (tmp.path / "bad.cfg").string()) == 2);
    }
}

TEST_CASE("cli: sweep writes one row per eta plus the oracle curve") {
    temp_dir tmp;
    write_self_spec_fixture(tmp.path);
    {
        std::ofstream os(tmp.path / "exp.cfg");
        os << self_spec_config(tmp.path, tmp.path / "sweep_out");
        os << "eta_grid = 0 5 10 20 40 50\n";
        os << "repetitions = 2\n";
        os << "gold_token = 2\n";
    }
    REQUIRE(run_cli("sweep --config " + (tmp.path / "exp.cfg").string()) == 0);

    const std::string sweep = slurp(tmp.path / "sweep_out" / "sweep.csv");
    CHECK(sweep.rfind("eta,acceptance_rate,task_success,exact_beta,exact_tv_output_vs_p\n", 0) == 0);
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 7);  // header + 6 rows

    const std::string curve = slurp(tmp.path / "sweep_out" / "oracle_curve.csv");
    CHECK(curve.rfind("eta,kl_q_phat,tv_output_vs_p,beta,tv_beta_norm_variant\n", 0) == 0);
    // self-speculation: every eta row keeps beta = 1 and TV = 0
    std::istringstream rows(sweep);
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double eta = 0;
        double rate = 0;
        double success = 0;
        double beta = 0;
        double tv = 0;
        REQUIRE((ls >> eta >> rate >> success >> beta >> tv));
        CHECK(rate == 1.0);
        CHECK(beta == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(tv <= 1e-12);
    }
}

TEST_CASE("cli: single-eta sweep row matches simulate stats") {
    temp_dir tmp;
    write_self_spec_fixture(tmp.path);
    {
        std::ofstream os(tmp.path / "exp.cfg");
        os << self_spec_config(tmp.path, tmp.path / "a");
        os << "eta_grid = 0\n";
    }
    REQUIRE(run_cli("simulate --config " + (tmp.path / "exp.cfg").string()) == 0);
    REQUIRE(run_cli("sweep --config " + (tmp.path / "exp.cfg").string() + " --out " +
                    (tmp.path / "b").string()) == 0);
    const auto stats = nlohmann::json::parse(slurp(tmp.path / "a" / "stats.json"));
    const std::string sweep = slurp(tmp.path / "b" / "sweep.csv");
    std::istringstream rows(sweep);
    std::string header;
    std::string row;
    std::getline(rows, header);
    std::getline(rows, row);
    std::replace(row.begin(), row.end(), ',', ' ');
    std::istringstream ls(row);
    double eta = 0;
    double rate = 0;
    REQUIRE((ls >> eta >> rate));
    CHECK(eta == 0.0);
    CHECK(rate == stats["acceptance_rate"].get<double>());
}

TEST_CASE("cli: sweep on an unrelated retrieval context raises acceptance with eta") {
    temp_dir tmp;
    const int32_t vocab_size = 8;
    const token_seq needle = {6, 7, 7, 6};

    // target extracts the needle answer from its full context; the drafter
    // never sees its own trigger and falls back to a confident base
    // preference for a different token
    prob_vec drafter_base(vocab_size, 0.04);
    drafter_base[1] = 0.72;
    const context_oracle_lm drafter(vocab{vocab_size}, drafter_base, {{{5, 5, 5, 5}, 1, 0.9}});
    const context_oracle_lm target(vocab{vocab_size}, prob_vec(vocab_size, 0.125),
                                   {{needle, 2, 0.72}});
    save_lm_file((tmp.path / "target.lm").string(), target);
    save_lm_file((tmp.path / "drafter.lm").string(), drafter);
    {
        std::ofstream corpus(tmp.path / "corpus.txt");
        // three filler chunks then the needle chunk
        for (int i = 0; i < 24; ++i) {
            corpus << (i % 4) << ' ';
        }
        corpus << "6 7 7 6 6 7 6 7\n";
        std::ofstream cfg(tmp.path / "exp.cfg");
        cfg << "corpus = " << (tmp.path / "corpus.txt").string() << "\n";
        cfg << "target_lm = " << (tmp.path / "target.lm").string() << "\n";
        cfg << "drafter_lm = " << (tmp.path / "drafter.lm").string() << "\n";
        cfg << "out_dir = " << (tmp.path / "out").string() << "\n";
        cfg << "query = 0\n";  // retrieves a filler chunk, never the needle
        cfg << "chunk_size = 8\nmin_budget = 8\n";
        cfg << "gamma = 5\nmax_tokens = 20\nseed = 5\nrepetitions = 4\n";
        cfg << "eta_grid = 0 5 10 20 40 50\n";
    }
    REQUIRE(run_cli("sweep --config " + (tmp.path / "exp.cfg").string()) == 0);

    const std::string sweep = slurp(tmp.path / "out" / "sweep.csv");
    std::istringstream rows(sweep);
    std::string line;
    std::getline(rows, line);
    double prev_beta = -1.0;
    double first_rate = -1.0;
    double last_rate = -1.0;
    while (std::getline(rows, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double eta = 0;
        double rate = 0;
        std::string success;
        double beta = 0;
        double tv = 0;
        REQUIRE((ls >> eta >> rate >> success >> beta >> tv));
        CHECK(beta >= prev_beta);  // drafter influence grows with eta
        prev_beta = beta;
        if (first_rate < 0) {
            first_rate = rate;
        }
        last_rate = rate;
        if (eta == 0.0) {
            CHECK(tv <= 1e-12);
        } else {
            CHECK(tv > 0.0);  // the shifted law drifts off the target
        }
    }
    CHECK(last_rate > first_rate + 0.15);
}

TEST_CASE("cli: needle fixture improves with knowledge transfer") {
    temp_dir tmp;
    const int32_t vocab_size = 8;
    const token_seq needle = {6, 7, 7, 6};
    const prob_vec base(vocab_size, 0.125);
    const context_oracle_lm drafter(vocab{vocab_size}, base, {{needle, 5, 0.9}});
    const context_oracle_lm target(vocab{vocab_size}, base, {{needle, 5, 0.25}});
    save_lm_file((tmp.path / "target.lm").string(), target);
    save_lm_file((tmp.path / "drafter.lm").string(), drafter);
    {
        std::ofstream corpus(tmp.path / "corpus.txt");
        for (int i = 0; i < 24; ++i) {
            corpus << (i % 4) << ' ';
        }
        corpus << "6 7 7 6 6 7 6 7";
        for (int i = 0; i < 16; ++i) {
            corpus << ' ' << ((i + 1) % 4);
        }
        corpus << "\n";
        std::ofstream cfg(tmp.path / "exp.cfg");
        cfg << "corpus = " << (tmp.path / "corpus.txt").string() << "\n";
        cfg << "target_lm = " << (tmp.path / "target.lm").string() << "\n";
        cfg << "drafter_lm = " << (tmp.path / "drafter.lm").string() << "\n";
        cfg << "query = 6 7\n";  // retrieves the needle chunk
        cfg << "chunk_size = 8\nmin_budget = 8\n";
        cfg << "gamma = 4\nmax_tokens = 1\nseed = 100\nrepetitions = 100\n";
        cfg << "gold_token = 5\n";
    }

    // exact first-token success rates are 4/7 at eta 20 and 1/4 at eta 0;
    // 100 seeded runs stay within 3 sigma of those
    REQUIRE(run_cli("simulate --config " + (tmp.path / "exp.cfg").string() + " --eta 20 --out " +
                    (tmp.path / "hi").string()) == 0);
    REQUIRE(run_cli("simulate --config " + (tmp.path / "exp.cfg").string() + " --eta 0 --out " +
                    (tmp.path / "lo").string()) == 0);
    const auto hi = nlohmann::json::parse(slurp(tmp.path / "hi" / "stats.json"));
    const auto lo = nlohmann::json::parse(slurp(tmp.path / "lo" / "stats.json"));
    CHECK(hi["task_success"].get<double>() >= 0.42);
    CHECK(lo["task_success"].get<double>() <= 0.38);

    // the needle chunk at offset 24 is the retrieval result
    const std::string trace = slurp(tmp.path / "hi" / "retrieval_trace.csv");
    const auto row = trace.find("\n24,");
    REQUIRE(row != std::string::npos);
    const auto line_end = trace.find('\n', row + 1);
    CHECK(trace.substr(row, line_end - row).ends_with(",1"));
}

TEST_CASE("cli: cost writes the curve and crossover") {
    temp_dir tmp;
    SUBCASE("default fixture: monotone speedups, unique crossover") {
        REQUIRE(run_cli("cost --out " + (tmp.path / "c").string()) == 0);
        const std::string csv = slurp(tmp.path / "c" / "cost.csv");
        CHECK(csv.rfind("L,flops_lc,flops_sd,flops_rapid,rapid_speedup,sd_speedup\n", 0) == 0);
        std::istringstream rows(csv);
        std::string line;
        std::getline(rows, line);
        double prev = 0.0;
        int n_rows = 0;
        while (std::getline(rows, line)) {
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            double len = 0;
            double lc = 0;
            double sd = 0;
            double rapid_flops = 0;
            double rapid_speedup = 0;
            REQUIRE((ls >> len >> lc >> sd >> rapid_flops >> rapid_speedup));
            CHECK(rapid_speedup >= prev);
            prev = rapid_speedup;
            n_rows += 1;
        }
        CHECK(n_rows == 8);
        const auto cross = nlohmann::json::parse(slurp(tmp.path / "c" / "crossover.json"));
        CHECK(cross["crossover_length"].get<double>() > 0.0);
    }
    SUBCASE("equal betas collapse the two speculative columns") {
        temp_dir tmp2;
        std::ofstream os(tmp2.path / "cost.cfg");
        os << "beta_sd = 0.8\nbeta_rapid = 0.8\nout_dir = " << (tmp2.path / "c").string() << "\n";
        os.close();
        REQUIRE(run_cli("cost --config " + (tmp2.path / "cost.cfg").string()) == 0);
        const std::string csv = slurp(tmp2.path / "c" / "cost.csv");
        std::istringstream rows(csv);
        std::string line;
        std::getline(rows, line);
        while (std::getline(rows, line)) {
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            double len = 0;
            double lc = 0;
            double sd = 0;
            double rapid_flops = 0;
            REQUIRE((ls >> len >> lc >> sd >> rapid_flops));
            CHECK(sd == rapid_flops);
        }
    }
    SUBCASE("single grid point yields one data row") {
        temp_dir tmp3;
        std::ofstream os(tmp3.path / "cost.cfg");
        os << "context_grid = 65536\nout_dir = " << (tmp3.path / "c").string() << "\n";
        os.close();
        REQUIRE(run_cli("cost --config " + (tmp3.path / "cost.cfg").string()) == 0);
        const std::string csv = slurp(tmp3.path / "c" / "cost.csv");
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    }
    SUBCASE("bad parameters exit 2") {
        temp_dir tmp4;
        std::ofstream os(tmp4.path / "cost.cfg");
        os << "beta_rapid = 0\nout_dir = " << (tmp4.path / "c").string() << "\n";
        os.close();
        CHECK(run_cli("cost --config " + (tmp4.path / "cost.cfg").string()) == 2);
    }
}
