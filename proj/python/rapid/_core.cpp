#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rapid/cost.hpp"
#include "rapid/engine.hpp"
#include "rapid/lm.hpp"
#include "rapid/oracle.hpp"
#include "rapid/retrieval.hpp"
#include "rapid/sampling.hpp"
#include "rapid/verify.hpp"

namespace py = pybind11;
using namespace rapid;

namespace {

// keep one rng per call site on the python side: seeds in, values out
token_id py_sample_categorical(const prob_vec& p, uint64_t seed) {
    rng_stream rng(seed);
    return sample_categorical(p, rng);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "retrieval-augmented speculative decoding: engine, oracle and cost model";

    py::register_exception<std::domain_error>(m, "DomainError");

    // sampling primitives
    m.def("softmax_t", &softmax_t, py::arg("logits"), py::arg("temperature"));
    m.def("sample_categorical", &py_sample_categorical, py::arg("probs"), py::arg("seed"));
    m.def("norm_clamped", &norm_clamped, py::arg("values"));
    m.def("kd_gradient", &kd_gradient, py::arg("logits"), py::arg("teacher"),
          py::arg("temperature"));
    m.def("kl_divergence", &kl_divergence, py::arg("q"), py::arg("p"));
    m.def("tv_distance", &tv_distance, py::arg("a"), py::arg("b"));

    // engine pieces
    m.def("augment_logits", &augment_logits, py::arg("logits"), py::arg("p"), py::arg("q"),
          py::arg("eta"), py::arg("temperature"));
    m.def("tail_preserve", &tail_preserve, py::arg("target_p"), py::arg("p_hat_raw"),
          py::arg("tail_factor"));

    py::class_<engine_config>(m, "EngineConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &engine_config::gamma)
        .def_readwrite("eta", &engine_config::eta)
        .def_readwrite("temperature", &engine_config::temperature)
        .def_readwrite("tail_factor", &engine_config::tail_factor)
        .def_readwrite("max_tokens", &engine_config::max_tokens)
        .def_readwrite("seed", &engine_config::seed)
        .def_readwrite("bonus_token", &engine_config::bonus_token);

    py::class_<generation_stats>(m, "GenerationStats")
        .def_readonly("total_drafted", &generation_stats::total_drafted)
        .def_readonly("total_accepted", &generation_stats::total_accepted)
        .def_readonly("steps", &generation_stats::steps)
        .def_readonly("tokens_emitted", &generation_stats::tokens_emitted)
        .def_readonly("acceptance_rate", &generation_stats::acceptance_rate);

    py::class_<lm_backend>(m, "LMBackend")
        .def("logits", &lm_backend::logits, py::arg("ctx"))
        .def_property_readonly("vocab_size",
                               [](const lm_backend& b) { return b.vocabulary().size; });

    py::class_<table_lm, lm_backend>(m, "TableLM")
        .def(py::init([](int32_t vocab_size, int32_t order, prob_vec fallback,
                         std::map<token_seq, prob_vec> table) {
                 return table_lm(vocab{vocab_size}, order, std::move(fallback), std::move(table));
             }),
             py::arg("vocab_size"), py::arg("order"), py::arg("fallback"),
             py::arg("table") = std::map<token_seq, prob_vec>{});

    py::class_<ngram_lm, lm_backend>(m, "NGramLM")
        .def(py::init([](int32_t vocab_size, int32_t order, double smoothing,
                         std::map<token_seq, std::vector<double>> counts) {
                 return ngram_lm(vocab{vocab_size}, order, smoothing, std::move(counts));
             }),
             py::arg("vocab_size"), py::arg("order"), py::arg("smoothing"),
             py::arg("counts") = std::map<token_seq, std::vector<double>>{})
        .def("observe", &ngram_lm::observe, py::arg("window"), py::arg("next"),
             py::arg("weight") = 1.0);

    py::class_<context_oracle_lm, lm_backend>(m, "ContextOracleLM")
        .def(py::init([](int32_t vocab_size, prob_vec base,
                         std::vector<std::tuple<token_seq, token_id, double>> facts) {
                 std::vector<context_oracle_lm::fact> fs;
                 fs.reserve(facts.size());
                 for (auto& [trigger, answer, confidence] : facts) {
                     fs.push_back({std::move(trigger), answer, confidence});
                 }
                 return context_oracle_lm(vocab{vocab_size}, std::move(base), std::move(fs));
             }),
             py::arg("vocab_size"), py::arg("base"), py::arg("facts"));

    m.def("save_lm_file", &save_lm_file, py::arg("path"), py::arg("backend"));

    m.def(
        "generate",
        [](const lm_backend& target, const lm_backend& drafter, const token_seq& full_ctx,
           const token_seq& retrieval_ctx, const token_seq& query_prefix,
           const engine_config& cfg) {
            const auto result = generate(target, drafter, full_ctx, retrieval_ctx, query_prefix, cfg);
            return py::make_tuple(result.tokens, result.stats);
        },
        py::arg("target"), py::arg("drafter"), py::arg("full_ctx"), py::arg("retrieval_ctx"),
        py::arg("query_prefix"), py::arg("config"));

    // retrieval
    py::class_<retrieval_config>(m, "RetrievalConfig")
        .def(py::init<>())
        .def_readwrite("chunk_size", &retrieval_config::chunk_size)
        .def_readwrite("sim_threshold", &retrieval_config::sim_threshold)
        .def_readwrite("min_budget", &retrieval_config::min_budget)
        .def_readwrite("length_divisor", &retrieval_config::length_divisor)
        .def_readwrite("embed_dim", &retrieval_config::embed_dim);

    m.def("embed", &embed, py::arg("tokens"), py::arg("config"));
    m.def("cosine", &cosine, py::arg("a"), py::arg("b"));
    m.def("retrieval_budget", &retrieval_budget, py::arg("context_len"), py::arg("config"));
    m.def(
        "select_chunks",
        [](const token_seq& query, const token_seq& context, const retrieval_config& cfg) {
            return select_chunks(query, context, cfg);
        },
        py::arg("query"), py::arg("context"), py::arg("config"));

    // oracle
    py::class_<step_distribution_report>(m, "StepDistributionReport")
        .def_readonly("exact_output", &step_distribution_report::exact_output)
        .def_readonly("target_p", &step_distribution_report::target_p)
        .def_readonly("tv_distance", &step_distribution_report::tv_distance)
        .def_readonly("beta", &step_distribution_report::beta)
        .def_readonly("tv_variant", &step_distribution_report::tv_variant);

    m.def("exact_step_distribution", &exact_step_distribution, py::arg("p"), py::arg("p_hat"),
          py::arg("q"));
    m.def("fd_gradient_check", &fd_gradient_check, py::arg("logits"), py::arg("teacher"),
          py::arg("temperature"), py::arg("h"));
    m.def(
        "eta_divergence_curve",
        [](const logit_vec& z, const prob_vec& q, double temperature,
           const std::vector<double>& etas) {
            std::vector<std::tuple<double, double, double, double>> rows;
            for (const auto& pt : eta_divergence_curve(z, q, temperature, etas)) {
                rows.emplace_back(pt.eta, pt.kl_q_phat, pt.tv_output_vs_p, pt.beta);
            }
            return rows;
        },
        py::arg("logits"), py::arg("teacher"), py::arg("temperature"), py::arg("etas"));

    // cost model
    py::class_<cost_params>(m, "CostParams")
        .def(py::init<>())
        .def_readwrite("target_params", &cost_params::target_params)
        .def_readwrite("draft_params", &cost_params::draft_params)
        .def_readwrite("context_len", &cost_params::context_len)
        .def_readwrite("retrieval_len", &cost_params::retrieval_len)
        .def_readwrite("gamma", &cost_params::gamma)
        .def_readwrite("beta_sd", &cost_params::beta_sd)
        .def_readwrite("beta_rapid", &cost_params::beta_rapid);

    py::class_<cost_report>(m, "CostReport")
        .def_readonly("flops_lc", &cost_report::flops_lc)
        .def_readonly("flops_drafter", &cost_report::flops_drafter)
        .def_readonly("flops_sd", &cost_report::flops_sd)
        .def_readonly("flops_rapid", &cost_report::flops_rapid);

    m.def("flops_per_step", &flops_per_step, py::arg("params"));
    m.def(
        "speedup_curve",
        [](const cost_params& params, const std::vector<double>& lens) {
            std::vector<std::tuple<double, double, double>> rows;
            for (const auto& pt : speedup_curve(params, lens)) {
                rows.emplace_back(pt.context_len, pt.rapid_speedup, pt.sd_speedup);
            }
            return rows;
        },
        py::arg("params"), py::arg("context_lens"));
    m.def("crossover_length", &crossover_length, py::arg("params"), py::arg("context_lens"),
          py::arg("threshold") = 1.0);

    // verify suites
    m.def("run_verify_suites", [](uint64_t seed) {
        std::vector<std::tuple<std::string, bool, int64_t, std::string>> rows;
        for (const auto& r : run_verify_suites(seed)) {
            rows.emplace_back(r.name, r.passed, r.cases, r.detail);
        }
        return rows;
    });

    m.attr("__version__") = "0.1.0";
}
