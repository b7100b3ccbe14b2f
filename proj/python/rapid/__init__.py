from ._core import (
    ContextOracleLM,
    CostParams,
    CostReport,
    EngineConfig,
    GenerationStats,
    LMBackend,
    NGramLM,
    RetrievalConfig,
    StepDistributionReport,
    TableLM,
    __version__,
    augment_logits,
    cosine,
    crossover_length,
    embed,
    eta_divergence_curve,
    exact_step_distribution,
    fd_gradient_check,
    flops_per_step,
    generate,
    kd_gradient,
    kl_divergence,
    norm_clamped,
    retrieval_budget,
    run_verify_suites,
    sample_categorical,
    save_lm_file,
    select_chunks,
    softmax_t,
    speedup_curve,
    tail_preserve,
    tv_distance,
)

__all__ = [
    "ContextOracleLM",
    "CostParams",
    "CostReport",
    "EngineConfig",
    "GenerationStats",
    "LMBackend",
    "NGramLM",
    "RetrievalConfig",
    "StepDistributionReport",
    "TableLM",
    "__version__",
    "augment_logits",
    "cosine",
    "crossover_length",
    "embed",
    "eta_divergence_curve",
    "exact_step_distribution",
    "fd_gradient_check",
    "flops_per_step",
    "generate",
    "kd_gradient",
    "kl_divergence",
    "norm_clamped",
    "retrieval_budget",
    "run_verify_suites",
    "sample_categorical",
    "save_lm_file",
    "select_chunks",
    "softmax_t",
    "speedup_curve",
    "tail_preserve",
    "tv_distance",
]
