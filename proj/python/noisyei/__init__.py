"""Python bindings for the noisyei constrained Bayesian optimization library."""

from ._core import (  # noqa: F401
    BatchOptions,
    Bounds,
    FantasyMode,
    GPModel,
    KernelParams,
    NoisyDataset,
    SamplingMethod,
    Study,
    SobolGenerator,
    eix,
    ei_analytic,
    evaluate_true,
    fit_map,
    generate_batch,
    inv_normal_cdf,
    matern52,
    nei_at,
    normal_cdf,
    problem_info,
    problem_names,
    run_opt_benchmark_csv,
    run_qmc_study_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
