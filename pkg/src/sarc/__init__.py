"""Stochastic adaptive cubic regularization: sub-sampled Newton-type solvers
with an accelerated variant, a hybrid scheme, and a benchmark harness."""

from .accounting import EpochLedger
from .baselines import BaselineResult, acr_run, agd_run, cr_run, lbfgs_run, sgd_run
from .bench import BenchResult, RunSpec, read_trace, run_benchmark, write_trace
from .cubic import (
    CubicModel,
    SubproblemResult,
    TerminationSpec,
    minimize_model,
    minimize_model_gd,
    model_gradient,
    model_value,
    solve_tridiagonal_cubic,
)
from .data import LibsvmFormatError, parse_libsvm, synth_logistic
from .problems import (
    Dataset,
    DegenerateCurvatureError,
    LipschitzInfo,
    LossModel,
    batch_gradient,
    component_hvp,
    curvature_vector,
    dense_hessian,
    full_gradient,
    full_value,
    lipschitz_bounds,
)
from .saarc_driver import (
    EstimatingSequence,
    SaarcState,
    SacrResult,
    phase1_run,
    phase2_step,
    psi_argmin,
    saarc_run,
    sacr_run,
)
from .sampling import (
    SamplingPlan,
    SampleStream,
    SubsampledHessian,
    build_subsampled_hessian,
    lemma_nonuniform_bound,
    lemma_uniform_bound,
    nonuniform_distribution,
    resolve_plan,
    sample_size_nonuniform,
    sample_size_uniform,
    spectral_error,
)
from .sarc_driver import SarcState, SolverConfig, TraceRecord, sarc_init, sarc_run, sarc_step

__all__ = [
    "EpochLedger",
    "BaselineResult", "acr_run", "agd_run", "cr_run", "lbfgs_run", "sgd_run",
    "BenchResult", "RunSpec", "read_trace", "run_benchmark", "write_trace",
    "CubicModel", "SubproblemResult", "TerminationSpec",
    "minimize_model", "minimize_model_gd", "model_gradient", "model_value",
    "solve_tridiagonal_cubic",
    "LibsvmFormatError", "parse_libsvm", "synth_logistic",
    "Dataset", "DegenerateCurvatureError", "LipschitzInfo", "LossModel",
    "batch_gradient", "component_hvp", "curvature_vector", "dense_hessian",
    "full_gradient", "full_value", "lipschitz_bounds",
    "EstimatingSequence", "SaarcState", "SacrResult",
    "phase1_run", "phase2_step", "psi_argmin", "saarc_run", "sacr_run",
    "SamplingPlan", "SampleStream", "SubsampledHessian",
    "build_subsampled_hessian", "lemma_nonuniform_bound", "lemma_uniform_bound",
    "nonuniform_distribution", "resolve_plan",
    "sample_size_nonuniform", "sample_size_uniform", "spectral_error",
    "SarcState", "SolverConfig", "TraceRecord", "sarc_init", "sarc_run", "sarc_step",
]
