"""Adaptive cubic regularization with sub-sampled Hessians.

Each iteration minimizes the cubic model at the current iterate over a Krylov
subspace, accepts the step when the achieved-to-predicted decrease ratio
theta = (f(x) - f(x+s)) / (f(x) - m(s)) clears eta, and adapts both the cubic
weight sigma and the Hessian accuracy eps_i:

    success:  x <- x + s,  eps <- min(eps, (1-kappa_theta)||grad f(x)||/3),
              sigma <- max(sigma_min, sigma/gamma1), Hessian rebuilt at x
    failure:  sigma <- gamma1*sigma, iterate and Hessian kept

The Hessian rebuild is lazy: a fresh operator is sampled at the top of the
next step only if x moved, which charges nothing extra on the terminal
success. Epochs are charged through the shared ledger: one full gradient per
accepted step, the sample size once per build, function values free.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .accounting import EpochLedger
from .cubic import CubicModel, TerminationSpec, minimize_model, minimize_model_gd
from .problems import LipschitzInfo, LossModel, full_gradient, full_value, lipschitz_bounds
from .sampling import SampleStream, SubsampledHessian, build_subsampled_hessian, resolve_plan


@dataclass
class SolverConfig:
    gamma1: float = 2.0
    gamma2: float = 4.0
    gamma3: float = 2.0
    eta: float = 0.1
    sigma_min: float = 0.1
    sigma0: float = 1.0
    kappa_theta: float = 0.05
    eps: float = 1e-2  # target optimality driving the per-iteration failure budget
    delta: float = 0.1
    scheme: str = "uniform"
    max_iters: int = 500
    grad_tol: float = 1e-9
    exact_hessian: bool = False
    fixed_sample_size: int | None = None
    varsigma0: float | None = None  # estimating-sequence weight; defaults to sigma0
    psi_probes: bool = False  # sample the cubic-growth inequality at 20 points per success
    subproblem_backend: str = "lanczos"
    seed: int = 0

    def __post_init__(self):
        if not self.gamma2 > self.gamma1 > 1.0:
            raise ValueError("need gamma2 > gamma1 > 1")
        if self.gamma3 <= 1.0:
            raise ValueError("gamma3 must be > 1")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not 0.0 < self.sigma_min < 1.0:
            raise ValueError("sigma_min must lie in (0, 1)")
        if self.sigma0 < self.sigma_min:
            raise ValueError("sigma0 must be >= sigma_min")
        kappa_cap = min(0.5, 2.0 * self.sigma_min / 3.0)
        if not 0.0 < self.kappa_theta < kappa_cap:
            raise ValueError(f"kappa_theta must lie in (0, {kappa_cap})")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.scheme not in ("uniform", "nonuniform"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.grad_tol < 0.0:
            raise ValueError("grad_tol must be >= 0")
        if self.subproblem_backend not in ("lanczos", "gd"):
            raise ValueError(f"unknown subproblem backend {self.subproblem_backend!r}")
        if self.varsigma0 is not None and self.varsigma0 <= 0.0:
            raise ValueError("varsigma0 must be > 0")


@dataclass
class TraceRecord:
    iteration: int
    f: float
    grad_norm: float
    sigma: float | None
    eps_i: float | None
    sample_size: int | None
    success: bool | None
    epochs: float
    wall_time: float
    phase: str = ""
    l: int | None = None
    varsigma: float | None = None
    t3: int | None = None


@dataclass
class SarcState:
    x: np.ndarray
    f: float
    grad: np.ndarray
    grad_norm: float
    sigma: float
    eps_i: float
    H: SubsampledHessian | None
    trace: list[TraceRecord]
    ledger: EpochLedger
    stream: SampleStream
    lip: LipschitzInfo
    iteration: int = 0
    needs_rebuild: bool = False
    terminal: bool = False
    status: str = "running"
    psd_violations: int = 0
    t0: float = field(default_factory=time.perf_counter)


def _per_iter_delta(config: SolverConfig) -> float:
    # union bound over the O(eps^{-1/2}) iteration budget
    return config.delta * config.eps**0.5


def _subproblem(config: SolverConfig):
    return minimize_model_gd if config.subproblem_backend == "gd" else minimize_model


def _build(state: SarcState, model: LossModel, config: SolverConfig, per_iter_delta: float):
    plan = resolve_plan(
        model,
        state.x,
        state.eps_i,
        per_iter_delta,
        state.lip,
        scheme=config.scheme,
        fixed_size=model.dataset.n if config.exact_hessian else config.fixed_sample_size,
    )
    shift = 0.0 if config.exact_hessian else state.eps_i / 2.0
    state.H = build_subsampled_hessian(model, state.x, plan, state.stream, shift=shift)
    state.ledger.add_hessian_build(plan.size)
    state.needs_rebuild = False


def _record(state: SarcState, *, success: bool | None, phase: str = "sarc") -> TraceRecord:
    rec = TraceRecord(
        iteration=state.iteration,
        f=state.f,
        grad_norm=state.grad_norm,
        sigma=state.sigma,
        eps_i=state.eps_i,
        sample_size=state.H.sample_size if state.H is not None else None,
        success=success,
        epochs=state.ledger.epochs,
        wall_time=time.perf_counter() - state.t0,
        phase=phase,
    )
    state.trace.append(rec)
    return rec


def sarc_init(
    model: LossModel,
    config: SolverConfig,
    x0: np.ndarray,
    ledger: EpochLedger | None = None,
    stream: SampleStream | None = None,
    lip: LipschitzInfo | None = None,
) -> SarcState:
    """Evaluate the start point, set eps0, and build the first Hessian."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape[0] != model.dataset.d:
        raise ValueError("x0 dimension mismatch")
    ledger = ledger if ledger is not None else EpochLedger(model.dataset.n)
    stream = stream if stream is not None else SampleStream(config.seed)
    lip = lip if lip is not None else lipschitz_bounds(model)

    grad = full_gradient(model, x0)
    ledger.add_gradient_pass()
    gn = float(np.linalg.norm(grad))
    f0 = full_value(model, x0)
    eps0 = min(1.0, (1.0 - config.kappa_theta) * gn / 3.0)

    state = SarcState(
        x=x0.copy(), f=f0, grad=grad, grad_norm=gn,
        sigma=config.sigma0, eps_i=eps0, H=None,
        trace=[], ledger=ledger, stream=stream, lip=lip,
    )
    if gn <= config.grad_tol:
        state.terminal = True
        state.status = "stationary" if gn == 0.0 else "converged"
        _record(state, success=None)
        return state
    _build(state, model, config, _per_iter_delta(config))
    _record(state, success=None)
    return state


def sarc_step(state: SarcState, model: LossModel, config: SolverConfig) -> SarcState:
    """One accept/reject iteration; appends exactly one trace record."""
    if state.terminal:
        raise RuntimeError("step on a terminal state")
    if state.needs_rebuild:
        _build(state, model, config, _per_iter_delta(config))

    cubic = CubicModel(state.grad, state.H, state.sigma, state.f)
    spec = TerminationSpec("condition_3_1", config.kappa_theta)
    sub = _subproblem(config)(cubic, spec, grad_f_norm=state.grad_norm)
    s = sub.s
    f_trial = full_value(model, state.x + s)
    predicted = sub.model_decrease  # f(x) - m(s)

    if abs(predicted) < 1e-14 * abs(state.f):
        success = f_trial <= state.f  # division guard at noise level
    elif predicted <= 0.0:
        state.psd_violations += 1
        success = False
    else:
        success = (state.f - f_trial) / predicted >= config.eta

    state.iteration += 1
    if success:
        state.x = state.x + s
        state.f = f_trial
        state.grad = full_gradient(model, state.x)
        state.ledger.add_gradient_pass()
        state.grad_norm = float(np.linalg.norm(state.grad))
        state.eps_i = min(state.eps_i, (1.0 - config.kappa_theta) * state.grad_norm / 3.0)
        state.sigma = max(config.sigma_min, state.sigma / config.gamma1)
        state.needs_rebuild = True
        if state.grad_norm <= config.grad_tol:
            state.terminal = True
            state.status = "converged"
    else:
        state.sigma = config.gamma1 * state.sigma
    _record(state, success=success)
    return state


def sarc_run(
    model: LossModel,
    config: SolverConfig,
    x0: np.ndarray,
    ledger: EpochLedger | None = None,
) -> SarcState:
    state = sarc_init(model, config, x0, ledger=ledger)
    while not state.terminal and state.iteration < config.max_iters:
        sarc_step(state, model, config)
    if not state.terminal:
        state.status = "max_iters"
    return state
