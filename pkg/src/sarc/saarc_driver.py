"""Accelerated two-phase cubic regularization and the hybrid scheme.

Phase I runs accept/reject steps from x0 with a single Hessian built at x0,
accepting the first step whose model value overestimates the trial value
(m - f(x+s) > 0). Phase II accelerates from that anchor via an estimating
sequence

    psi_l(z) = lin_const + z . lin_grad + (varsigma_l/6) ||z - xbar1||^3,

whose closed-form minimizer z_l drives the extrapolation point
y_l = l/(l+3) xbar_l + 3/(l+3) z_l. A trial step s at y_l is accepted when
rho = -s . grad f(y_l + s) / ||s||^3 >= eta. On success the sequence gains the
linear term of the new point with weight l(l+1)/2, and varsigma grows by
gamma3 factors until psi_l(z_l) >= (l(l+1)(l+2)/6) f(xbar_l).

Successful iterations update the Hessian tolerance from the gradient at the
next extrapolation point, eps = min(1, (1-kappa_theta)||grad f(y_l)||/2),
which is the tolerance of the operator actually built at y_l; that gradient
doubles as the next subproblem's linear term, so it is charged once.

The hybrid runs this scheme until the relative progress of a successful step
drops to 0.1, then hands the iterate to the non-accelerated driver (sigma
carried over, eps re-initialized) for the local phase.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .accounting import EpochLedger
from .cubic import CubicModel, TerminationSpec
from .problems import LipschitzInfo, LossModel, full_gradient, full_value, lipschitz_bounds
from .sampling import SampleStream, SubsampledHessian, build_subsampled_hessian, resolve_plan
from .sarc_driver import SarcState, SolverConfig, TraceRecord, _subproblem, sarc_step


@dataclass
class EstimatingSequence:
    xbar1: np.ndarray
    varsigma: float
    lin_const: float
    lin_grad: np.ndarray
    l: int = 1

    def psi_value(self, z: np.ndarray) -> float:
        r = np.linalg.norm(z - self.xbar1)
        return float(self.lin_const + z @ self.lin_grad + self.varsigma / 6.0 * r**3)

    def psi_grad(self, z: np.ndarray) -> np.ndarray:
        dz = z - self.xbar1
        return self.lin_grad + self.varsigma / 2.0 * np.linalg.norm(dz) * dz

    def argmin(self) -> np.ndarray:
        gn = float(np.linalg.norm(self.lin_grad))
        if gn == 0.0:
            return self.xbar1.copy()
        return self.xbar1 - np.sqrt(2.0 / (self.varsigma * gn)) * self.lin_grad

    def add_point(self, x: np.ndarray, f: float, grad: np.ndarray, coeff: float) -> None:
        # coeff * (f(x) + (z - x).grad) absorbed into the linear representation
        self.lin_const += coeff * (f - float(x @ grad))
        self.lin_grad = self.lin_grad + coeff * grad


@dataclass
class SaarcState:
    x: np.ndarray  # anchor iterate xbar_l
    f: float
    grad_x: np.ndarray
    grad_x_norm: float
    sigma: float
    eps_i: float
    H: SubsampledHessian | None
    trace: list[TraceRecord]
    ledger: EpochLedger
    stream: SampleStream
    lip: LipschitzInfo
    phase: str = "one"
    y: np.ndarray | None = None
    grad_y: np.ndarray | None = None
    grad_y_norm: float = 0.0
    seq: EstimatingSequence | None = None
    l: int = 0
    T1: int = 0
    T2: int = 0
    T3: int = 0
    iteration: int = 0
    terminal: bool = False
    status: str = "running"
    switch_pending: bool = False
    probe_rng: np.random.Generator | None = None
    t0: float = field(default_factory=time.perf_counter)


def _per_iter_delta(config: SolverConfig) -> float:
    # union bound over the O(eps^{-1/3}) iteration budget
    return config.delta * config.eps ** (1.0 / 3.0)


def _build_at(state: SaarcState, model: LossModel, config: SolverConfig, point: np.ndarray):
    plan = resolve_plan(
        model,
        point,
        state.eps_i,
        _per_iter_delta(config),
        state.lip,
        scheme=config.scheme,
        fixed_size=model.dataset.n if config.exact_hessian else config.fixed_sample_size,
    )
    shift = 0.0 if config.exact_hessian else state.eps_i / 2.0
    state.H = build_subsampled_hessian(model, point, plan, state.stream, shift=shift)
    state.ledger.add_hessian_build(plan.size)


def _record(state: SaarcState, *, success: bool | None) -> TraceRecord:
    rec = TraceRecord(
        iteration=state.iteration,
        f=state.f,
        grad_norm=state.grad_x_norm,
        sigma=state.sigma,
        eps_i=state.eps_i,
        sample_size=state.H.sample_size if state.H is not None else None,
        success=success,
        epochs=state.ledger.epochs,
        wall_time=time.perf_counter() - state.t0,
        phase=state.phase,
        l=state.l if state.phase == "two" else None,
        varsigma=state.seq.varsigma if state.seq is not None else None,
        t3=state.T3 if state.phase == "two" else None,
    )
    state.trace.append(rec)
    return rec


def psi_argmin(seq: EstimatingSequence) -> np.ndarray:
    return seq.argmin()


def grow_varsigma(seq: EstimatingSequence, threshold: float, gamma3: float,
                  cap: int = 10000) -> tuple[np.ndarray, int]:
    """Multiply varsigma by gamma3 until psi(argmin) >= threshold.

    Returns the final minimizer and the number of multiplications (each one
    counts toward T3). The cap guards against objectives outside the convex
    theory, where the loop need not terminate.
    """
    z = seq.argmin()
    growths = 0
    while seq.psi_value(z) < threshold:
        seq.varsigma *= gamma3
        growths += 1
        if growths > cap:
            raise RuntimeError("estimating-sequence weight growth did not terminate")
        z = seq.argmin()
    return z, growths


def relative_progress_trigger(f_old: float, f_new: float) -> bool:
    """True when a successful step improved f by at most 10% relative
    (absolute progress <= 0.1*(1+|f_old|) when f_old = 0)."""
    if f_old != 0.0:
        return abs(f_new - f_old) / abs(f_old) <= 0.1
    return abs(f_new - f_old) <= 0.1 * (1.0 + abs(f_old))


def _audit_sequence(state: SaarcState, config: SolverConfig, z: np.ndarray, threshold: float):
    """Numeric guards on the estimating sequence at every successful step."""
    seq = state.seq
    psi_z = seq.psi_value(z)
    if psi_z < threshold:
        raise AssertionError(
            f"estimating-sequence lower bound violated: psi(z)={psi_z} < {threshold}"
        )
    scale = max(
        float(np.linalg.norm(seq.lin_grad)),
        seq.varsigma / 2.0 * float(np.linalg.norm(z - seq.xbar1)) ** 2,
        1e-300,
    )
    resid = float(np.linalg.norm(seq.psi_grad(z)))
    if resid > 1e-10 * scale:
        raise AssertionError(f"psi minimizer residual {resid} exceeds 1e-10 relative")
    if config.psi_probes:
        d = z.shape[0]
        std = 1.0 + float(np.linalg.norm(z - seq.xbar1))
        probes = z + state.probe_rng.standard_normal((20, d)) * std
        floor = seq.varsigma / 12.0
        for zp in probes:
            lhs = seq.psi_value(zp) - psi_z
            rhs = floor * float(np.linalg.norm(zp - z)) ** 3
            if lhs < rhs - 1e-9 * (1.0 + abs(psi_z) + abs(lhs)):
                raise AssertionError("cubic-growth inequality violated at a probe point")


def phase1_run(
    model: LossModel,
    config: SolverConfig,
    x0: np.ndarray,
    ledger: EpochLedger | None = None,
    progress_hook=None,
) -> SaarcState:
    """Accept/reject from x0 with one Hessian until m - f(x+s) > 0."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape[0] != model.dataset.d:
        raise ValueError("x0 dimension mismatch")
    ledger = ledger if ledger is not None else EpochLedger(model.dataset.n)
    stream = SampleStream(config.seed)
    lip = lipschitz_bounds(model)

    grad = full_gradient(model, x0)
    ledger.add_gradient_pass()
    gn = float(np.linalg.norm(grad))
    f0 = full_value(model, x0)

    state = SaarcState(
        x=x0.copy(), f=f0, grad_x=grad, grad_x_norm=gn,
        sigma=config.sigma0, eps_i=min(1.0, (1.0 - config.kappa_theta) * gn / 3.0),
        H=None, trace=[], ledger=ledger, stream=stream, lip=lip,
        probe_rng=np.random.default_rng(np.random.Philox(key=config.seed + 0x5EED)),
    )
    if gn <= config.grad_tol:
        state.terminal = True
        state.status = "stationary" if gn == 0.0 else "converged"
        _record(state, success=None)
        return state

    _build_at(state, model, config, x0)
    _record(state, success=None)
    spec = TerminationSpec("condition_4_1", config.kappa_theta)

    while state.iteration < config.max_iters:
        cubic = CubicModel(state.grad_x, state.H, state.sigma, state.f)
        sub = _subproblem(config)(cubic, spec, grad_f_norm=state.grad_x_norm)
        f_trial = full_value(model, state.x + sub.s)
        overestimate = (state.f - sub.model_decrease) - f_trial  # m(s) - f(x+s)
        state.iteration += 1
        if overestimate > 0.0:
            state.T1 = state.iteration
            state.x = state.x + sub.s
            f_old = state.f
            state.f = f_trial
            state.grad_x = full_gradient(model, state.x)
            state.ledger.add_gradient_pass()
            state.grad_x_norm = float(np.linalg.norm(state.grad_x))
            _record(state, success=True)
            if state.grad_x_norm <= config.grad_tol:
                state.terminal = True
                state.status = "converged"
                return state
            if progress_hook is not None and progress_hook(f_old, state.f):
                state.switch_pending = True
                state.status = "switch"
                return state
            varsigma0 = config.varsigma0 if config.varsigma0 is not None else config.sigma0
            state.seq = EstimatingSequence(
                xbar1=state.x.copy(), varsigma=varsigma0,
                lin_const=state.f, lin_grad=np.zeros(model.dataset.d),
            )
            # z1 = xbar1, so y1 = 1/4 xbar1 + 3/4 z1 is the anchor itself
            state.y = state.x.copy()
            state.grad_y = state.grad_x
            state.grad_y_norm = state.grad_x_norm
            state.eps_i = min(1.0, (1.0 - config.kappa_theta) * state.grad_x_norm / 3.0)
            _build_at(state, model, config, state.y)
            state.phase = "two"
            state.l = 1
            return state
        state.sigma = config.gamma1 * state.sigma
        _record(state, success=False)

    state.status = "phase1_exhausted"
    return state


def phase2_step(
    state: SaarcState,
    model: LossModel,
    config: SolverConfig,
    progress_hook=None,
) -> SaarcState:
    """One accelerated iteration at the extrapolation point y_l."""
    if state.terminal or state.phase != "two":
        raise RuntimeError("phase2_step requires a live phase-two state")
    spec = TerminationSpec("condition_4_1", config.kappa_theta)
    cubic = CubicModel(state.grad_y, state.H, state.sigma, 0.0)
    sub = _subproblem(config)(cubic, spec, grad_f_norm=state.grad_y_norm)
    s = sub.s
    sn = float(np.linalg.norm(s))
    state.iteration += 1
    state.T2 += 1

    if sn == 0.0:
        state.sigma = config.gamma1 * state.sigma
        _record(state, success=False)
        return state

    x_trial = state.y + s
    grad_trial = full_gradient(model, x_trial)
    state.ledger.add_gradient_pass()
    rho = -float(s @ grad_trial) / sn**3

    if rho < config.eta:
        state.sigma = config.gamma1 * state.sigma
        _record(state, success=False)
        return state

    f_old = state.f
    f_new = full_value(model, x_trial)
    state.sigma = max(config.sigma_min, state.sigma / config.gamma1)
    l_new = state.l + 1
    seq = state.seq
    seq.add_point(x_trial, f_new, grad_trial, l_new * (l_new + 1) / 2.0)
    seq.l = l_new
    threshold = l_new * (l_new + 1) * (l_new + 2) / 6.0 * f_new
    z, growths = grow_varsigma(seq, threshold, config.gamma3)
    state.T3 += growths
    _audit_sequence(state, config, z, threshold)

    state.x = x_trial
    state.f = f_new
    state.grad_x = grad_trial
    state.grad_x_norm = float(np.linalg.norm(grad_trial))
    state.l = l_new

    if state.grad_x_norm <= config.grad_tol:
        state.terminal = True
        state.status = "converged"
        _record(state, success=True)
        return state
    if progress_hook is not None and progress_hook(f_old, f_new):
        state.switch_pending = True
        state.status = "switch"
        _record(state, success=True)
        return state

    state.y = (l_new / (l_new + 3.0)) * x_trial + (3.0 / (l_new + 3.0)) * z
    state.grad_y = full_gradient(model, state.y)
    state.ledger.add_gradient_pass()
    state.grad_y_norm = float(np.linalg.norm(state.grad_y))
    state.eps_i = min(1.0, (1.0 - config.kappa_theta) * state.grad_y_norm / 2.0)
    if state.grad_y_norm <= config.grad_tol:
        # extrapolation landed on a stationary point; adopt it if it is better
        f_y = full_value(model, state.y)
        if f_y <= state.f:
            state.x = state.y
            state.f = f_y
            state.grad_x = state.grad_y
            state.grad_x_norm = state.grad_y_norm
        state.terminal = True
        state.status = "converged"
        _record(state, success=True)
        return state
    _build_at(state, model, config, state.y)
    _record(state, success=True)
    return state


def saarc_run(
    model: LossModel,
    config: SolverConfig,
    x0: np.ndarray,
    ledger: EpochLedger | None = None,
    progress_hook=None,
) -> SaarcState:
    state = phase1_run(model, config, x0, ledger=ledger, progress_hook=progress_hook)
    while (
        not state.terminal
        and not state.switch_pending
        and state.phase == "two"
        and state.iteration < config.max_iters
    ):
        phase2_step(state, model, config, progress_hook=progress_hook)
    if not state.terminal and state.status in ("running",):
        state.status = "max_iters"
    return state


@dataclass
class SacrResult:
    x: np.ndarray
    f: float
    grad_norm: float
    status: str
    trace: list[TraceRecord]
    ledger: EpochLedger
    switched: bool
    switch_iteration: int | None
    saarc: SaarcState
    sarc: SarcState | None


def sacr_run(
    model: LossModel,
    config: SolverConfig,
    x0: np.ndarray,
    ledger: EpochLedger | None = None,
) -> SacrResult:
    """Accelerated scheme until relative progress <= 0.1, then local phase."""
    state = saarc_run(model, config, x0, ledger=ledger,
                      progress_hook=relative_progress_trigger)
    if not state.switch_pending:
        return SacrResult(
            x=state.x, f=state.f, grad_norm=state.grad_x_norm, status=state.status,
            trace=state.trace, ledger=state.ledger, switched=False,
            switch_iteration=None, saarc=state, sarc=None,
        )

    switch_iter = state.iteration
    local = SarcState(
        x=state.x.copy(), f=state.f, grad=state.grad_x,
        grad_norm=state.grad_x_norm, sigma=state.sigma,
        eps_i=min(1.0, (1.0 - config.kappa_theta) * state.grad_x_norm / 3.0),
        H=None, trace=state.trace, ledger=state.ledger, stream=state.stream,
        lip=state.lip, iteration=state.iteration, needs_rebuild=True, t0=state.t0,
    )
    while not local.terminal and local.iteration < config.max_iters:
        sarc_step(local, model, config)
    if not local.terminal:
        local.status = "max_iters"
    return SacrResult(
        x=local.x, f=local.f, grad_norm=local.grad_norm, status=local.status,
        trace=local.trace, ledger=local.ledger, switched=True,
        switch_iteration=switch_iter, saarc=state, sarc=local,
    )
