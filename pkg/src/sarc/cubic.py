"""Cubic-model subproblem: m(s) = f0 + g^T s + 0.5 s^T H s + (sigma/3) ||s||^3.

The minimizer over a growing Krylov subspace is computed by the Lanczos
process with full re-orthogonalization. Each subspace problem reduces, in the
Lanczos basis, to a tridiagonal cubic whose stationarity system is

    (T + lambda I) y = -||g|| e1,   lambda = sigma ||y||,

solved by safeguarded Newton/bisection on the secular function
phi(lambda) = 1/||y(lambda)|| - sigma/lambda over
lambda in (max(0, -lambda_min(T)), infinity). The subspace iterate is globally
optimal over span(Q) by construction, which supplies the subspace-optimality
clause of the stronger termination condition for free.

Termination variants (residual r = ||grad m(s)||, gn = ||grad f(x)||):

    condition_3_1: r <= kappa_theta * min(gn, gn^3, ||s||^2)
    condition_4_1: r <= kappa_theta * min(1, ||s||) * min(||s||, gn)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class _MatrixOp:
    def __init__(self, M):
        self.M = np.asarray(M, dtype=float)

    def matvec(self, v):
        return self.M @ v


def as_operator(H):
    """Wrap a dense matrix as a matvec operator; pass operators through."""
    if hasattr(H, "matvec"):
        return H
    return _MatrixOp(H)


@dataclass
class CubicModel:
    g: np.ndarray
    H: object  # anything with .matvec, or a dense matrix
    sigma: float
    f0: float = 0.0

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float).ravel()
        if not np.all(np.isfinite(self.g)):
            raise ValueError("gradient contains non-finite entries")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be > 0")
        self.H = as_operator(self.H)


@dataclass
class TerminationSpec:
    kind: str
    kappa_theta: float

    def __post_init__(self):
        if self.kind not in ("condition_3_1", "condition_4_1"):
            raise ValueError(f"unknown termination kind {self.kind!r}")
        if not 0.0 < self.kappa_theta < 0.5:
            raise ValueError("kappa_theta must lie in (0, 1/2)")

    def threshold(self, grad_f_norm: float, step_norm: float) -> float:
        gn, sn = grad_f_norm, step_norm
        if self.kind == "condition_3_1":
            return self.kappa_theta * min(gn, gn**3, sn**2)
        return self.kappa_theta * min(1.0, sn) * min(sn, gn)


@dataclass
class SubproblemResult:
    s: np.ndarray
    model_decrease: float  # f0 - m(s) = -(g.s + 0.5 s.Hs + sigma/3 ||s||^3)
    grad_norm: float  # ||grad m(s)|| in full space
    k: int  # Krylov dimension reached
    hvp_count: int
    status: str  # converged | breakdown | exhausted
    condition_met: bool = True


def _tridiag_solve(diag, off, lam, rhs):
    k = diag.shape[0]
    ab = np.zeros((3, k))
    ab[1] = diag + lam
    if k > 1:
        ab[0, 1:] = off
        ab[2, :-1] = off
    return scipy.linalg.solve_banded((1, 1), ab, rhs)


def _tridiag_eig_min(diag, off):
    if diag.shape[0] == 1:
        return float(diag[0]), np.ones(1)
    w, v = scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    return float(w[0]), v[:, 0]


def solve_tridiagonal_cubic(
    diag: np.ndarray,
    off: np.ndarray,
    gnorm: float,
    sigma: float,
    tol_factor: float = 1e-10,
    max_iter: int = 300,
) -> np.ndarray:
    """Global minimizer of gnorm*e1.y + 0.5 y.T y + (sigma/3)||y||^3.

    Returns subspace coordinates y. The stationarity residual
    |sigma||y|| - lambda| * ||y|| is driven below tol_factor*gnorm
    (tol_factor alone when gnorm = 0). The minimal eigenpair is deflated from
    every shifted solve and handled analytically, so roots arbitrarily close
    to the barrier stay resolvable. The hard case (e1 orthogonal to the
    minimal eigenspace, only possible for reducible T) is resolved by the
    boundary root plus a null-space step.
    """
    diag = np.asarray(diag, dtype=float).ravel()
    off = np.asarray(off, dtype=float).ravel()
    k = diag.shape[0]
    if off.shape[0] != max(k - 1, 0):
        raise ValueError("off-diagonal length must be k-1")
    if sigma <= 0.0:
        raise ValueError("sigma must be > 0")
    if gnorm < 0.0:
        raise ValueError("gnorm must be >= 0")

    lam_min, v_min = _tridiag_eig_min(diag, off)
    barrier = max(0.0, -lam_min)

    if gnorm == 0.0:
        if lam_min >= 0.0:
            return np.zeros(k)
        return (barrier / sigma) * v_min

    rhs = np.zeros(k)
    rhs[0] = -gnorm

    # work in delta = lam - barrier: near-barrier roots are representable in
    # delta to full relative precision, never in lam itself
    base = lam_min + barrier  # exactly 0 whenever the barrier is active

    def solve_deflated(delta, b):
        # (T + lam I)^{-1} b with the v_min component treated analytically;
        # the plain solve loses all accuracy in that direction near the barrier
        c = float(v_min @ b)
        z = _tridiag_solve(diag, off, barrier + delta, b - c * v_min)
        z -= float(v_min @ z) * v_min
        return z + (c / (base + delta)) * v_min

    def y_of(delta):
        return solve_deflated(delta, rhs)

    tnorm = float(np.abs(diag).max())
    if k > 1:
        tnorm += 2.0 * float(np.abs(off).max())
    # provable root bound: (lambda - ||T||)^2 <= sigma*gnorm at the root
    lam_hi = tnorm + np.sqrt(sigma * gnorm)
    tol = tol_factor * gnorm

    # probe just right of the barrier to detect the hard case
    d_probe = max(barrier, 1.0) * 1e-13
    if barrier > 0.0:
        try:
            y_p = y_of(d_probe)
            hard = sigma * np.linalg.norm(y_p) <= barrier + d_probe
        except scipy.linalg.LinAlgError:
            hard = False
    else:
        hard = False

    if hard:
        # boundary root lambda = barrier; pseudo-inverse solution plus
        # null-space component scaled so sigma*||y|| = barrier
        T = np.diag(diag)
        if k > 1:
            T += np.diag(off, 1) + np.diag(off, -1)
        rhs_perp = rhs - float(v_min @ rhs) * v_min
        y0, *_ = np.linalg.lstsq(T + barrier * np.eye(k), rhs_perp, rcond=None)
        radius = barrier / sigma
        gap = radius**2 - float(y0 @ y0)
        tau = np.sqrt(gap) if gap > 0.0 else 0.0
        return y0 + tau * v_min

    d_lo, d_hi = 0.0, max(lam_hi - barrier, np.sqrt(sigma * gnorm))
    # phi(d_hi) must be positive; expand defensively against rounding in lam_hi
    for _ in range(60):
        if sigma * np.linalg.norm(y_of(d_hi)) <= barrier + d_hi:
            break
        d_hi *= 2.0
    else:
        raise RuntimeError("secular root bracketing failed; degenerate tridiagonal")

    delta = 0.5 * d_hi
    best_y, best_res = None, np.inf
    for _ in range(max_iter):
        try:
            y = y_of(delta)
        except scipy.linalg.LinAlgError:
            d_lo = delta
            delta = 0.5 * (d_lo + d_hi)
            continue
        lam = barrier + delta
        w = float(np.linalg.norm(y))
        res = abs(sigma * w - lam) * w
        if res <= tol:
            return y
        if np.isfinite(res) and res < best_res:
            best_y, best_res = y, res
        phi = 1.0 / w - sigma / lam
        if phi < 0.0:
            d_lo = delta
        else:
            d_hi = delta
        # Newton step on phi; phi'(lam) = (y.z)/w^3 + sigma/lam^2
        z = solve_deflated(delta, y)
        dphi = float(y @ z) / w**3 + sigma / lam**2
        d_new = delta - phi / dphi if dphi > 0.0 else 0.5 * (d_lo + d_hi)
        if not d_lo < d_new < d_hi:
            d_new = 0.5 * (d_lo + d_hi)
        if d_new == d_lo or d_new == d_hi:
            break  # bracket exhausted at machine precision
        delta = d_new
    if best_y is None:
        raise RuntimeError("secular equation solver did not converge")
    return best_y


def model_gradient(model: CubicModel, s: np.ndarray) -> np.ndarray:
    """grad m(s) = g + H s + sigma ||s|| s (one operator application)."""
    s = np.asarray(s, dtype=float).ravel()
    return model.g + model.H.matvec(s) + model.sigma * np.linalg.norm(s) * s


def model_value(model: CubicModel, s: np.ndarray) -> float:
    s = np.asarray(s, dtype=float).ravel()
    sn = np.linalg.norm(s)
    return float(
        model.f0 + model.g @ s + 0.5 * (s @ model.H.matvec(s)) + model.sigma / 3.0 * sn**3
    )


def minimize_model(
    model: CubicModel,
    spec: TerminationSpec,
    grad_f_norm: float | None = None,
    max_dim: int | None = None,
) -> SubproblemResult:
    """Lanczos/Krylov minimization of the cubic model until `spec` holds.

    Grows the subspace one Lanczos vector at a time (full re-orthogonalization),
    solves each subspace problem exactly through the tridiagonal secular
    equation, lifts the iterate, and checks the termination residual with an
    explicit full-space model gradient. Breakdown (invariant subspace) returns
    the subspace solution, which is then globally optimal over the reachable
    space; exhausting max_dim returns the last iterate flagged 'exhausted'.
    """
    g = model.g
    gn = float(np.linalg.norm(g))
    d = g.shape[0]
    if grad_f_norm is None:
        grad_f_norm = gn
    if gn == 0.0:
        return SubproblemResult(np.zeros(d), 0.0, 0.0, 0, 0, "converged")
    if max_dim is None:
        max_dim = d
    max_dim = min(max_dim, d)

    Q = np.empty((max_dim, d))
    alphas: list[float] = []
    betas: list[float] = []
    q = g / gn
    beta_prev = 0.0
    hvps = 0
    s = np.zeros(d)
    res = gn
    decrease = 0.0

    for k in range(1, max_dim + 1):
        Q[k - 1] = q
        w = model.H.matvec(q)
        hvps += 1
        if k > 1:
            w = w - beta_prev * Q[k - 2]
        alpha = float(q @ w)
        w = w - alpha * q
        # one full re-orthogonalization pass keeps Q^T Q = I to ~1e-14
        w = w - Q[:k].T @ (Q[:k] @ w)
        alphas.append(alpha)
        beta = float(np.linalg.norm(w))

        y = solve_tridiagonal_cubic(np.array(alphas), np.array(betas), gn, model.sigma)
        s = Q[:k].T @ y
        sn = float(np.linalg.norm(y))
        Hs = model.H.matvec(s)
        hvps += 1
        grad_m = g + Hs + model.sigma * sn * s
        res = float(np.linalg.norm(grad_m))
        decrease = -float(g @ s + 0.5 * (s @ Hs) + model.sigma / 3.0 * sn**3)

        if res <= spec.threshold(grad_f_norm, sn):
            return SubproblemResult(s, decrease, res, k, hvps, "converged")

        scale = max(np.abs(alphas).max(), np.abs(betas).max() if betas else 0.0)
        if beta <= 1e-12 * scale or beta == 0.0:
            return SubproblemResult(
                s, decrease, res, k, hvps, "breakdown",
                condition_met=res <= spec.threshold(grad_f_norm, sn),
            )
        betas.append(beta)
        beta_prev = beta
        q = w / beta

    return SubproblemResult(
        s, decrease, res, max_dim, hvps, "exhausted",
        condition_met=res <= spec.threshold(grad_f_norm, float(np.linalg.norm(s))),
    )


def minimize_model_gd(
    model: CubicModel,
    spec: TerminationSpec,
    grad_f_norm: float | None = None,
    max_iter: int = 5000,
) -> SubproblemResult:
    """Gradient-descent fallback backend behind the same interface.

    Backtracking steps on m from s = 0; intended for positive semidefinite H,
    where m is strongly convex and descent converges linearly. Used only when
    configured; the Lanczos path is the default.
    """
    g = model.g
    gn = float(np.linalg.norm(g))
    d = g.shape[0]
    if grad_f_norm is None:
        grad_f_norm = gn
    if gn == 0.0:
        return SubproblemResult(np.zeros(d), 0.0, 0.0, 0, 0, "converged")

    s = np.zeros(d)
    hvps = 0
    m_cur = model.f0
    step = 1.0 / max(gn, 1.0)
    for it in range(max_iter):
        grad_m = model_gradient(model, s)
        hvps += 1
        res = float(np.linalg.norm(grad_m))
        sn = float(np.linalg.norm(s))
        if res <= spec.threshold(grad_f_norm, sn):
            decrease = model.f0 - m_cur
            return SubproblemResult(s, decrease, res, 0, hvps, "converged")
        gg = res * res
        while True:
            cand = s - step * grad_m
            m_cand = model_value(model, cand)
            hvps += 1
            if m_cand <= m_cur - 0.5 * step * gg or step < 1e-18:
                break
            step *= 0.5
        s = cand
        m_cur = m_cand
        step *= 1.3  # cautious growth so the next trial starts near the last accepted step
    decrease = model.f0 - m_cur
    sn = float(np.linalg.norm(s))
    res = float(np.linalg.norm(model_gradient(model, s)))
    return SubproblemResult(
        s, decrease, res, 0, hvps, "exhausted",
        condition_met=res <= spec.threshold(grad_f_norm, sn),
    )
