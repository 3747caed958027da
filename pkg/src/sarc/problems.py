"""Finite-sum losses with component-wise first- and second-order oracles.

The objective is f(x) = (1/n) sum_i f_i(x). Four families are supported:

- ridge_least_squares: f_i = (a_i^T x - b_i)^2 + reg_scale*lam*||x||^2
- reg_logistic:        f_i = ln(1 + exp(-b_i a_i^T x)) + reg_scale*lam*||x||^2
- nonconvex_svm:       f_i = 1 - tanh(b_i a_i^T x) + reg_scale*lam*||x||^2
- pca_quadratic:       f_j = 0.5 x^T (mu I - a_j a_j^T) x + c^T x   (lam holds mu)

The first three are generalized linear models: the data term is
fhat_j(a_j^T x), so the component Hessian is fhat_j''(a_j^T x) a_j a_j^T plus
the regularizer curvature, and the scalar curvature fhat_j'' drives the
non-uniform sampling distribution. pca_quadratic is not of that form and only
supports uniform sampling.

Gradients are always exact full-batch; only Hessians are ever sub-sampled.
The ridge term is folded into every component so that sub-sampling averages
complete components. `reg_scale` selects the penalty convention:
reg_scale=1.0 gives lam*||x||^2 per component, reg_scale=0.5 gives
(lam/2)*||x||^2 (the convention the benchmark harness uses).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

FAMILIES = ("ridge_least_squares", "reg_logistic", "nonconvex_svm", "pca_quadratic")

# Families whose data term is fhat_j(a_j^T x) (generalized linear form).
GLM_FAMILIES = ("ridge_least_squares", "reg_logistic", "nonconvex_svm")

# max |d^2/dt^2 (1 - tanh t)| = 4/(3*sqrt(3)), attained where tanh^2 t = 1/3.
SVM_CURVATURE_BOUND = 4.0 / (3.0 * np.sqrt(3.0))


class DegenerateCurvatureError(ValueError):
    """All component curvatures vanish; Definition-style weights are undefined."""


@dataclass
class Dataset:
    """Sparse row-major observations (a_i, b_i).

    A is CSR with sorted indices so row dot products are O(nnz).
    """

    A: sp.csr_matrix
    b: np.ndarray

    def __post_init__(self):
        if not sp.issparse(self.A):
            self.A = sp.csr_matrix(np.atleast_2d(np.asarray(self.A, dtype=float)))
        self.A = self.A.tocsr().astype(float)
        self.A.sort_indices()
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape[0] < 1 or self.A.shape[1] < 1:
            raise ValueError("dataset needs n >= 1 and d >= 1")
        if self.b.shape[0] != self.A.shape[0]:
            raise ValueError(
                f"label count {self.b.shape[0]} != row count {self.A.shape[0]}"
            )
        if not np.all(np.isfinite(self.A.data)) or not np.all(np.isfinite(self.b)):
            raise ValueError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def row(self, j: int) -> np.ndarray:
        return np.asarray(self.A.getrow(j).todense()).ravel()

    def row_sq_norms(self) -> np.ndarray:
        if not hasattr(self, "_row_sq"):
            self._row_sq = np.asarray(self.A.multiply(self.A).sum(axis=1)).ravel()
        return self._row_sq

    @classmethod
    def from_dense(cls, A, b) -> "Dataset":
        return cls(sp.csr_matrix(np.atleast_2d(np.asarray(A, dtype=float))), b)


@dataclass
class LossModel:
    """A named loss family bound to a dataset.

    `lam` is the regularization weight; for pca_quadratic it holds the shift mu
    instead (the library does not verify mu >= lambda_max of the covariance).
    `linear` is the fixed linear-term vector of pca_quadratic (defaults to 0).
    """

    family: str
    lam: float
    dataset: Dataset
    reg_scale: float = 1.0
    linear: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.family in ("reg_logistic", "nonconvex_svm"):
            labels = np.unique(self.dataset.b)
            if not np.all(np.isin(labels, (-1.0, 1.0))):
                raise ValueError(
                    f"{self.family} needs labels in {{-1,+1}}, got {labels}"
                )
        if self.family == "pca_quadratic":
            if self.linear is None:
                self.linear = np.zeros(self.dataset.d)
            self.linear = np.asarray(self.linear, dtype=float).ravel()
            if self.linear.shape[0] != self.dataset.d:
                raise ValueError("linear term dimension mismatch")

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    def reg_curvature(self) -> float:
        """Hessian contribution of the per-component regularizer (a multiple of I)."""
        if self.family == "pca_quadratic":
            return self.lam  # mu I part of every component
        return 2.0 * self.reg_scale * self.lam

    def is_glm(self) -> bool:
        return self.family in GLM_FAMILIES


def _check_point(model: LossModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.d:
        raise ValueError(f"x has dimension {x.shape[0]}, expected {model.d}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite entries")
    return x


def _margins(model: LossModel, x: np.ndarray) -> np.ndarray:
    return model.dataset.A @ x


def glm_curvature(family: str, t: np.ndarray, b: np.ndarray) -> np.ndarray:
    """fhat''(t) for a batch of margins t and labels b of a GLM family."""
    t = np.asarray(t, dtype=float)
    b = np.asarray(b, dtype=float)
    if family == "ridge_least_squares":
        return np.full(t.shape, 2.0)
    if family == "reg_logistic":
        # d^2/dt^2 ln(1+exp(-b t)) = b^2 s(1-s) with s = sigmoid(-b t)
        from scipy.special import expit

        s = expit(-b * t)
        return b * b * s * (1.0 - s)
    if family == "nonconvex_svm":
        # d^2/dt^2 (1 - tanh(b t)) = 2 b^2 tanh(b t) sech^2(b t)
        u = np.tanh(b * t)
        return 2.0 * b * b * u * (1.0 - u * u)
    raise ValueError(f"{family} is not of generalized linear form")


def curvature_vector(model: LossModel, x: np.ndarray) -> np.ndarray:
    """fhat_j''(a_j^T x) for every component of a generalized linear family."""
    if not model.is_glm():
        raise ValueError(f"{model.family} is not of generalized linear form")
    x = _check_point(model, x)
    return glm_curvature(model.family, _margins(model, x), model.dataset.b)


def full_value(model: LossModel, x: np.ndarray) -> float:
    """f(x) = (1/n) sum_i f_i(x)."""
    x = _check_point(model, x)
    t = _margins(model, x)
    b = model.dataset.b
    reg = model.reg_scale * model.lam * float(x @ x)
    if model.family == "ridge_least_squares":
        r = t - b
        return float(np.mean(r * r)) + reg
    if model.family == "reg_logistic":
        return float(np.mean(np.logaddexp(0.0, -b * t))) + reg
    if model.family == "nonconvex_svm":
        return float(np.mean(1.0 - np.tanh(b * t))) + reg
    # pca_quadratic: (1/n) sum_j [0.5 x^T(mu I - a_j a_j^T)x] + c^T x
    mu = model.lam
    return float(0.5 * mu * (x @ x) - 0.5 * np.mean(t * t) + model.linear @ x)


def full_gradient(model: LossModel, x: np.ndarray) -> np.ndarray:
    """Exact gradient of f (gradients are never sub-sampled)."""
    x = _check_point(model, x)
    A, b = model.dataset.A, model.dataset.b
    t = A @ x
    n = model.n
    reg_grad = 2.0 * model.reg_scale * model.lam * x
    if model.family == "ridge_least_squares":
        return (2.0 / n) * (A.T @ (t - b)) + reg_grad
    if model.family == "reg_logistic":
        from scipy.special import expit

        w = -b * expit(-b * t)
        return (A.T @ w) / n + reg_grad
    if model.family == "nonconvex_svm":
        u = np.tanh(b * t)
        w = -b * (1.0 - u * u)
        return (A.T @ w) / n + reg_grad
    mu = model.lam
    return mu * x - (A.T @ t) / n + model.linear


def batch_gradient(model: LossModel, x: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Mean of component gradients over `indices` (an unbiased estimate of
    full_gradient when indices are sampled uniformly)."""
    x = _check_point(model, x)
    indices = np.asarray(indices, dtype=int).ravel()
    if indices.size == 0:
        raise ValueError("batch must be non-empty")
    if indices.min() < 0 or indices.max() >= model.n:
        raise IndexError("batch index out of range")
    A = model.dataset.A[indices]
    b = model.dataset.b[indices]
    t = A @ x
    m = indices.size
    if model.family == "pca_quadratic":
        return model.lam * x - (A.T @ t) / m + model.linear
    reg_grad = 2.0 * model.reg_scale * model.lam * x
    if model.family == "ridge_least_squares":
        w = 2.0 * (t - b)
    elif model.family == "reg_logistic":
        from scipy.special import expit

        w = -b * expit(-b * t)
    else:
        u = np.tanh(b * t)
        w = -b * (1.0 - u * u)
    return (A.T @ w) / m + reg_grad


def component_hvp(model: LossModel, j: int, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Hessian-vector product of component j without forming the matrix."""
    if not 0 <= j < model.n:
        raise IndexError(f"component index {j} out of range [0, {model.n})")
    x = _check_point(model, x)
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != model.d:
        raise ValueError("v dimension mismatch")
    a = model.dataset.row(j)
    if model.family == "pca_quadratic":
        return model.lam * v - (a @ v) * a
    curv = scalar_second_derivative(model, j, x)
    return curv * (a @ v) * a + model.reg_curvature() * v


def scalar_second_derivative(model: LossModel, j: int, x: np.ndarray) -> float:
    """fhat_j''(a_j^T x); may be negative for nonconvex_svm."""
    if not model.is_glm():
        raise ValueError(f"{model.family} has no scalar-curvature form")
    if not 0 <= j < model.n:
        raise IndexError(f"component index {j} out of range [0, {model.n})")
    x = _check_point(model, x)
    t = float((model.dataset.A.getrow(j) @ x)[0])
    b = float(model.dataset.b[j])
    if model.family == "ridge_least_squares":
        return 2.0
    if model.family == "reg_logistic":
        from scipy.special import expit

        s = float(expit(-b * t))
        return b * b * s * (1.0 - s)
    u = np.tanh(b * t)
    return float(2.0 * b * b * u * (1.0 - u * u))


@dataclass
class LipschitzInfo:
    """Per-component gradient-Lipschitz summary: L = max_j L_j, Lbar = mean L_j."""

    L: float
    Lbar: float
    source: str = "analytic"
    per_component: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not (0.0 < self.Lbar <= self.L < np.inf):
            raise ValueError(f"need 0 < Lbar <= L < inf, got L={self.L}, Lbar={self.Lbar}")


def lipschitz_bounds(model: LossModel, method: str = "analytic") -> LipschitzInfo:
    """Gradient-Lipschitz bounds for the components.

    Analytic bounds per family (||.|| spectral):
      reg_logistic:        L_j = ||a_j||^2 / 4 + reg curvature
      ridge_least_squares: L_j = 2 ||a_j||^2 + reg curvature
      nonconvex_svm:       L_j = (4/(3 sqrt 3)) ||a_j||^2 + reg curvature
      pca_quadratic:       L_j = max(mu, |mu - ||a_j||^2|)

    `method="estimated"` runs power iteration on each component Hessian at a
    random point instead (flagged source="estimated"); it exists for losses
    added without analytic bounds and always terminates at its iteration cap.
    """
    sq = model.dataset.row_sq_norms()
    if method == "analytic":
        reg = model.reg_curvature()
        if model.family == "reg_logistic":
            per = 0.25 * sq + reg
        elif model.family == "ridge_least_squares":
            per = 2.0 * sq + reg
        elif model.family == "nonconvex_svm":
            per = SVM_CURVATURE_BOUND * sq + reg
        else:
            mu = model.lam
            per = np.maximum(mu, np.abs(mu - sq))
        source = "analytic"
    elif method == "estimated":
        per = _power_iteration_bounds(model)
        source = "estimated"
    else:
        raise ValueError(f"unknown method {method!r}")
    L = float(np.max(per))
    Lbar = float(np.mean(per))
    return LipschitzInfo(L=L, Lbar=Lbar, source=source, per_component=per)


def _power_iteration_bounds(model: LossModel, iters: int = 50, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(model.d)
    per = np.empty(model.n)
    for j in range(model.n):
        v = rng.standard_normal(model.d)
        v /= np.linalg.norm(v)
        lam_est = 0.0
        for _ in range(iters):
            w = component_hvp(model, j, x, v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            lam_est = nw
            v = w / nw
        per[j] = lam_est
    return per


def dense_hessian(model: LossModel, x: np.ndarray, dense_cap: int = 400) -> np.ndarray:
    """Explicit (d x d) Hessian of f; test instrumentation only.

    Refuses d above `dense_cap` so production paths cannot materialize it by
    accident.
    """
    if model.d > dense_cap:
        raise ValueError(f"d={model.d} exceeds dense cap {dense_cap}")
    x = _check_point(model, x)
    A = model.dataset.A
    n = model.n
    if model.family == "pca_quadratic":
        mu = model.lam
        return mu * np.eye(model.d) - (A.T @ A).toarray() / n
    curv = curvature_vector(model, x)
    scaled = A.multiply(curv[:, None] / n)
    H = (A.T @ scaled).toarray()
    H += model.reg_curvature() * np.eye(model.d)
    return 0.5 * (H + H.T)
