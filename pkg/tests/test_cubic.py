import numpy as np
import pytest

from sarc.cubic import (
    CubicModel,
    TerminationSpec,
    minimize_model,
    minimize_model_gd,
    model_gradient,
    model_value,
    solve_tridiagonal_cubic,
)

from oracles import cubic_global_min, fd_gradient


def _tridiag_dense(diag, off):
    T = np.diag(np.asarray(diag, dtype=float))
    off = np.asarray(off, dtype=float)
    for i, b in enumerate(off):
        T[i, i + 1] = T[i + 1, i] = b
    return T


def _stationarity(diag, off, gnorm, sigma, y):
    T = _tridiag_dense(diag, off)
    g = np.zeros(len(diag))
    g[0] = gnorm
    return np.linalg.norm(T @ y + sigma * np.linalg.norm(y) * y + g)


class TestTridiagonalSolve:
    def test_scalar_positive(self):
        # 1 + s + s^2 sign structure: root (1 - sqrt(5)) / 2
        y = solve_tridiagonal_cubic(np.array([1.0]), np.array([]), 1.0, 1.0)
        assert y[0] == pytest.approx((1.0 - np.sqrt(5.0)) / 2.0, abs=1e-12)

    def test_scalar_zero_curvature(self):
        y = solve_tridiagonal_cubic(np.array([0.0]), np.array([]), 1.0, 3.0)
        assert y[0] == pytest.approx(-1.0 / np.sqrt(3.0), abs=1e-12)

    def test_indefinite_2d(self):
        diag, off = np.array([1.0, -2.0]), np.array([0.0])
        y = solve_tridiagonal_cubic(diag, off, 1.0, 1.0)
        assert _stationarity(diag, off, 1.0, 1.0, y) < 1e-9
        assert np.linalg.norm(y) >= 2.0 - 1e-9  # multiplier at least the barrier

    def test_hard_case_null_space_step(self):
        # e1 orthogonal to the minimal eigenspace of a reducible T
        diag, off = np.array([1.0, -3.0]), np.array([0.0])
        y = solve_tridiagonal_cubic(diag, off, 1.0, 1.0)
        assert np.linalg.norm(y) == pytest.approx(3.0, abs=1e-9)
        assert y[0] == pytest.approx(-0.25, abs=1e-10)
        assert abs(y[1]) == pytest.approx(np.sqrt(9.0 - 1.0 / 16.0), abs=1e-8)
        assert _stationarity(diag, off, 1.0, 1.0, y) < 1e-8

    def test_zero_gradient_branches(self):
        y = solve_tridiagonal_cubic(np.array([1.0, 2.0]), np.array([0.0]), 0.0, 1.0)
        assert np.all(y == 0.0)
        y = solve_tridiagonal_cubic(np.array([1.0, -3.0]), np.array([0.0]), 0.0, 1.0)
        assert np.linalg.norm(y) == pytest.approx(3.0, abs=1e-10)

    def test_residual_contract_random(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            k = int(rng.integers(1, 9))
            diag = rng.standard_normal(k) * 3.0
            off = rng.standard_normal(max(k - 1, 0))
            gnorm = float(10.0 ** rng.uniform(-3, 2))
            sigma = float(10.0 ** rng.uniform(-2, 1))
            y = solve_tridiagonal_cubic(diag, off, gnorm, sigma)
            lam_min = np.linalg.eigvalsh(_tridiag_dense(diag, off)).min()
            assert _stationarity(diag, off, gnorm, sigma, y) <= 1e-8 * max(gnorm, 1.0)
            assert sigma * np.linalg.norm(y) >= max(0.0, -lam_min) - 1e-7

    def test_matches_eigen_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            k = int(rng.integers(1, 7))
            diag = rng.standard_normal(k) * 2.0
            off = rng.standard_normal(max(k - 1, 0))
            gnorm = float(10.0 ** rng.uniform(-2, 1))
            sigma = float(10.0 ** rng.uniform(-1, 1))
            T = _tridiag_dense(diag, off)
            g = np.zeros(k)
            g[0] = gnorm
            y = solve_tridiagonal_cubic(diag, off, gnorm, sigma)
            y_star, _ = cubic_global_min(T, g, sigma)
            val = lambda z: float(g @ z + 0.5 * z @ T @ z + sigma / 3.0 * np.linalg.norm(z) ** 3)
            assert val(y) <= val(y_star) + 1e-8 * max(1.0, abs(val(y_star)))

    def test_input_validation(self):
        with pytest.raises(ValueError):
            solve_tridiagonal_cubic(np.array([1.0, 2.0]), np.array([]), 1.0, 1.0)
        with pytest.raises(ValueError):
            solve_tridiagonal_cubic(np.array([1.0]), np.array([]), 1.0, 0.0)
        with pytest.raises(ValueError):
            solve_tridiagonal_cubic(np.array([1.0]), np.array([]), -1.0, 1.0)


class TestModelPieces:
    def test_value_and_gradient_consistent(self):
        rng = np.random.default_rng(2)
        H = rng.standard_normal((5, 5))
        H = 0.5 * (H + H.T)
        g = rng.standard_normal(5)
        model = CubicModel(g, H, 0.7, f0=1.5)
        s = rng.standard_normal(5)
        fd = fd_gradient(lambda z: model_value(model, z), s)
        assert np.allclose(model_gradient(model, s), fd, rtol=1e-6, atol=1e-8)
        assert model_value(model, np.zeros(5)) == pytest.approx(1.5)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            CubicModel(np.array([np.nan]), np.eye(1), 1.0)
        with pytest.raises(ValueError):
            CubicModel(np.array([1.0]), np.eye(1), 0.0)

    def test_termination_spec(self):
        s31 = TerminationSpec("condition_3_1", 0.1)
        assert s31.threshold(2.0, 0.5) == pytest.approx(0.1 * 0.25)
        assert s31.threshold(0.5, 2.0) == pytest.approx(0.1 * 0.125)
        s41 = TerminationSpec("condition_4_1", 0.1)
        assert s41.threshold(2.0, 0.5) == pytest.approx(0.1 * 0.5 * 0.5)
        assert s41.threshold(0.5, 2.0) == pytest.approx(0.1 * 1.0 * 0.5)
        with pytest.raises(ValueError):
            TerminationSpec("condition_9_9", 0.1)
        with pytest.raises(ValueError):
            TerminationSpec("condition_3_1", 0.5)
        with pytest.raises(ValueError):
            TerminationSpec("condition_3_1", 0.0)


class TestMinimizeModel:
    def _random_model(self, rng, d, definite=None):
        H = rng.standard_normal((d, d))
        H = 0.5 * (H + H.T)
        if definite == "psd":
            H = H @ H.T / d + 0.1 * np.eye(d)
        g = rng.standard_normal(d)
        sigma = float(10.0 ** rng.uniform(-1, 1))
        return CubicModel(g, H, sigma)

    def test_reaches_oracle_value(self):
        # tiny kappa_theta forces a near-exact solve so the value must match
        # the global oracle; looser settings may stop early by design
        rng = np.random.default_rng(3)
        spec = TerminationSpec("condition_3_1", 1e-8)
        for _ in range(60):
            d = int(rng.integers(2, 7))
            model = self._random_model(rng, d)
            res = minimize_model(model, spec)
            dense = model.H.M if hasattr(model.H, "M") else model.H
            s_star, _ = cubic_global_min(dense, model.g, model.sigma)
            v_star = model_value(model, s_star)
            v = model_value(model, res.s)
            assert v <= v_star + 1e-6 * max(1.0, abs(v_star))
            assert res.model_decrease == pytest.approx(model.f0 - v, abs=1e-10)

    def test_termination_residual_honored(self):
        rng = np.random.default_rng(4)
        for kind in ("condition_3_1", "condition_4_1"):
            spec = TerminationSpec(kind, 0.2)
            for _ in range(30):
                model = self._random_model(rng, 6)
                res = minimize_model(model, spec, grad_f_norm=np.linalg.norm(model.g))
                if res.status == "converged":
                    thr = spec.threshold(np.linalg.norm(model.g), np.linalg.norm(res.s))
                    full = np.linalg.norm(model_gradient(model, res.s))
                    assert full <= thr + 1e-12
                    assert res.condition_met

    def test_identity_hessian_one_step(self):
        # Krylov space collapses after one vector; solution is exact there
        g = np.array([2.0, 0.0, 0.0])
        model = CubicModel(g, np.eye(3), 1.0)
        res = minimize_model(model, TerminationSpec("condition_3_1", 0.05))
        assert res.status == "converged"
        assert res.k == 1
        # full-space solution solves 2 - t - t^2 = 0 along -e1
        assert np.allclose(res.s, [-1.0, 0.0, 0.0], atol=1e-12)
        assert np.linalg.norm(model_gradient(model, res.s)) < 1e-10

    def test_exhausted_flag(self):
        rng = np.random.default_rng(5)
        H = np.array([[1.0, 0.9], [0.9, 4.0]])
        g = np.array([1.0, 1.0])
        model = CubicModel(g, H, 1.0)
        res = minimize_model(model, TerminationSpec("condition_3_1", 1e-8), max_dim=1)
        assert res.status == "exhausted"
        assert not res.condition_met
        assert res.k == 1

    def test_zero_gradient_short_circuit(self):
        model = CubicModel(np.zeros(4), np.eye(4), 1.0)
        res = minimize_model(model, TerminationSpec("condition_3_1", 0.05))
        assert res.status == "converged" and np.all(res.s == 0.0) and res.hvp_count == 0

    def test_hvp_count_tracks_iterations(self):
        rng = np.random.default_rng(6)
        model = self._random_model(rng, 8)
        res = minimize_model(model, TerminationSpec("condition_3_1", 0.05))
        assert res.hvp_count >= res.k
        assert res.k >= 1

    def test_operator_input(self):
        # matvec-only access: results agree with the dense path
        rng = np.random.default_rng(7)
        H = rng.standard_normal((5, 5))
        H = 0.5 * (H + H.T)
        g = rng.standard_normal(5)

        class Op:
            def matvec(self, v):
                return H @ v

        spec = TerminationSpec("condition_3_1", 0.05)
        r1 = minimize_model(CubicModel(g, H, 1.0), spec)
        r2 = minimize_model(CubicModel(g, Op(), 1.0), spec)
        assert np.allclose(r1.s, r2.s, rtol=1e-10, atol=1e-12)


class TestGradientDescentBackend:
    def test_matches_oracle_on_psd(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            d = int(rng.integers(2, 5))
            H = rng.standard_normal((d, d))
            H = H @ H.T / d + 0.2 * np.eye(d)
            g = rng.standard_normal(d)
            model = CubicModel(g, H, 1.0)
            res = minimize_model_gd(model, TerminationSpec("condition_3_1", 1e-3))
            s_star, _ = cubic_global_min(H, g, 1.0)
            v_star = model_value(model, s_star)
            assert model_value(model, res.s) <= v_star + 1e-4 * max(1.0, abs(v_star))
            assert res.status == "converged"
