import numpy as np
import pytest

from sarc.accounting import EpochLedger
from sarc.baselines import agd_run, cr_run, lbfgs_run, sgd_run
from sarc.bench import (
    CSV_HEADER,
    RunSpec,
    _exit_code,
    build_model,
    read_trace,
    run_benchmark,
    write_trace,
)
from sarc.data import LibsvmFormatError, parse_libsvm, synth_logistic
from sarc.problems import Dataset, LossModel, full_value, lipschitz_bounds
from sarc.sarc_driver import SolverConfig

from oracles import diag_quadratic_problem


class TestLibsvmParsing:
    def _parse(self, tmp_path, text, **kw):
        p = tmp_path / "data.txt"
        p.write_text(text)
        return parse_libsvm(str(p), **kw)

    def test_basic_sparse_line(self, tmp_path):
        ds = self._parse(tmp_path, "+1 1:0.5 3:-2\n-1 2:1.5\n")
        assert ds.n == 2 and ds.d == 3
        A = ds.A.toarray()
        assert np.allclose(A, [[0.5, 0.0, -2.0], [0.0, 1.5, 0.0]])
        assert np.array_equal(ds.b, [1.0, -1.0])

    def test_label_only_row_is_all_zeros(self, tmp_path):
        ds = self._parse(tmp_path, "+1 1:2\n-1\n")
        assert ds.n == 2
        assert np.allclose(ds.A.toarray()[1], 0.0)

    def test_zero_one_labels_mapped(self, tmp_path):
        ds = self._parse(tmp_path, "0 1:1\n1 1:2\n")
        assert np.array_equal(ds.b, [-1.0, 1.0])

    def test_one_two_labels_mapped(self, tmp_path):
        ds = self._parse(tmp_path, "1 1:1\n2 1:2\n")
        assert np.array_equal(ds.b, [1.0, -1.0])

    def test_pm_one_left_alone(self, tmp_path):
        ds = self._parse(tmp_path, "-1 1:1\n+1 1:2\n")
        assert np.array_equal(ds.b, [-1.0, 1.0])

    def test_unknown_labels_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            self._parse(tmp_path, "1 1:1\n3 1:2\n")

    def test_malformed_label_has_position(self, tmp_path):
        with pytest.raises(LibsvmFormatError) as e:
            self._parse(tmp_path, "+1 1:1\nabc 1:2\n")
        assert e.value.line == 2
        assert e.value.column == 1

    def test_malformed_pair_and_zero_index(self, tmp_path):
        with pytest.raises(LibsvmFormatError):
            self._parse(tmp_path, "+1 1:x\n")
        with pytest.raises(LibsvmFormatError):
            self._parse(tmp_path, "+1 0:1\n")
        with pytest.raises(LibsvmFormatError):
            self._parse(tmp_path, "+1 1\n")

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(LibsvmFormatError):
            self._parse(tmp_path, "")

    def test_n_features_override_and_overflow(self, tmp_path):
        ds = self._parse(tmp_path, "+1 1:1\n-1 2:1\n", n_features=5)
        assert ds.d == 5
        with pytest.raises(ValueError):
            self._parse(tmp_path, "+1 3:1\n", n_features=2)


class TestSynthData:
    def test_deterministic(self):
        a = synth_logistic(50, 6, 9, 2.0)
        b = synth_logistic(50, 6, 9, 2.0)
        assert np.array_equal(a.A.toarray() if hasattr(a.A, "toarray") else a.A,
                              b.A.toarray() if hasattr(b.A, "toarray") else b.A)
        assert np.array_equal(a.b, b.b)
        c = synth_logistic(50, 6, 10, 2.0)
        assert not np.array_equal(a.b, c.b)

    def test_labels_and_skew(self):
        ds = synth_logistic(400, 8, 0, 50.0)
        assert set(np.unique(ds.b)) <= {-1.0, 1.0}
        A = ds.A.toarray() if hasattr(ds.A, "toarray") else np.asarray(ds.A)
        norms = np.linalg.norm(A, axis=1)
        assert norms[0] > 10.0 * np.median(norms)

    def test_flip_fraction(self):
        ds = synth_logistic(5000, 10, 1, 1.0)
        # roughly 10% of labels disagree with a majority-fit direction; just
        # check both classes are present and neither dominates completely
        frac = np.mean(ds.b == 1.0)
        assert 0.2 < frac < 0.8


class TestEpochLedger:
    def test_arithmetic(self):
        led = EpochLedger(100)
        led.add_gradient_pass()
        assert led.epochs == pytest.approx(1.0)
        led.add_gradient_pass(30)
        assert led.epochs == pytest.approx(1.3)
        led.add_hessian_build(50)
        assert led.epochs == pytest.approx(1.8)
        snap = led.snapshot()
        assert snap == {"gradient_queries": 130, "hessian_queries": 50, "epochs": 1.8}

    def test_validation(self):
        with pytest.raises(ValueError):
            EpochLedger(0)
        led = EpochLedger(10)
        with pytest.raises(ValueError):
            led.add_gradient_pass(-1)
        with pytest.raises(ValueError):
            led.add_hessian_build(-1)


def _quadratic_model(n=40, d=6, seed=0, lam=1e-3):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    b = rng.standard_normal(n)
    return LossModel("ridge_least_squares", lam, Dataset.from_dense(A, b))


def _pure_quadratic(d=10, mu=1.0):
    # pca family with zero rows: f(x) = mu/2 ||x||^2, minimum 0 at the origin
    return LossModel("pca_quadratic", mu,
                     Dataset.from_dense(np.zeros((1, d)), np.zeros(1)))


class TestBaselines:
    def test_agd_classical_rate_bound(self):
        # f(x_k) - f* <= 2 L R^2 / (k+1)^2 when the starting L already
        # upper-bounds the curvature, since backtracking then never grows it
        model, c, h = diag_quadratic_problem(d=30, cond=1e3)
        L = float(h.max())
        x0 = np.zeros(30)
        R2 = float(c @ c)
        cfg = SolverConfig(grad_tol=0.0, max_iters=120)
        res = agd_run(model, cfg, x0, L=L)
        by_iter = {r.iteration: r.f for r in res.trace}
        for k in (10, 100):
            assert by_iter[k] <= 2.0 * L * R2 / (k + 1) ** 2 * (1.0 + 1e-9)

    def test_agd_converges_on_logistic(self):
        ds = synth_logistic(120, 5, 2, 1.0)
        model = LossModel("reg_logistic", 1e-3, ds, reg_scale=0.5)
        cfg = SolverConfig(grad_tol=1e-6, max_iters=4000)
        res = agd_run(model, cfg, np.zeros(5))
        assert res.status == "converged"

    def test_sgd_full_batch_descends_monotonically(self):
        model = _quadratic_model()
        cfg = SolverConfig(grad_tol=1e-10, max_iters=200)
        res = sgd_run(model, cfg, np.full(6, 2.0), batch=10**6)
        fs = [r.f for r in res.trace]
        assert all(b <= a + 1e-12 for a, b in zip(fs, fs[1:]))
        # full pass charged n per iteration
        d_epochs = res.trace[1].epochs - res.trace[0].epochs
        assert d_epochs == pytest.approx(1.0)

    def test_sgd_minibatch_epoch_rate(self):
        ds = synth_logistic(100, 4, 3, 1.0)
        model = LossModel("reg_logistic", 1e-4, ds, reg_scale=0.5)
        cfg = SolverConfig(grad_tol=0.0, max_iters=25)
        res = sgd_run(model, cfg, np.zeros(4), batch=32)
        for a, b in zip(res.trace, res.trace[1:]):
            assert b.epochs - a.epochs == pytest.approx(0.32)

    def test_sgd_divergence_guard(self):
        model = _quadratic_model()
        cfg = SolverConfig(grad_tol=0.0, max_iters=500)
        res = sgd_run(model, cfg, np.full(6, 1.0), batch=10**6, step=1e3)
        assert res.status == "diverged"
        assert _exit_code(res.status) == 1

    def test_sgd_batch_validation(self):
        with pytest.raises(ValueError):
            sgd_run(_quadratic_model(), SolverConfig(), np.zeros(6), batch=0)

    def test_lbfgs_converges_fast_on_quadratic(self):
        model = _quadratic_model(n=60, d=8, seed=4)
        cfg = SolverConfig(grad_tol=1e-9, max_iters=200)
        res = lbfgs_run(model, cfg, np.zeros(8))
        assert res.status == "converged"
        assert res.grad_norm <= 1e-9
        assert res.trace[-1].iteration < 100

    def test_cr_is_exact_full_sample(self):
        model = _quadratic_model(n=50, d=5, seed=5)
        cfg = SolverConfig(grad_tol=1e-9, max_iters=100)
        res = cr_run(model, cfg, np.full(5, 1.0))
        assert res.status == "converged"
        assert all(r.sample_size == 50 for r in res.trace)
        assert all(r.eps_i is not None for r in res.trace)

    def test_stationary_start_short_circuits(self):
        model = _pure_quadratic(d=4)
        cfg = SolverConfig(grad_tol=1e-12, max_iters=10)
        for runner in (agd_run, lbfgs_run):
            res = runner(model, cfg, np.zeros(4))
            assert res.status == "converged"
            assert len(res.trace) == 1
        res = sgd_run(model, cfg, np.zeros(4), batch=2)
        assert res.status == "converged"


class TestRunSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            RunSpec(algo="newton", synth=(10, 2, 0, 1.0))
        with pytest.raises(ValueError):
            RunSpec(algo="sarc")  # no source
        with pytest.raises(ValueError):
            RunSpec(algo="sarc", data_path="x", synth=(10, 2, 0, 1.0))
        with pytest.raises(ValueError):
            RunSpec(algo="sarc", synth=(10, 2, 0, 1.0), lam=-1.0)
        with pytest.raises(ValueError):
            RunSpec(algo="sarc", synth=(10, 2, 0, 1.0), x0_std=-1.0)

    def test_exit_codes(self):
        assert _exit_code("converged") == 0
        assert _exit_code("stationary") == 0
        assert _exit_code("max_iters") == 2
        assert _exit_code("phase1_exhausted") == 2
        assert _exit_code("diverged") == 1
        assert _exit_code("linesearch_failed") == 1


class TestTraceIO:
    def _spec(self, out, **kw):
        base = dict(algo="sarc", synth=(80, 4, 0, 1.0), lam=1e-4, x0_std=2.0,
                    grad_tol=1e-8, max_iters=120, out=out)
        base.update(kw)
        return RunSpec(**base)

    def test_csv_shape_and_header(self, tmp_path):
        out = str(tmp_path / "t.csv")
        res = run_benchmark(self._spec(out))
        assert res.exit_code == 0
        lines = open(out).read().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == len(res.trace) + 1
        first = lines[1].split(",")
        assert first[0] == "0"
        assert first[7] == ""  # init row has no accept flag
        assert first[8] == "sarc"

    def test_byte_identical_reruns(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        run_benchmark(self._spec(a))
        run_benchmark(self._spec(b))
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_seed_changes_trace(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        run_benchmark(self._spec(a))
        run_benchmark(self._spec(b, seed=1))
        assert open(a, "rb").read() != open(b, "rb").read()

    def test_round_trip_exact(self, tmp_path):
        out = str(tmp_path / "t.csv")
        res = run_benchmark(self._spec(out))
        back = read_trace(out)
        assert len(back) == len(res.trace)
        for orig, rt in zip(res.trace, back):
            assert rt.iteration == orig.iteration
            assert rt.epochs == orig.epochs  # repr round-trips floats exactly
            assert rt.f == orig.f
            assert rt.grad_norm == orig.grad_norm
            assert rt.sigma == orig.sigma
            assert rt.eps_i == orig.eps_i
            assert rt.sample_size == orig.sample_size
            assert rt.success == orig.success
            assert rt.phase == orig.phase
            assert rt.wall_time == 0.0

    def test_header_mismatch_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            read_trace(str(p))

    def test_baseline_rows_blank_solver_columns(self, tmp_path):
        out = str(tmp_path / "agd.csv")
        run_benchmark(self._spec(out, algo="agd", grad_tol=1e-5, max_iters=2000))
        lines = open(out).read().splitlines()
        cells = lines[1].split(",")
        assert cells[4] == "" and cells[5] == "" and cells[6] == ""
        assert cells[8] == ""

    def test_all_algorithms_dispatch(self, tmp_path):
        for algo in ("sarc", "saarc", "sacr", "cr", "acr", "agd", "sgd", "lbfgs"):
            res = run_benchmark(RunSpec(algo=algo, synth=(60, 3, 1, 1.0), lam=1e-4,
                                        x0_std=1.0, grad_tol=1e-5, max_iters=400))
            assert res.exit_code in (0, 2), (algo, res.status)
            assert res.trace, algo

    def test_benchmark_reg_scale_convention(self):
        # the harness objective uses (lam/2)||x||^2
        spec = self._spec(None)
        ds = synth_logistic(10, 3, 0, 1.0)
        model = build_model(ds, 2.0)
        x = np.ones(3)
        f_with = full_value(model, x)
        f_without = full_value(build_model(ds, 0.0), x)
        assert f_with - f_without == pytest.approx(0.5 * 2.0 * 3.0)
