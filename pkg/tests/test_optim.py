import math

import numpy as np
import pytest

from ntsgd.datasets import Dataset, synth_blobs
from ntsgd.numerics import RngState, sym_eigvals
from ntsgd.objectives import LogisticObjective, SaddleObjective, SaddleSpec
from ntsgd.optim import OptimizerConfig, StepSchedule, ntsgd_step, run, sgd_step, tsgd_step


@pytest.fixture(scope="module")
def logistic():
    return LogisticObjective(synth_blobs(RngState(2024), 200, 5, 2.0))


class FullBatch:
    """Deterministic gradient descent view of an objective."""

    def __init__(self, obj):
        self.obj, self.dim, self.n_samples = obj, obj.dim, 0

    def loss(self, w, idx=None):
        return self.obj.loss(w)

    def grad(self, w, idx=None):
        return self.obj.grad(w)


# --- schedules and config ----------------------------------------------------


def test_schedules():
    assert StepSchedule.constant(0.1)(7, 100) == 0.1
    assert StepSchedule.inv_sqrt_t(2.0)(7, 100) == 0.2
    assert StepSchedule.inv_t(1.0)(4) == 0.25
    with pytest.raises(ValueError):
        StepSchedule.inv_t(1.0)(0)
    with pytest.raises(ValueError):
        StepSchedule("cosine", 1.0)
    with pytest.raises(ValueError):
        StepSchedule.constant(0.0)


@pytest.mark.parametrize("field,value", [("cut_rate", 1.1), ("sigma", -1.0), ("beta", 0.6),
                                         ("batch_size", 0), ("horizon", -1), ("record_every", 0)])
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        OptimizerConfig(**{field: value})


def test_config_defaults():
    cfg = OptimizerConfig()
    assert (cfg.cut_rate, cfg.sigma, cfg.beta, cfg.batch_size) == (0.1, 1e-3, 0.0, 100)
    assert cfg.schedule == StepSchedule.constant(0.1)
    assert cfg.as_dict()["lr"] == 0.1


# --- single steps ------------------------------------------------------------


def test_plain_step_matches_sgd():
    w, g = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.0, -4.0])
    cfg = OptimizerConfig(cut_rate=0.0, sigma=0.0)
    w2, _ = ntsgd_step(w, g, 0.1, cfg)
    assert np.array_equal(w2, sgd_step(w, g, 0.1))


def test_noise_hook_example():
    cfg = OptimizerConfig(cut_rate=0.0, beta=0.0)
    w2, _ = ntsgd_step([0.0], [2.0], 0.1, cfg, noise=[1.0])
    assert w2[0] == pytest.approx(-0.2 + math.sqrt(0.1), abs=1e-15)
    assert w2[0] == pytest.approx(0.1162278, abs=1e-7)
    w2, _ = ntsgd_step([0.0], [2.0], 0.1, cfg.replace(beta=0.5), noise=[1.0])
    assert w2[0] == pytest.approx(-0.1, abs=1e-15)


def test_tsgd_examples():
    w, g = np.array([1.0, 1.0]), np.array([3.0, 0.1])
    w2, r = tsgd_step(w, g, 0.5, 0.01)
    assert w2.tolist() == [-0.5, 1.0]
    assert r.truncated.tolist() == [3.0, 0.0]
    assert np.array_equal(tsgd_step(w, g, 0.5, 1.0)[0], w)
    assert np.array_equal(tsgd_step(w, g, 0.5, 0.0)[0], w - 0.5 * g)


def test_step_errors():
    cfg = OptimizerConfig(sigma=0.0)
    with pytest.raises(ValueError):
        ntsgd_step(np.zeros(2), np.zeros(3), 0.1, cfg)
    with pytest.raises(ValueError):
        ntsgd_step(np.zeros(2), np.zeros(2), 0.0, cfg)
    with pytest.raises(ValueError):
        ntsgd_step(np.zeros(2), np.zeros(2), 0.1, cfg.replace(sigma=1.0))


def test_update_identity():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = int(rng.integers(1, 50))
        w, g, b = rng.standard_normal((3, p))
        eta = float(rng.uniform(1e-3, 1))
        cfg = OptimizerConfig(cut_rate=float(rng.uniform()), beta=float(rng.uniform(0, 0.5)))
        w2, r = ntsgd_step(w, g, eta, cfg, noise=b)
        assert np.allclose(w2 - (w - eta * r.truncated), eta ** (0.5 + cfg.beta) * b, rtol=0, atol=1e-14)


def test_noise_draw_is_seeded():
    cfg = OptimizerConfig(cut_rate=0.0, sigma=0.5)
    a, _ = ntsgd_step(np.zeros(4), np.zeros(4), 0.04, cfg, RngState(1).split("noise"))
    b, _ = ntsgd_step(np.zeros(4), np.zeros(4), 0.04, cfg, RngState(1).split("noise"))
    assert np.array_equal(a, b)
    want = 0.2 * 0.5 * RngState(1).split("noise").standard_normal(4)
    assert np.allclose(a, want, rtol=1e-15, atol=0)


# --- runs --------------------------------------------------------------------


def test_zero_horizon(logistic):
    w0 = np.arange(5.0)
    rec = run(logistic, w0, OptimizerConfig(horizon=0))
    assert np.array_equal(rec.final, w0) and np.array_equal(rec.sampled, w0)
    assert rec.iterations.size == 0 and rec.loss.size == 0
    assert rec.status == "ok"


def test_vanilla_equivalence(logistic):
    cfg = OptimizerConfig(cut_rate=0.0, sigma=0.0, schedule=StepSchedule.constant(0.1), batch_size=10,
                          horizon=1000, seed=3, record_every=1)
    rec = run(logistic, np.zeros(5), cfg, keep_iterates=True)
    batches = RngState(3).split("batch")
    w = np.zeros(5)
    ref = [w]
    for _ in range(1000):
        w = w - 0.1 * logistic.grad(w, batches.integers(200, 10))
        ref.append(w)
    assert np.array_equal(rec.iterates, np.array(ref))
    assert np.array_equal(rec.final, w)


def test_degenerate_closure(logistic):
    w0 = np.array([0.5, -1.0, 2.0, 0.0, 3.0])
    cfg = OptimizerConfig(cut_rate=1.0, sigma=0.0, horizon=200, record_every=1)
    rec = run(logistic, w0, cfg, keep_iterates=True)
    assert all(np.array_equal(w, w0) for w in rec.iterates)
    assert np.all(rec.sparsity[:-1] == 1.0)


def test_sparsity_telemetry(logistic):
    cfg = OptimizerConfig(cut_rate=0.3, sigma=1e-3, horizon=50, record_every=1, batch_size=7)
    rec = run(logistic, np.zeros(5), cfg, trace_indices=True, keep_iterates=True)
    from ntsgd.truncation import gradient_truncate

    for t in range(50):
        g = logistic.grad(rec.iterates[t], rec.batch_indices[t])
        r = gradient_truncate(g, 0.3)
        assert rec.sparsity[t] == 1.0 - r.n_kept / 5
        assert rec.kappa[t] == r.threshold


def test_run_determinism(logistic):
    cfg = OptimizerConfig(cut_rate=0.2, sigma=1e-2, horizon=300, seed=11, batch_size=5)
    a, b = run(logistic, np.zeros(5), cfg), run(logistic, np.zeros(5), cfg)
    assert np.array_equal(a.final, b.final) and np.array_equal(a.sampled, b.sampled)
    for col in ("loss", "grad_norm", "sparsity", "kappa", "w_norm"):
        assert np.array_equal(getattr(a, col), getattr(b, col), equal_nan=True)
    assert a.sample_index == b.sample_index
    c = run(logistic, np.zeros(5), cfg.replace(seed=12))
    assert not np.array_equal(a.final, c.final)


def test_record_layout(logistic):
    cfg = OptimizerConfig(horizon=250, record_every=100)
    rec = run(logistic, np.zeros(5), cfg)
    assert rec.iterations.tolist() == [0, 100, 200, 250]
    assert math.isnan(rec.sparsity[-1]) and math.isnan(rec.kappa[-1])
    assert np.all(np.diff(rec.iterations) > 0)
    assert 1 <= rec.sample_index <= 250
    assert list(rec.rows())[0][0] == 0


def test_sampled_iterate_is_w_J(logistic):
    cfg = OptimizerConfig(horizon=40, record_every=1, seed=5)
    rec = run(logistic, np.zeros(5), cfg, keep_iterates=True)
    assert np.array_equal(rec.sampled, rec.iterates[rec.sample_index])


def test_sample_index_is_uniform():
    obj = SaddleObjective(SaddleSpec.standard(2))
    cfg = OptimizerConfig(sigma=0.0, horizon=5, record_every=5)
    counts = np.bincount([run(obj, np.zeros(2), cfg.replace(seed=s)).sample_index for s in range(2000)],
                         minlength=6)
    assert counts[0] == 0
    assert np.all(np.abs(counts[1:] - 400) < 80)


def test_descent_on_convex_objective(logistic):
    H = logistic.X.T @ logistic.X / (4 * logistic.n_samples)
    L = float(sym_eigvals(H)[-1])
    cfg = OptimizerConfig(cut_rate=0.0, sigma=0.0, schedule=StepSchedule.constant(1.0 / L), horizon=500,
                          record_every=10)
    rec = run(FullBatch(logistic), np.zeros(5), cfg)
    assert np.all(np.diff(rec.loss) <= 1e-12)


def test_truncated_matches_vanilla_loss(logistic):
    base = OptimizerConfig(cut_rate=0.0, sigma=0.0, schedule=StepSchedule.constant(0.1), horizon=5000,
                           record_every=1000)
    ref = run(logistic, np.zeros(5), base)
    tr = run(logistic, np.zeros(5), base.replace(cut_rate=0.2, sigma=1e-3))
    assert abs(tr.loss[-1] - ref.loss[-1]) <= 0.05 * ref.loss[-1]


def test_divergence_flagged():
    obj = SaddleObjective(SaddleSpec.standard(3))
    cfg = OptimizerConfig(cut_rate=0.0, sigma=0.0, schedule=StepSchedule.constant(10.0), horizon=100)
    rec = run(obj, np.ones(3), cfg)
    assert rec.status == "diverged" and rec.diverged


def test_fixed_threshold_mode():
    data = Dataset(np.array([[1.0, 1e-4]]), [1])
    obj = LogisticObjective(data)
    cfg = OptimizerConfig(sigma=0.0, fixed_threshold=1e-3, horizon=1, record_every=1, batch_size=1)
    rec = run(obj, np.zeros(2), cfg)
    assert rec.final[1] == 0.0 and rec.final[0] > 0


def test_initial_point_shape_checked(logistic):
    with pytest.raises(ValueError):
        run(logistic, np.zeros(3), OptimizerConfig())
