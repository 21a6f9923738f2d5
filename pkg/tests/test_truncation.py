import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ntsgd.truncation import gradient_truncate, threshold_truncate
from truncation_oracle import check_invariants, exhaustive_keep_size


def test_worked_example():
    r = gradient_truncate([3.0, 1.0, 2.0, 0.5], 0.2)
    assert r.truncated.tolist() == [3.0, 0.0, 2.0, 0.0]
    assert r.residual.tolist() == [0.0, 1.0, 0.0, 0.5]
    assert r.threshold == 2.0
    assert r.sparsity == 0.5
    assert r.kept_energy_ratio == pytest.approx(13 / 14.25)


def test_small_cut_rate_example():
    r = gradient_truncate([3.0, 0.1], 0.01)
    assert r.truncated.tolist() == [3.0, 0.0]


def test_zero_cut_rate_keeps_every_nonzero():
    g = np.array([1.0, 1e-10, 0.0, -3.0, 1e-300])
    r = gradient_truncate(g, 0.0)
    assert r.kept_mask.tolist() == [True, True, False, True, True]
    assert np.array_equal(r.truncated, g)
    assert not r.residual.any()


def test_full_cut_rate_keeps_nothing():
    g = np.array([1.0, -2.0, 3.0])
    r = gradient_truncate(g, 1.0)
    assert not r.truncated.any()
    assert np.array_equal(r.residual, g)
    assert r.threshold is None
    assert r.sparsity == 1.0


def test_zero_gradient():
    r = gradient_truncate(np.zeros(4), 0.3)
    assert not r.truncated.any() and not r.residual.any()
    assert r.kept_energy_ratio == 1.0


def test_ties_broken_by_index():
    # four equal magnitudes, half the energy may go: keep the first two
    r = gradient_truncate([1.0, -1.0, 1.0, 1.0], 0.5)
    assert r.kept_mask.tolist() == [True, True, False, False]


@pytest.mark.parametrize("bad", [-0.1, 1.5, np.nan, np.inf])
def test_cut_rate_domain(bad):
    with pytest.raises(ValueError):
        gradient_truncate([1.0, 2.0], bad)


def test_nonfinite_gradient_rejected():
    with pytest.raises(ValueError, match="NaN"):
        gradient_truncate([1.0, np.nan], 0.1)
    with pytest.raises(ValueError):
        gradient_truncate([1.0, np.inf], 0.1)
    with pytest.raises(ValueError):
        gradient_truncate([], 0.1)


def test_huge_entries_do_not_overflow():
    r = gradient_truncate([1e200, 1e199, 1.0], 0.05)
    assert r.kept_mask.tolist() == [True, False, False]


def test_random_invariants():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        p = int(rng.integers(1, 513))
        g = rng.standard_normal(p) * np.exp(rng.uniform(-5, 5, p))
        e = float(rng.uniform())
        check_invariants(g, e, gradient_truncate(g, e))


def test_matches_exhaustive_oracle():
    rng = np.random.default_rng(1)
    for _ in range(300):
        p = int(rng.integers(1, 10))
        g = rng.standard_normal(p)
        if rng.uniform() < 0.3:
            g[rng.integers(p)] = 0.0
        e = float(rng.choice([0.0, 1.0, rng.uniform()]))
        r = gradient_truncate(g, e)
        k, _ = exhaustive_keep_size(g, e)
        assert r.n_kept == k


def test_monotone_in_cut_rate():
    rng = np.random.default_rng(2)
    for _ in range(200):
        g = rng.standard_normal(int(rng.integers(1, 100)))
        e1, e2 = sorted(rng.uniform(size=2))
        a, b = gradient_truncate(g, e1), gradient_truncate(g, e2)
        assert a.sparsity <= b.sparsity
        assert np.all(a.kept_mask[b.kept_mask])


@pytest.mark.parametrize("c", [-1.0, 2.0, 0.25, -1024.0])
def test_scale_equivariance(c):
    rng = np.random.default_rng(3)
    for _ in range(100):
        g = rng.standard_normal(int(rng.integers(1, 60)))
        e = float(rng.uniform())
        assert np.array_equal(gradient_truncate(c * g, e).kept_mask, gradient_truncate(g, e).kept_mask)


@settings(max_examples=300, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e6, 1e6, allow_nan=False).filter(
        lambda x: x == 0 or abs(x) > 1e-100)),
    st.floats(0.0, 1.0),
)
def test_property_invariants(g, e):
    check_invariants(g, e, gradient_truncate(g, e))


@settings(max_examples=150, deadline=None)
@given(arrays(np.float64, st.integers(1, 7), elements=st.sampled_from([0.0, 1.0, -1.0, 2.0, 0.5, -3.0])),
       st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0]))
def test_property_oracle_with_ties(g, e):
    r = gradient_truncate(g, e)
    k, _ = exhaustive_keep_size(g, e)
    assert r.n_kept == k
    check_invariants(g, e, r)
    # ties at the boundary go to the lower index
    mag = np.abs(g)
    if r.threshold is not None:
        at = np.flatnonzero(mag == r.threshold)
        kept_at = at[r.kept_mask[at]]
        assert kept_at.tolist() == at[: kept_at.size].tolist()


def test_threshold_mode():
    r = threshold_truncate([0.5, -2.0, 1e-4, 1e-3], 1e-3)
    assert r.kept_mask.tolist() == [True, True, False, True]
    assert r.threshold == 1e-3
    r = threshold_truncate([1e-5, 0.0], 1e-3)
    assert r.threshold is None and r.sparsity == 1.0
    with pytest.raises(ValueError):
        threshold_truncate([1.0], -1.0)
