import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_collection, scalar_form
from minplus_filter.errors import InvalidArgumentError, UnboundedBelowError
from minplus_filter.minplus import (
    MinQuadFunction,
    PruneConfig,
    eval_min,
    extract_estimate,
    global_min,
    in_set,
    lattice,
    prune,
    prune_exact,
    prune_topk,
    set_estimate,
)
from minplus_filter.quadform import from_initial_condition

SQ = scalar_form(1, 0, 0)  # x^2
SQ1 = scalar_form(1, -2, 1)  # (x-1)^2


def test_eval_min_examples_and_ties():
    # augmented matrices diag(1, 0) and [[1, -1], [-1, 1]]: values x^2/2 and (x-1)^2/2
    F = MinQuadFunction([scalar_form(0.5, 0, 0), scalar_form(0.5, -1, 0.5)])
    assert eval_min(F, 0.0) == (pytest.approx(0.0), 0)
    v, k = eval_min(F, 1.0)
    assert v == pytest.approx(0.0, abs=1e-15) and k == 1
    v, k = eval_min(F, 0.5)
    assert v == pytest.approx(0.125) and k == 0


def test_eval_min_matches_per_form(rng):
    F = random_collection(rng, 12, 2)
    for x in rng.normal(size=(50, 2)):
        vals = [0.5 * np.append(x, 1) @ m @ np.append(x, 1) for m in F.mats]
        v, k = eval_min(F, x)
        assert v == pytest.approx(min(vals), rel=1e-12) and k == int(np.argmin(vals))


def test_eval_min_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        eval_min(MinQuadFunction([SQ]), [1.0, 2.0])


def test_collection_must_be_nonempty():
    with pytest.raises(InvalidArgumentError):
        MinQuadFunction(np.empty((0, 2, 2)))
    with pytest.raises(InvalidArgumentError):
        MinQuadFunction.from_forms([])


# --- exact pruning ----------------------------------------------------------

def test_prune_exact_examples():
    out = prune_exact(MinQuadFunction([SQ, scalar_form(1, 0, 1)]))
    assert len(out) == 1 and np.allclose(out.mats[0], SQ)
    F = MinQuadFunction([SQ, SQ1])
    assert len(prune_exact(F)) == 2


def test_prune_exact_keeps_first_duplicate():
    F = MinQuadFunction([SQ1, SQ, SQ, SQ1])
    out = prune_exact(F)
    assert len(out) == 2
    assert np.allclose(out.mats[0], SQ1) and np.allclose(out.mats[1], SQ)


def test_prune_exact_duplication_oracle(rng):
    base = random_collection(rng, 50, 2)
    shifted = base.mats.copy()
    shifted[:, -1, -1] += 2.0  # +1 in value
    F = MinQuadFunction(np.concatenate([base.mats, shifted])[rng.permutation(100)])
    out = prune_exact(F)
    assert len(out) <= 50
    # every survivor is one of the originals
    for m in out.mats:
        assert any(np.allclose(m, b) for b in base.mats)
    pts = rng.uniform(-4, 4, size=(100, 2))
    assert np.max(np.abs(out(pts) - F(pts))) <= 1e-12


def test_prune_exact_idempotent(rng):
    F = random_collection(rng, 40, 2)
    once = prune_exact(F)
    twice = prune_exact(once)
    assert np.array_equal(once.mats, twice.mats)


# --- top-K pruning ------------------------------------------------------------

def test_prune_topk_examples():
    F = MinQuadFunction([SQ, scalar_form(1, 0, 5), scalar_form(1, -20, 100)])
    cfg = PruneConfig(1, lattice(-1, 1, 21))
    out = prune_topk(F, cfg)
    assert len(out) == 1 and np.allclose(out.mats[0], SQ)
    assert prune_topk(F, PruneConfig(3, lattice(-1, 1, 21))) is F


def test_prune_topk_secondary_key():
    # neither form wins anywhere on the grid except via ties; excess decides
    far = scalar_form(1, 0, 3)
    near = scalar_form(1, 0, 1)
    F = MinQuadFunction([SQ, far, near])
    out = prune_topk(F, PruneConfig(2, lattice(-1, 1, 5)))
    assert np.allclose(out.mats, [SQ, near])


def test_prune_topk_monotone_and_exact_on_kept_winners(rng):
    F = random_collection(rng, 100, 2)
    grid = lattice([-3, -3], [3, 3], 15)
    out = prune_topk(F, PruneConfig(20, grid))
    assert len(out) == 20
    pts = rng.uniform(-4, 4, size=(1000, 2))
    assert np.all(out(pts) >= F(pts) - 1e-12)
    kept = {m.tobytes() for m in out.mats}
    for x in grid:
        v, k = eval_min(F, x)
        if F.mats[k].tobytes() in kept:
            assert eval_min(out, x)[0] == pytest.approx(v, abs=1e-12)


def test_prune_requires_grid():
    F = MinQuadFunction([SQ, SQ1])
    with pytest.raises(InvalidArgumentError):
        prune_topk(F, PruneConfig(1))


def test_prune_pipeline_caps(rng):
    F = random_collection(rng, 60, 2)
    out = prune(F, PruneConfig(10, lattice([-3, -3], [3, 3], 11)))
    assert len(out) <= 10


# --- extraction -------------------------------------------------------------

def test_global_min_examples():
    F = MinQuadFunction([SQ1, scalar_form(1, -6, 9.5)])
    x, k, v = global_min(F)
    assert x == pytest.approx([1.0]) and k == 0 and v == pytest.approx(0.0, abs=1e-15)
    x, k, v = global_min(MinQuadFunction([scalar_form(2, -4, 5)]))
    assert x == pytest.approx([1.0]) and v == pytest.approx(3.0)


def test_global_min_grid_search(rng):
    g = np.linspace(-5, 5, 401)
    pts = lattice([-5, -5], [5, 5], 401)
    for _ in range(5):
        F = random_collection(rng, 8, 2)
        x, k, v = global_min(F)
        vals = F(pts)
        assert v <= vals.min() + 1e-12
        assert np.all(np.abs(x - pts[vals.argmin()]) <= 2 * (g[1] - g[0]))
        assert eval_min(F, x)[0] == pytest.approx(v, abs=1e-12)


def test_global_min_unbounded_reports_index():
    F = MinQuadFunction([SQ, scalar_form(-1, 0, 0)])
    with pytest.raises(UnboundedBelowError) as err:
        global_min(F)
    assert err.value.index == 1


def test_extract_estimate_examples():
    x, Pi, phihat = extract_estimate(MinQuadFunction([[[2.0, -2.0], [-2.0, 4.0]]]))
    assert x == pytest.approx([1.0]) and np.allclose(Pi, [[2.0]]) and phihat == pytest.approx(2.0)
    N0 = np.array([[2.0, 0.5], [0.5, 1.0]])
    xbar = np.array([0.3, -1.0])
    x, Pi, phihat = extract_estimate(MinQuadFunction(from_initial_condition(N0, xbar, 0.0).mat))
    assert np.allclose(x, xbar) and np.allclose(Pi, N0) and phihat == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_argmin_scaling_invariance(seed, alpha):
    F = random_collection(np.random.default_rng(seed), 6, 2)
    x, k, _ = global_min(F)
    xs, ks, _ = global_min(MinQuadFunction(alpha * F.mats))
    assert ks == k and np.allclose(xs, x, atol=1e-9)


# --- set estimates ------------------------------------------------------------

def test_set_estimate_single_interval():
    ells = set_estimate(MinQuadFunction([SQ1]), 0.5)
    assert len(ells) == 1
    e = ells[0]
    half = np.sqrt(2 * e.level / e.shape[0, 0])
    assert e.center[0] - half == pytest.approx(1 - np.sqrt(0.5))
    assert e.center[0] + half == pytest.approx(1 + np.sqrt(0.5))


def test_set_estimate_empty():
    F = MinQuadFunction([scalar_form(1, 0, 2), scalar_form(1, -2, 3)])
    assert set_estimate(F, 1.0) == []


def test_set_estimate_membership(rng):
    F = random_collection(rng, 10, 2)
    d = global_min(F)[2] + 2.0
    ells = set_estimate(F, d)
    for x in rng.uniform(-5, 5, size=(1000, 2)):
        v = eval_min(F, x)[0]
        if abs(v - d) > 1e-9:
            assert in_set(ells, x) == (v <= d)
