import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minplus_filter.errors import InvalidArgumentError, InvalidModelError, UnboundedBelowError
from minplus_filter.quadform import (
    QuadraticForm,
    dominates,
    evaluate,
    from_initial_condition,
    minimizer,
    sublevel_ellipsoid,
)


def random_spd(rng, n, lo=0.5):
    M = rng.normal(size=(n, n))
    return M @ M.T + lo * np.eye(n)


def random_form(rng, n, spd=True):
    N = random_spd(rng, n) if spd else rng.normal(size=(n, n))
    L = rng.normal(size=n)
    return QuadraticForm.from_blocks(N, L, rng.normal())


# --- evaluate -------------------------------------------------------------

def test_evaluate_examples():
    assert evaluate(QuadraticForm([[2, 0], [0, 0]]), 3.0) == pytest.approx(9.0)
    assert evaluate(QuadraticForm([[2, -2], [-2, 2]]), 1.0) == pytest.approx(0.0)


def test_evaluate_matches_triple_product():
    rng = np.random.default_rng(1)
    raw = rng.normal(size=(4, 4))
    sym = 0.5 * (raw + raw.T)
    q = QuadraticForm(sym)
    for _ in range(20):
        x = rng.normal(size=3)
        z = np.concatenate([x, [1.0]])
        oracle = 0.5 * sum(z[i] * sym[i, j] * z[j] for i in range(4) for j in range(4))
        assert abs(evaluate(q, x) - oracle) <= 1e-12 * max(1.0, abs(oracle))


def test_block_reading_consistent():
    rng = np.random.default_rng(2)
    q = random_form(rng, 3, spd=False)
    x = rng.normal(size=3)
    direct = 0.5 * (x @ q.N @ x + 2 * q.L @ x + q.phi)
    assert evaluate(q, x) == pytest.approx(direct, rel=1e-12)


def test_construction_symmetrizes_and_evaluate_invariant():
    rng = np.random.default_rng(3)
    raw = rng.normal(size=(3, 3))
    q = QuadraticForm(raw)
    assert np.allclose(q.mat, q.mat.T)
    x = rng.normal(size=2)
    z = np.append(x, 1.0)
    assert evaluate(q, x) == pytest.approx(0.5 * z @ raw @ z, rel=1e-12)


def test_evaluate_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        evaluate(QuadraticForm(np.eye(3)), [1.0, 2.0, 3.0])


# --- from_initial_condition -----------------------------------------------

def test_initial_condition_examples():
    q = from_initial_condition([[2.0]], [1.0], 0.0)
    assert np.allclose(q.mat, [[2, -2], [-2, 2]])
    q = from_initial_condition(np.eye(2), [0, 0], 0.0)
    assert np.allclose(q.mat, np.diag([1.0, 1.0, 0.0]))


def test_initial_condition_at_nominal():
    rng = np.random.default_rng(4)
    for _ in range(10):
        N0 = random_spd(rng, 3)
        xbar = rng.normal(size=3)
        phi0 = rng.uniform(0, 5)
        q = from_initial_condition(N0, xbar, phi0)
        assert evaluate(q, xbar) == pytest.approx(0.5 * phi0, abs=1e-12)
        x = rng.normal(size=3)
        assert evaluate(q, x) == pytest.approx(0.5 * ((x - xbar) @ N0 @ (x - xbar) + phi0), rel=1e-12)


@pytest.mark.parametrize("N0", [[[0.0]], [[1.0, 0.0], [0.0, -1.0]], [[1.0, 2.0], [0.0, 1.0]]])
def test_initial_condition_rejects_bad_weight(N0):
    with pytest.raises(InvalidModelError):
        from_initial_condition(N0, np.zeros(len(N0)), 0.0)


# --- minimizer ------------------------------------------------------------

def test_minimizer_examples():
    x, v = minimizer(QuadraticForm([[2, -2], [-2, 2]]))
    assert x == pytest.approx([1.0]) and v == pytest.approx(0.0, abs=1e-15)
    x, v = minimizer(QuadraticForm(np.diag([1.0, 1.0, 0.0])))
    assert np.allclose(x, 0.0) and v == pytest.approx(0.0)


def test_minimizer_matches_grid_search():
    rng = np.random.default_rng(5)
    g = np.linspace(-5, 5, 401)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    for _ in range(10):
        N = random_spd(rng, 2)
        center = rng.uniform(-3, 3, size=2)
        q = QuadraticForm.from_blocks(N, -N @ center, center @ N @ center + rng.normal())
        z = np.hstack([pts, np.ones((len(pts), 1))])
        vals = 0.5 * np.einsum("pi,ij,pj->p", z, q.mat, z)
        x, v = minimizer(q)
        assert np.all(np.abs(x - pts[vals.argmin()]) <= g[1] - g[0])
        assert v <= vals.min() + 1e-12


def test_minimizer_optimal_under_perturbation():
    rng = np.random.default_rng(6)
    q = random_form(rng, 3)
    x, v = minimizer(q)
    for d in rng.normal(size=(1000, 3)):
        assert evaluate(q, x + d) >= v - 1e-12


def test_minimizer_unbounded():
    with pytest.raises(UnboundedBelowError) as err:
        minimizer(QuadraticForm([[-1.0, 0.0], [0.0, 0.0]]))
    assert err.value.eigenvalue == pytest.approx(-1.0)
    with pytest.raises(UnboundedBelowError):
        minimizer(QuadraticForm(np.diag([1.0, 0.0, 0.0])))


# --- dominates ------------------------------------------------------------

def test_dominates_examples():
    assert dominates(QuadraticForm([[2, 0], [0, 2]]), QuadraticForm([[2, 0], [0, 0]]))
    x2 = QuadraticForm([[2, 0], [0, 0]])
    shifted = QuadraticForm([[2, -2], [-2, 2]])
    assert not dominates(x2, shifted)
    assert not dominates(shifted, x2)


def test_dominates_null_direction_with_tilt():
    # difference is linear in x: never one-signed
    assert not dominates(QuadraticForm([[1, 1], [1, 0]]), QuadraticForm([[1, 0], [0, 0]]))
    # difference is a positive constant on a degenerate direction
    a = QuadraticForm(np.diag([1.0, 0.0, 3.0]))
    b = QuadraticForm(np.diag([1.0, 0.0, 1.0]))
    assert dominates(a, b) and not dominates(b, a)


def _sampled_dominates(qa, qb, rng, n):
    pts = rng.uniform(-10, 10, size=(20000, n))
    z = np.hstack([pts, np.ones((len(pts), 1))])
    diff = 0.5 * np.einsum("pi,ij,pj->p", z, qa.mat - qb.mat, z)
    return bool(diff.min() >= -1e-9)


def test_dominates_agrees_with_sampling():
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(100):
        qa = random_form(rng, 2)
        # build a mix of dominating and crossing pairs
        if rng.uniform() < 0.5:
            extra = random_spd(rng, 3, lo=0.0) * rng.uniform(0, 1)
            qb = QuadraticForm(qa.mat - extra)
        else:
            qb = random_form(rng, 2)
        exact = dominates(qa, qb)
        sampled = _sampled_dominates(qa, qb, rng, 2)
        if exact:
            assert sampled
        agree += exact == sampled
    # sampling can only miss violations that occur outside the box
    assert agree >= 95


def test_dominance_preorder():
    rng = np.random.default_rng(8)
    for _ in range(50):
        q = random_form(rng, 2)
        assert dominates(q, q)
    for _ in range(50):
        c = random_form(rng, 2)
        b = QuadraticForm(c.mat + random_spd(rng, 3, lo=0.0))
        a = QuadraticForm(b.mat + random_spd(rng, 3, lo=0.0))
        assert dominates(a, b) and dominates(b, c) and dominates(a, c)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.0, 5.0))
def test_dominance_offset_property(coeffs, shift):
    a, b, c, _ = coeffs
    q = QuadraticForm([[abs(a) + 0.1, b], [b, c]])
    up = QuadraticForm(q.mat + np.diag([0.0, 2 * shift]))
    assert dominates(up, q)


# --- sublevel_ellipsoid ---------------------------------------------------

def test_sublevel_examples():
    e = sublevel_ellipsoid(QuadraticForm([[2, -2], [-2, 2]]), 0.5)
    assert e.center == pytest.approx([1.0])
    assert np.allclose(e.shape, [[2.0]])
    assert e.level == pytest.approx(0.5)
    assert not e.empty
    half = e.semi_axes()[0][0]
    assert half == pytest.approx(np.sqrt(0.5))
    e = sublevel_ellipsoid(QuadraticForm([[2, -2], [-2, 4]]), 0.5)  # vmin = 1
    assert e.empty


def test_sublevel_boundary_sampling():
    rng = np.random.default_rng(9)
    for _ in range(20):
        q = random_form(rng, 3)
        _, vmin = minimizer(q)
        d = vmin + 1.0
        e = sublevel_ellipsoid(q, d)
        lam, vec = np.linalg.eigh(e.shape)
        for u in rng.normal(size=(50, 3)):
            u /= np.sqrt(0.5 * u @ e.shape @ u)
            x = e.center + np.sqrt(e.level) * u
            assert abs(evaluate(q, x) - d) <= 1e-9 * max(1.0, abs(d))
