import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_collection
from minplus_filter import kernels
from minplus_filter.minplus import lattice

BACKENDS = kernels.available_backends()
needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def reference_values(mats, pts):
    z = np.hstack([pts, np.ones((len(pts), 1))])
    return 0.5 * np.einsum("pi,kij,pj->kp", z, mats, z)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_eval_forms_matches_einsum(name):
    rng = np.random.default_rng(30)
    F = random_collection(rng, 17, 3)
    pts = rng.normal(size=(123, 3))
    got = BACKENDS[name].eval_forms(F.mats, pts, 0)
    assert np.allclose(got, reference_values(F.mats, pts), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_min_stats_semantics(name):
    rng = np.random.default_rng(31)
    F = random_collection(rng, 9, 2)
    pts = rng.normal(size=(300, 2))
    vmin, arg, wins, excess = BACKENDS[name].min_stats(F.mats, pts, 0)
    vals = reference_values(F.mats, pts)
    assert np.allclose(vmin, vals.min(axis=0), rtol=1e-13, atol=1e-13)
    assert np.array_equal(arg, vals.argmin(axis=0))
    assert np.array_equal(wins, np.bincount(vals.argmin(axis=0), minlength=9))
    assert np.allclose(excess, (vals - vals.min(axis=0)).sum(axis=1), rtol=1e-10, atol=1e-10)


def test_min_stats_ties_go_to_lowest_index():
    mats = np.stack([np.diag([2.0, 0.0]), np.diag([2.0, 0.0])])
    for mod in BACKENDS.values():
        _, arg, wins, _ = mod.min_stats(mats, np.array([[0.5], [1.0]]), 0)
        assert np.array_equal(arg, [0, 0]) and np.array_equal(wins, [2, 0])


@needs_compiled
def test_backends_agree():
    rng = np.random.default_rng(32)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    F = random_collection(rng, 40, 2)
    pts = lattice([-3, -3], [3, 3], 31)
    for a, b in zip(py.min_stats(F.mats, pts, 0), cy.min_stats(F.mats, pts, 0)):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
    assert np.allclose(py.eval_forms(F.mats, pts, 0), cy.eval_forms(F.mats, pts, 2), rtol=1e-13, atol=1e-13)


@needs_compiled
@pytest.mark.parametrize("n", [1, 2])
def test_dp_sweep_backends_agree(n):
    rng = np.random.default_rng(33 + n)
    count = 41 if n == 1 else 21
    lo, hi = -np.ones(n), np.ones(n)
    pts = lattice(lo, hi, count)
    h = (hi - lo) / (count - 1)
    counts = np.full(n, count, dtype=np.int64)
    values = (pts**2).sum(axis=1) + 0.1 * rng.normal(size=len(pts))
    A = np.eye(n) + 0.1 * rng.normal(size=(n, n))
    a = 0.05 * rng.normal(size=n)
    b = rng.normal(size=n) * 0.2
    w = np.linspace(-2, 2, 21)
    wcost = 0.5 * w**2
    args = (values, lo, h, counts, pts, A, a, b, w, wcost, 1e9)
    ref = BACKENDS["python"].dp_sweep(*args, 0)
    got = BACKENDS["cython"].dp_sweep(*args, 0)
    assert np.allclose(ref, got, rtol=1e-12, atol=1e-12)


def test_dp_sweep_penalizes_leaving_the_grid():
    mod = BACKENDS["python"]
    pts = lattice(-1, 1, 5)
    out = mod.dp_sweep(np.zeros(5), np.array([-1.0]), np.array([0.5]), np.array([5]), pts,
                       np.array([[3.0]]), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), 1e9, 0)
    # x = +-1 maps to +-3, outside the box; the middle point maps to 0
    assert out[0] == 1e9 and out[-1] == 1e9 and out[2] == 0.0


def test_forced_python_backend():
    env = dict(os.environ, MINPLUS_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "from minplus_filter import kernels; print(kernels.backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_use_backend_switches_and_restores():
    before = kernels.backend()
    previous = kernels.use_backend("python")
    try:
        assert previous == before and kernels.backend() == "python"
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")
    finally:
        kernels.use_backend(before)
    assert kernels.backend() == before
