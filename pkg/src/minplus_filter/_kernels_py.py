"""Numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is not importable.  Signatures
match the Cython module exactly; ``threads`` is accepted and ignored.
"""

import numpy as np

BACKEND = "python"


def eval_forms(mats, pts, threads=0):
    """Values of every form at every point, shape ``(K, P)``."""
    mats = np.ascontiguousarray(mats, dtype=float)
    pts = np.ascontiguousarray(pts, dtype=float)
    z = np.hstack([pts, np.ones((pts.shape[0], 1))])
    mz = np.tensordot(mats, z, axes=([2], [1]))  # (K, m, P)
    return 0.5 * np.einsum("kmp,pm->kp", mz, z)


def min_stats(mats, pts, threads=0):
    """Pointwise minimum and per-form ranking statistics.

    Returns ``(vmin, argmin, wins, excess)``: minimum value and lowest
    attaining index per point, number of points each form attains, and the
    summed excess of each form over the minimum.
    """
    vals = eval_forms(mats, pts)
    arg = np.argmin(vals, axis=0)
    vmin = vals[arg, np.arange(vals.shape[1])]
    wins = np.bincount(arg, minlength=vals.shape[0]).astype(np.int64)
    excess = (vals - vmin[None, :]).sum(axis=1)
    return vmin, arg.astype(np.int64), wins, excess


def _interp(values, lo, h, counts, z, penalty):
    """Multilinear interpolation on a regular grid, ``penalty`` outside it."""
    n = z.shape[-1]
    shape = z.shape[:-1]
    idx = (z - lo) / h
    upper = counts - 1
    eps = 1e-9
    outside = np.any((idx < -eps) | (idx > upper + eps), axis=-1)
    idx = np.clip(idx, 0.0, upper)
    i0 = np.minimum(np.floor(idx).astype(np.int64), upper - 1)
    t = idx - i0
    grid = values.reshape(tuple(int(c) for c in counts))
    out = np.zeros(shape)
    for corner in range(1 << n):
        weight = np.ones(shape)
        index = []
        for d in range(n):
            bit = (corner >> d) & 1
            weight = weight * (t[..., d] if bit else 1.0 - t[..., d])
            index.append(i0[..., d] + bit)
        out += weight * grid[tuple(index)]
    out[outside] = penalty
    return out


def dp_sweep(values, lo, h, counts, pts, A, a, b, w, wcost, penalty, threads=0):
    """``min_w interp(values, A x + a + b w) + wcost[w]`` for each grid point.

    ``values`` is the flattened (C order) value table on the regular grid
    described by ``lo``, ``h`` and ``counts``; ``b`` is the single
    disturbance column.
    """
    values = np.asarray(values, dtype=float)
    lo = np.asarray(lo, dtype=float)
    h = np.asarray(h, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    base = pts @ np.asarray(A, dtype=float).T + np.asarray(a, dtype=float)
    z = base[:, None, :] + np.asarray(w, dtype=float)[None, :, None] * np.asarray(b, dtype=float)
    total = _interp(values, lo, h, counts, z, penalty) + np.asarray(wcost, dtype=float)[None, :]
    return total.min(axis=1)
