"""Independent reference solutions used to check the min-plus filter.

* :func:`grid_dp` evaluates the dynamic programming recursion by brute force
  on a state grid with the true output nonlinearity.
* :func:`information_filter` propagates ``(xhat, Pi)`` of a single quadratic
  in covariance form, valid when the output is linear.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import InvalidArgumentError
from .minplus import lattice
from .model import ReverseDynamics, SqcBudget

#: Value assigned to reverse states that leave the grid.
OUT_OF_GRID = 1e9


@dataclass(frozen=True, eq=False)
class GridSpec:
    lo: np.ndarray
    hi: np.ndarray
    points_per_dim: int
    w_lo: np.ndarray
    w_hi: np.ndarray
    w_points: int

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        w_lo = np.atleast_1d(np.asarray(self.w_lo, dtype=float))
        w_hi = np.atleast_1d(np.asarray(self.w_hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise InvalidArgumentError("state box needs lo < hi componentwise")
        if w_lo.shape != w_hi.shape or np.any(w_lo >= w_hi):
            raise InvalidArgumentError("disturbance box needs w_lo < w_hi componentwise")
        for name, count in (("points_per_dim", self.points_per_dim), ("w_points", self.w_points)):
            if int(count) < 3 or int(count) % 2 == 0:
                raise InvalidArgumentError(f"{name} must be odd and at least 3")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "w_lo", w_lo)
        object.__setattr__(self, "w_hi", w_hi)

    @property
    def n(self):
        return self.lo.size

    def axes(self):
        return [np.linspace(a, b, self.points_per_dim) for a, b in zip(self.lo, self.hi)]

    def points(self):
        return lattice(self.lo, self.hi, self.points_per_dim)

    def w_values(self):
        return np.linspace(self.w_lo[0], self.w_hi[0], self.w_points)


def grid_dp(
    budget: SqcBudget,
    dyn: ReverseDynamics,
    output: Callable,
    s,
    R: float,
    measurements: Sequence[float],
    grid: GridSpec,
):
    """Brute-force value functions on the grid, one array per time step.

    ``output`` is the exact scalar nonlinearity ``c(theta)`` (vectorised).
    Returns ``T+1`` arrays of shape ``(points_per_dim,) * n``, starting with
    the initial cost.
    """
    n, p = dyn.n, dyn.p
    if n > 2 or p > 1:
        raise InvalidArgumentError("grid_dp is limited to n <= 2 and p <= 1")
    if grid.n != n:
        raise InvalidArgumentError("grid and dynamics dimensions differ")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    pts = grid.points()
    shape = (grid.points_per_dim,) * n
    dx = pts - budget.xbar0
    V = 0.5 * np.einsum("pi,ij,pj->p", dx, budget.N0, dx)
    out = [V.reshape(shape)]

    h = (grid.hi - grid.lo) / (grid.points_per_dim - 1)
    counts = np.full(n, grid.points_per_dim, dtype=np.int64)
    w = grid.w_values()
    wcost = 0.5 * dyn.Qeta[0, 0] * w**2
    theta = pts @ s
    for y in measurements:
        prop = kernels.dp_sweep(V, grid.lo, h, counts, pts, dyn.A, dyn.a, dyn.B[:, 0], w, wcost, OUT_OF_GRID)
        V = prop + 0.5 * R * (float(y) - output(theta)) ** 2
        out.append(V.reshape(shape))
    return out


def write_values_csv(path, grid: GridSpec, values):
    """``x_1..x_n, V`` rows for one value array."""
    pts = grid.points()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x_{i + 1}" for i in range(grid.n)] + ["V"])
        for x, v in zip(pts, np.asarray(values).ravel()):
            w.writerow([repr(float(c)) for c in x] + [repr(float(v))])


def information_filter(dyn: ReverseDynamics, s, R: float, budget: SqcBudget, measurements: Sequence[float]):
    """Closed-form ``(xhat, Pi)`` recursion for a linear output ``y = s^T x + v``.

    Prediction runs in covariance form: with ``P = Pi^{-1}`` the reverse
    model ``x_k = A x_{k+1} + a + B w`` gives
    ``P' = A^{-1} (P + B Qeta^{-1} B^T) A^{-T}`` and ``xhat' = A^{-1} (xhat - a)``.
    The update adds ``R s s^T`` to the precision.

    Returns ``[(xhat_0, Pi_0), (xhat_1, Pi_1), ...]`` including the initial pair.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    Ainv = np.linalg.inv(dyn.A)
    spread = dyn.B @ np.linalg.solve(dyn.Qeta, dyn.B.T)
    xhat = budget.xbar0.copy()
    Pi = budget.N0.copy()
    out = [(xhat.copy(), Pi.copy())]
    for y in measurements:
        P = Ainv @ (np.linalg.inv(Pi) + spread) @ Ainv.T
        xpred = Ainv @ (xhat - dyn.a)
        Pi_pred = np.linalg.inv(0.5 * (P + P.T))
        Pi = Pi_pred + R * np.outer(s, s)
        xhat = np.linalg.solve(Pi, Pi_pred @ xpred + R * s * float(y))
        Pi = 0.5 * (Pi + Pi.T)
        out.append((xhat.copy(), Pi.copy()))
    return out
