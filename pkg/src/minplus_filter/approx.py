"""Min-of-quadratics majorants of scalar nonlinearities.

Each piece touches the target at an anchor with matching slope and curves
upward with a caller-supplied curvature bound ``c >= sup f''``.  By Taylor's
theorem every such piece lies above ``f`` on the whole interval, so the
minimum over pieces is a majorant that interpolates ``f`` at the anchors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import FitError, InvalidArgumentError
from .quadform import QuadraticForm

#: Minimum number of samples used for the error certificate.
MIN_SAMPLES = 10_000
#: Relative slack when certifying against interpolated (not tabulated) values.
INTERPOLATED_TOL = 1e-9


@dataclass(frozen=True)
class ScalarQuadratic:
    """``theta -> a theta^2 + b theta + c``."""

    a: float
    b: float
    c: float

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (self.a * theta + self.b) * theta + self.c

    def scaled(self, alpha) -> "ScalarQuadratic":
        return ScalarQuadratic(alpha * self.a, alpha * self.b, alpha * self.c)


@dataclass(frozen=True)
class FunctionTable:
    """Dense samples ``(theta, f, fprime)`` of a scalar function."""

    theta: np.ndarray
    f: np.ndarray
    fprime: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        f = np.asarray(self.f, dtype=float)
        fp = np.asarray(self.fprime, dtype=float)
        if th.ndim != 1 or th.shape != f.shape or th.shape != fp.shape or th.size < 2:
            raise InvalidArgumentError("table columns must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(th) <= 0):
            raise InvalidArgumentError("table theta column must be strictly increasing")
        for name, arr in (("theta", th), ("f", f), ("fprime", fp)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_function(cls, func, dfunc, interval, samples=MIN_SAMPLES + 1):
        theta = np.linspace(interval[0], interval[1], int(samples))
        return cls(theta, func(theta), dfunc(theta))

    @property
    def interval(self):
        return float(self.theta[0]), float(self.theta[-1])

    def spline(self):
        return CubicHermiteSpline(self.theta, self.f, self.fprime)

    def value_and_slope(self, x):
        """Exact table rows where ``x`` hits a sample, Hermite interpolation elsewhere."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        spl = self.spline()
        val, slope = spl(x), spl.derivative()(x)
        idx = np.clip(np.searchsorted(self.theta, x), 0, self.theta.size - 1)
        for cand in (idx, np.maximum(idx - 1, 0)):
            hit = np.abs(self.theta[cand] - x) <= 1e-12 * np.maximum(1.0, np.abs(x))
            val = np.where(hit, self.f[cand], val)
            slope = np.where(hit, self.fprime[cand], slope)
        return val, slope

    def scaled(self, alpha) -> "FunctionTable":
        return FunctionTable(self.theta, alpha * self.f, alpha * self.fprime)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta", "f", "fprime"])
            for row in zip(self.theta, self.f, self.fprime):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"theta", "f", "fprime"}:
            raise InvalidArgumentError(f"{path}: expected columns theta,f,fprime")
        cols = {k: np.array([float(r[k]) for r in rows]) for k in ("theta", "f", "fprime")}
        return cls(**cols)


@dataclass(frozen=True)
class MajorantFit:
    pieces: tuple
    interval: tuple
    max_error: float

    def __post_init__(self):
        if not self.pieces:
            raise InvalidArgumentError("a fit needs at least one piece")
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "interval", (float(self.interval[0]), float(self.interval[1])))

    def __len__(self):
        return len(self.pieces)

    def coefficients(self) -> np.ndarray:
        """Piece coefficients as a ``(J, 3)`` array of ``(a, b, c)``."""
        return np.array([[p.a, p.b, p.c] for p in self.pieces], dtype=float)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        coef = self.coefficients()
        vals = (coef[:, 0, None] * theta.ravel() + coef[:, 1, None]) * theta.ravel() + coef[:, 2, None]
        return vals.min(axis=0).reshape(theta.shape)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "b", "c"])
            for p in self.pieces:
                w.writerow([repr(float(p.a)), repr(float(p.b)), repr(float(p.c))])

    @classmethod
    def read_csv(cls, path, interval=(-np.inf, np.inf), max_error=np.nan):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"a", "b", "c"}:
            raise InvalidArgumentError(f"{path}: expected columns a,b,c")
        pieces = [ScalarQuadratic(float(r["a"]), float(r["b"]), float(r["c"])) for r in rows]
        return cls(pieces, interval, max_error)


def fit_majorant(table: FunctionTable, interval, anchors: Sequence[float], curvature: float) -> MajorantFit:
    """Tangent-plus-curvature majorant of a tabulated function.

    Parameters
    ----------
    table : FunctionTable
        Dense samples of ``f`` and ``f'``.
    interval : (lo, hi)
        Interval over which the majorant is certified.
    anchors : sequence of float
        Touching points, one piece each.
    curvature : float
        Upper bound on ``f''`` over the interval.

    Raises
    ------
    FitError
        If the fit dips below ``f`` at any certification sample.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise InvalidArgumentError("interval must satisfy lo < hi")
    t_lo, t_hi = table.interval
    if lo < t_lo - 1e-12 or hi > t_hi + 1e-12:
        raise InvalidArgumentError("interval extends beyond the table")
    anchors = np.atleast_1d(np.asarray(anchors, dtype=float))
    if anchors.size == 0:
        raise InvalidArgumentError("need at least one anchor")
    if np.any(anchors < lo - 1e-12) or np.any(anchors > hi + 1e-12):
        raise InvalidArgumentError("anchors must lie inside the interval")
    if curvature < 0:
        raise InvalidArgumentError("curvature bound must be nonnegative")

    fa, da = table.value_and_slope(anchors)
    a = 0.5 * curvature
    pieces = [
        ScalarQuadratic(a, float(d - curvature * t), float(f - d * t + a * t * t))
        for t, f, d in zip(anchors, fa, da)
    ]
    fit = MajorantFit(pieces, (lo, hi), 0.0)

    # certification samples: table rows inside the interval, densified if sparse
    inside = (table.theta >= lo - 1e-12) & (table.theta <= hi + 1e-12)
    theta, fvals = table.theta[inside], table.f[inside]
    rel_tol = 1e-12
    if theta.size < MIN_SAMPLES:
        theta = np.linspace(lo, hi, MIN_SAMPLES + 1)
        fvals = table.value_and_slope(theta)[0]
        rel_tol = INTERPOLATED_TOL
    gap = fit(theta) - fvals
    tol = rel_tol * max(1.0, float(np.abs(fvals).max()))
    worst = int(np.argmin(gap))
    if gap[worst] < -tol:
        raise FitError(theta[worst], gap[worst])
    return MajorantFit(pieces, (lo, hi), float(max(gap.max(), 0.0)))


def equispaced(interval, count) -> np.ndarray:
    """``count`` anchors spanning the interval, endpoints included."""
    if count == 1:
        return np.array([0.5 * (interval[0] + interval[1])])
    return np.linspace(interval[0], interval[1], int(count))


def balanced_anchors(table: FunctionTable, interval, count, curvature) -> np.ndarray:
    """Anchors spaced so each gap carries a similar share of the fit error.

    Between neighbouring anchors the excess of a piece grows like
    ``(curvature - f'') h^2``, so anchor density is taken proportional to
    ``sqrt(curvature - f'')`` (with ``f''`` differentiated from the slope
    column).  Endpoints are always included.
    """
    lo, hi = float(interval[0]), float(interval[1])
    count = int(count)
    if count < 2:
        return equispaced(interval, count)
    theta = np.linspace(lo, hi, MIN_SAMPLES + 1)
    slope = table.value_and_slope(theta)[1]
    fpp = np.gradient(slope, theta)
    density = np.sqrt(np.clip(curvature - fpp, 0.0, None)) + 1e-6 * np.sqrt(max(curvature, 1.0))
    mass = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(theta))])
    anchors = np.interp(np.linspace(0.0, mass[-1], count), mass, theta)
    anchors[0], anchors[-1] = lo, hi
    return anchors


def scale_fit(fit: MajorantFit, alpha: float) -> MajorantFit:
    """Multiply every piece (and the error certificate) by ``alpha >= 0``."""
    if alpha < 0:
        raise InvalidArgumentError("scale factor must be nonnegative")
    return MajorantFit([p.scaled(alpha) for p in fit.pieces], fit.interval, alpha * fit.max_error)


def lift_scalar(sq: ScalarQuadratic, s, dim: int | None = None) -> QuadraticForm:
    """Augmented form of ``x -> sq(s^T x)``."""
    mat = lift_coefficients(np.array([[sq.a, sq.b, sq.c]]), s, dim)[0]
    return QuadraticForm(mat)


def lift_coefficients(coef, s, dim=None) -> np.ndarray:
    """Stack of augmented matrices for rows ``(a, b, c)`` composed with ``s^T x``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if dim is not None and s.shape != (dim,):
        raise InvalidArgumentError(f"direction must have length {dim}")
    if not np.any(s):
        raise InvalidArgumentError("direction vector must be nonzero")
    coef = np.atleast_2d(np.asarray(coef, dtype=float))
    n = s.size
    out = np.zeros((coef.shape[0], n + 1, n + 1))
    out[:, :n, :n] = 2.0 * coef[:, 0, None, None] * np.outer(s, s)
    out[:, :n, n] = coef[:, 1, None] * s
    out[:, n, :n] = coef[:, 1, None] * s
    out[:, n, n] = 2.0 * coef[:, 2]
    return out
