"""Augmented quadratic forms.

A form over ``R^n`` is stored as one symmetric ``(n+1, n+1)`` matrix

    Q = [[N,  L^T],
         [L,  phi ]]

and represents ``x -> 0.5 * [x; 1]^T Q [x; 1] = 0.5 * (x^T N x + 2 L x + phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidModelError, UnboundedBelowError

#: Eigenvalue tolerance (relative to the matrix scale) for PSD decisions.
EIG_TOL = 1e-10


def _symmetrize(mat):
    mat = np.array(mat, dtype=float)
    return 0.5 * (mat + np.swapaxes(mat, -1, -2))


def _as_point(x, dim):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise InvalidArgumentError(f"expected a point of dimension {dim}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """One element of the min-plus basis: ``0.5 * [x;1]^T mat [x;1]``."""

    mat: np.ndarray

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.mat, dtype=float))
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 2:
            raise InvalidArgumentError(f"augmented matrix must be square and at least 2x2, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise InvalidArgumentError("augmented matrix has non-finite entries")
        mat = _symmetrize(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_blocks(cls, N, L, phi):
        N = np.atleast_2d(np.asarray(N, dtype=float))
        L = np.atleast_1d(np.asarray(L, dtype=float)).ravel()
        n = N.shape[0]
        if N.shape != (n, n) or L.shape != (n,):
            raise InvalidArgumentError("block shapes do not agree")
        mat = np.empty((n + 1, n + 1))
        mat[:n, :n] = N
        mat[:n, n] = L
        mat[n, :n] = L
        mat[n, n] = phi
        return cls(mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0] - 1

    @property
    def N(self) -> np.ndarray:
        return self.mat[:-1, :-1]

    @property
    def L(self) -> np.ndarray:
        """Linear block as a flat length-``n`` array."""
        return self.mat[-1, :-1]

    @property
    def phi(self) -> float:
        return float(self.mat[-1, -1])

    def __add__(self, other):
        if not isinstance(other, QuadraticForm):
            return NotImplemented
        if other.dim != self.dim:
            raise InvalidArgumentError("cannot add forms of different dimension")
        return QuadraticForm(self.mat + other.mat)

    def __mul__(self, alpha):
        return QuadraticForm(float(alpha) * self.mat)

    __rmul__ = __mul__

    def __repr__(self):
        return f"QuadraticForm(dim={self.dim}, mat={self.mat.tolist()!r})"


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """The set ``{x : 0.5 (x-center)^T shape (x-center) <= level}``."""

    center: np.ndarray
    shape: np.ndarray
    level: float
    empty: bool

    def contains(self, x, rtol=1e-12) -> bool:
        if self.empty:
            return False
        dx = np.asarray(x, dtype=float) - self.center
        r = 0.5 * dx @ self.shape @ dx
        return bool(r <= self.level + rtol * max(1.0, abs(self.level)))

    def semi_axes(self):
        """Semi-axis lengths and directions (columns)."""
        lam, vec = np.linalg.eigh(self.shape)
        return np.sqrt(2.0 * max(self.level, 0.0) / lam), vec


def evaluate(q: QuadraticForm, x) -> float:
    """Value ``0.5 * [x;1]^T q.mat [x;1]``."""
    z = np.append(_as_point(x, q.dim), 1.0)
    return 0.5 * float(z @ q.mat @ z)


def from_initial_condition(N0, xbar0, phi0=0.0) -> QuadraticForm:
    """Form of ``0.5 * (||x - xbar0||^2_{N0} + phi0)``."""
    N0 = np.atleast_2d(np.asarray(N0, dtype=float))
    xbar0 = np.atleast_1d(np.asarray(xbar0, dtype=float))
    n = N0.shape[0]
    if N0.shape != (n, n) or xbar0.shape != (n,):
        raise InvalidArgumentError("N0 must be n x n and xbar0 length n")
    if not np.allclose(N0, N0.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(N0).max())):
        raise InvalidModelError("N0 is not symmetric")
    lam_min = np.linalg.eigvalsh(N0).min()
    if lam_min <= 0:
        raise InvalidModelError(f"N0 is not positive definite (smallest eigenvalue {lam_min:.3e})")
    Nx = N0 @ xbar0
    return QuadraticForm.from_blocks(N0, -Nx, float(xbar0 @ Nx) + float(phi0))


def minimizer(q: QuadraticForm):
    """Unconstrained minimizer ``(xstar, vmin)`` of a form.

    Uses ``xstar = -(q11 + q11^T)^{-1} (q12 + q21^T)``, which for symmetric
    storage is ``-N^{-1} L^T``.

    Raises
    ------
    UnboundedBelowError
        If the N block is not positive definite.
    """
    xs, vs = batch_minimizers(q.mat[None])
    return xs[0], float(vs[0])


def batch_minimizers(mats):
    """Minimizers and minimum values for a stack of augmented matrices.

    Raises :class:`UnboundedBelowError` carrying the first offending index.
    """
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1] - 1
    N = mats[:, :n, :n]
    L = mats[:, :n, n]
    lam = np.linalg.eigvalsh(N)[:, 0]
    scale = np.maximum(1.0, np.abs(N).max(axis=(1, 2)))
    bad = np.nonzero(lam <= EIG_TOL * scale)[0]
    if bad.size:
        raise UnboundedBelowError(lam[bad[0]], index=int(bad[0]))
    xs = -np.linalg.solve(N, L[..., None])[..., 0]
    # 0.5 * (phi + L x*) since N x* = -L
    vs = 0.5 * (mats[:, n, n] + np.einsum("ki,ki->k", L, xs))
    return xs, vs


def dominance_matrix(mats_a, mats_b=None):
    """Boolean matrix ``D[i, j] = (form a_i >= form b_j everywhere)``.

    ``0.5 [x;1]^T M [x;1] >= 0`` for all ``x`` exactly when ``M`` is positive
    semidefinite (scale ``[x;1]`` by ``t`` and let ``t -> 0`` for the
    converse), so each pair costs one small symmetric eigenvalue problem.
    This is the same decision as checking that the N block of the
    difference is PSD and its infimum is nonnegative.
    """
    mats_a = np.asarray(mats_a, dtype=float)
    mats_b = mats_a if mats_b is None else np.asarray(mats_b, dtype=float)
    ka, kb = len(mats_a), len(mats_b)
    m = mats_a.shape[-1]
    diff = (mats_a[:, None] - mats_b[None, :]).reshape(ka * kb, m, m)
    scale = np.maximum(
        np.abs(mats_a).max(axis=(1, 2))[:, None], np.abs(mats_b).max(axis=(1, 2))[None, :]
    ).ravel()
    if m == 2:
        p, q, r = diff[:, 0, 0], diff[:, 0, 1], diff[:, 1, 1]
        lam = 0.5 * (p + r - np.hypot(p - r, 2.0 * q))
    else:
        lam = np.linalg.eigvalsh(diff)[:, 0]
    return (lam >= -EIG_TOL * np.maximum(1.0, scale)).reshape(ka, kb)


def dominates(qa: QuadraticForm, qb: QuadraticForm) -> bool:
    """True iff ``evaluate(qa, x) >= evaluate(qb, x)`` for every ``x``."""
    if qa.dim != qb.dim:
        raise InvalidArgumentError("forms have different dimensions")
    return bool(dominance_matrix(qa.mat[None], qb.mat[None])[0, 0])


def sublevel_ellipsoid(q: QuadraticForm, d: float) -> Ellipsoid:
    """The set ``{x : evaluate(q, x) <= d}`` as an :class:`Ellipsoid`."""
    xstar, vmin = minimizer(q)
    level = float(d) - vmin
    return Ellipsoid(center=xstar, shape=np.array(q.N), level=level, empty=level < 0)
