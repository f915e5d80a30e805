"""Value functions represented as a pointwise minimum of quadratic forms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InvalidArgumentError
from .quadform import (
    QuadraticForm,
    batch_minimizers,
    dominance_matrix,
    sublevel_ellipsoid,
)


@dataclass(frozen=True, eq=False)
class MinQuadFunction:
    """``x -> min_k 0.5 [x;1]^T Q_k [x;1]`` over a nonempty stack of forms.

    The forms are held as one read-only array ``mats`` of shape
    ``(K, n+1, n+1)``; :attr:`forms` gives them as :class:`QuadraticForm`.
    """

    mats: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.mats, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        if mats.ndim != 3 or mats.shape[0] == 0 or mats.shape[1] != mats.shape[2] or mats.shape[1] < 2:
            raise InvalidArgumentError(f"need a nonempty stack of square augmented matrices, got {mats.shape}")
        mats = 0.5 * (mats + np.swapaxes(mats, 1, 2))
        mats.setflags(write=False)
        object.__setattr__(self, "mats", mats)

    @classmethod
    def from_forms(cls, forms: Sequence[QuadraticForm]) -> "MinQuadFunction":
        forms = list(forms)
        if not forms:
            raise InvalidArgumentError("a min-of-quadratics function needs at least one form")
        dims = {q.dim for q in forms}
        if len(dims) != 1:
            raise InvalidArgumentError(f"forms have mixed dimensions {sorted(dims)}")
        return cls(np.stack([q.mat for q in forms]))

    @property
    def dim(self) -> int:
        return self.mats.shape[1] - 1

    @property
    def forms(self):
        return [QuadraticForm(m) for m in self.mats]

    def __len__(self):
        return self.mats.shape[0]

    def subset(self, indices) -> "MinQuadFunction":
        return MinQuadFunction(self.mats[np.asarray(indices, dtype=np.int64)])

    def union(self, other: "MinQuadFunction") -> "MinQuadFunction":
        if other.dim != self.dim:
            raise InvalidArgumentError("cannot join collections of different dimension")
        return MinQuadFunction(np.concatenate([self.mats, other.mats]))

    def values(self, pts) -> np.ndarray:
        """Per-form values at a batch of points, shape ``(K, P)``."""
        return kernels.eval_forms(self.mats, _as_points(pts, self.dim))

    def __call__(self, pts) -> np.ndarray:
        """Pointwise minimum at a batch of points, shape ``(P,)``."""
        return kernels.min_stats(self.mats, _as_points(pts, self.dim))[0]


@dataclass(frozen=True)
class PruneConfig:
    """Pruning controls.

    ``max_forms`` caps the collection size; ranking for the cap uses the
    points in ``grid``.  With ``exact_first`` the exact dominance pass runs
    before the cap.

    ``track > 0`` makes the filter rank on a moving lattice instead: a
    ``track_points``-per-axis box centred on the current estimate with
    half-widths ``track * sqrt(diag(Pi^{-1}))``.
    """

    max_forms: int = 64
    grid: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    exact_first: bool = True
    track: float = 0.0
    track_points: int = 21

    def __post_init__(self):
        if int(self.max_forms) < 1:
            raise InvalidArgumentError("max_forms must be at least 1")
        if self.track < 0 or int(self.track_points) < 2:
            raise InvalidArgumentError("track must be >= 0 and track_points >= 2")
        object.__setattr__(self, "grid", np.atleast_2d(np.asarray(self.grid, dtype=float)))


def lattice(lo, hi, points) -> np.ndarray:
    """Uniform lattice over the box ``[lo, hi]`` with ``points`` per axis."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = [np.linspace(a, b, int(points)) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def tracking_grid(F: "MinQuadFunction", scale: float, points: int) -> np.ndarray:
    """Lattice centred on the global minimiser of ``F``, sized by its precision."""
    xhat, k, _ = global_min(F)
    half = scale * np.sqrt(np.diag(np.linalg.inv(F.mats[k, :-1, :-1])))
    return lattice(xhat - half, xhat + half, points)


def _as_points(pts, dim):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, dim) if dim > 1 else pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise InvalidArgumentError(f"points must have {dim} columns, got shape {pts.shape}")
    return pts


def eval_min(F: MinQuadFunction, x):
    """``(value, argmin_index)`` at one point; ties go to the lowest index."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (F.dim,):
        raise InvalidArgumentError(f"expected a point of dimension {F.dim}, got shape {x.shape}")
    vmin, arg, _, _ = kernels.min_stats(F.mats, x[None])
    return float(vmin[0]), int(arg[0])


def redundant_mask(mats) -> np.ndarray:
    """Mark forms that lie everywhere above another kept form.

    Scans in index order so that among equal forms the lowest index stays.
    """
    K = len(mats)
    dom = dominance_matrix(mats)  # dom[a, b]: a >= b everywhere
    np.fill_diagonal(dom, False)
    kept = np.zeros(K, dtype=bool)
    for i in range(K):
        if np.any(dom[i] & kept):
            continue
        kept &= ~dom[:, i]
        kept[i] = True
    return ~kept


def prune_exact(F: MinQuadFunction) -> MinQuadFunction:
    """Remove forms that never attain the minimum because another form lies
    below them everywhere.  The pointwise minimum is unchanged."""
    if len(F) == 1:
        return F
    drop = redundant_mask(F.mats)
    return F.subset(np.nonzero(~drop)[0])


def topk_order(wins, excess, max_forms):
    """Indices of the ``max_forms`` best forms, returned in ascending order.

    Ranking: most grid wins, then least summed excess, then lowest index.
    """
    wins = np.asarray(wins)
    K = len(wins)
    if K <= max_forms:
        return np.arange(K)
    order = np.lexsort((np.arange(K), np.asarray(excess), -wins))
    return np.sort(order[:max_forms])


def prune_topk(F: MinQuadFunction, cfg: PruneConfig) -> MinQuadFunction:
    """Keep at most ``cfg.max_forms`` forms, ranked on ``cfg.grid``.

    The result lies pointwise on or above ``F`` and agrees with it at every
    grid point whose winning form survives.
    """
    if len(F) <= cfg.max_forms:
        return F
    if cfg.grid.size == 0:
        raise InvalidArgumentError("top-K pruning needs a nonempty grid")
    _, _, wins, excess = kernels.min_stats(F.mats, _as_points(cfg.grid, F.dim))
    return F.subset(topk_order(wins, excess, cfg.max_forms))


def prune(F: MinQuadFunction, cfg: PruneConfig) -> MinQuadFunction:
    """Exact pass (if enabled) followed by the top-K cap."""
    if cfg.exact_first:
        F = prune_exact(F)
    return prune_topk(F, cfg)


def global_min(F: MinQuadFunction):
    """``(xhat, index, vmin)``: the lowest trough over all forms.

    Raises :class:`~minplus_filter.errors.UnboundedBelowError` if any form
    has a non-positive-definite N block.
    """
    xs, vs = batch_minimizers(F.mats)
    k = int(np.argmin(vs))
    return xs[k], k, float(vs[k])


def extract_estimate(F: MinQuadFunction):
    """Point estimate, precision matrix and offset of the winning form.

    Returns ``(xhat, Pi, phihat)`` such that near ``xhat`` the value function
    reads ``0.5 (x-xhat)^T Pi (x-xhat) + 0.5 phihat``.
    """
    xhat, k, vmin = global_min(F)
    Pi = np.array(F.mats[k, :-1, :-1])
    return xhat, Pi, 2.0 * vmin


def set_estimate(F: MinQuadFunction, d: float):
    """Ellipsoids whose union is ``{x : F(x) <= d}`` (empty ones dropped)."""
    batch_minimizers(F.mats)  # surface non-PD forms with their index
    out = []
    for q in F.forms:
        ell = sublevel_ellipsoid(q, d)
        if not ell.empty:
            out.append(ell)
    return out


def in_set(ellipsoids, x) -> bool:
    return any(e.contains(x) for e in ellipsoids)
