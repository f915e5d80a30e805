"""The min-plus filter recursion.

One step maps the value function ``V_k`` to

    V_{k+1}(x) = min_w { V_k(A x + a + B w) + 0.5 w^T Qeta w } + 0.5 R (y - c(s^T x))^2.

The minimisation over ``w`` is done in closed form for every quadratic in
the collection (each stays a single quadratic under affine dynamics), and
the output term is replaced by a min-of-quadratics majorant, so the new
value function is again a pointwise minimum of quadratics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .approx import MajorantFit, ScalarQuadratic, lift_coefficients
from .errors import InvalidArgumentError
from .minplus import (
    MinQuadFunction,
    PruneConfig,
    eval_min,
    extract_estimate,
    prune_exact,
    prune_topk,
    redundant_mask,
    set_estimate,
    topk_order,
    tracking_grid,
)
from .model import ReverseDynamics, SqcBudget
from .quadform import QuadraticForm, from_initial_condition


@dataclass(frozen=True, eq=False)
class OutputChannel:
    """Scalar output ``y = c(s^T x) + v`` with weight ``R``.

    ``neg_pos``, ``neg_neg`` and ``square`` are majorants of
    ``-R c``, ``+R c`` and ``R c^2`` respectively; ``func`` is the exact
    nonlinearity, kept for reporting only.
    """

    s: np.ndarray
    R: float
    neg_pos: MajorantFit
    neg_neg: MajorantFit
    square: MajorantFit
    func: Callable | None = None

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        if not np.any(s):
            raise InvalidArgumentError("output direction must be nonzero")
        if not float(self.R) > 0:
            raise InvalidArgumentError("measurement weight R must be positive")
        if not (self.neg_pos.interval == self.neg_neg.interval == self.square.interval):
            raise InvalidArgumentError("all three fits must share one interval")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "R", float(self.R))

    @property
    def dim(self):
        return self.s.size

    def step_error(self, y) -> float:
        """Worst excess of the majorized output term over the exact one."""
        sign_fit = self.neg_pos if y >= 0 else self.neg_neg
        cross = abs(y) * sign_fit.max_error if y != 0 else 0.0
        return cross + 0.5 * self.square.max_error

    def predict(self, x):
        if self.func is None:
            raise InvalidArgumentError("channel has no output function attached")
        return float(self.func(float(self.s @ np.asarray(x, dtype=float))))


def linear_channel(s, R: float, gain: float = 1.0) -> OutputChannel:
    """Exact single-piece channel for ``y = gain * s^T x + v``."""
    line = (-np.inf, np.inf)
    R = float(R)
    return OutputChannel(
        s,
        R,
        MajorantFit([ScalarQuadratic(0.0, -R * gain, 0.0)], line, 0.0),
        MajorantFit([ScalarQuadratic(0.0, R * gain, 0.0)], line, 0.0),
        MajorantFit([ScalarQuadratic(R * gain * gain, 0.0, 0.0)], line, 0.0),
        lambda t: gain * np.asarray(t, dtype=float),
    )


@dataclass(frozen=True, eq=False)
class FilterState:
    t: int
    V: MinQuadFunction
    budget_d: float
    prune: PruneConfig
    n_pre: int = 1
    n_post: int = 1


@dataclass(frozen=True, eq=False)
class StepResult:
    t: int
    y: float
    xhat: np.ndarray
    Pi: np.ndarray
    phihat: float
    vmin: float
    ellipsoids: list
    n_pre: int
    n_post: int
    V: MinQuadFunction = field(repr=False)


def init_state(budget: SqcBudget, prune: PruneConfig) -> FilterState:
    q0 = from_initial_condition(budget.N0, budget.xbar0, 0.0)
    return FilterState(0, MinQuadFunction(q0.mat[None]), budget.d, prune)


def _disturbance_gains(mats, dyn: ReverseDynamics):
    """Per-form ``w_c`` (K, p) and ``w_l`` (K, p, n) with ``w* = w_c + w_l u``."""
    n = dyn.n
    N = mats[:, :n, :n]
    L = mats[:, n, :n]
    B, Q = dyn.B, dyn.Qeta
    BtN = np.einsum("ij,kil->kjl", B, N)  # (K, p, n)
    G = Q[None] + BtN @ B  # (K, p, p)
    w_l = -np.linalg.solve(G, BtN)
    w_c = -np.linalg.solve(G, (L @ B)[..., None])[..., 0]
    return w_c, w_l


def optimal_disturbance(q: QuadraticForm, dyn: ReverseDynamics, x) -> np.ndarray:
    """Disturbance minimising ``q(A x + a + B w) + 0.5 w^T Qeta w``.

    Equals ``-[Qeta + B^T N B]^{-1} [B^T L^T + B^T N (A x + a)]``.
    """
    if q.dim != dyn.n:
        raise InvalidArgumentError("form and dynamics dimensions differ")
    w_c, w_l = _disturbance_gains(q.mat[None], dyn)
    u = dyn.A @ np.asarray(x, dtype=float) + dyn.a
    return w_c[0] + w_l[0] @ u


def dynamics_step_mats(mats, dyn: ReverseDynamics) -> np.ndarray:
    """Closed-form dynamics step for a stack of augmented matrices.

    With ``u = A x + a`` and ``w = w_c + w_l u`` the minimised cost is a
    quadratic in ``u`` with blocks

        h   = (I + B w_l)^T N (I + B w_l) + w_l^T Qeta w_l
        L_u = L (I + B w_l) + w_c^T B^T N (I + B w_l) + w_c^T Qeta w_l
        phi = phi + 2 L B w_c + w_c^T B^T N B w_c + w_c^T Qeta w_c

    which is then pulled back through the affine map ``x -> u``.
    """
    mats = np.asarray(mats, dtype=float)
    n = dyn.n
    if mats.shape[1:] != (n + 1, n + 1):
        raise InvalidArgumentError("form and dynamics dimensions differ")
    N = mats[:, :n, :n]
    L = mats[:, n, :n]
    phi = mats[:, n, n]
    B, Q = dyn.B, dyn.Qeta
    w_c, w_l = _disturbance_gains(mats, dyn)
    E = np.eye(n)[None] + B[None] @ w_l  # (K, n, n)
    NE = N @ E
    h = np.swapaxes(E, 1, 2) @ NE + np.swapaxes(w_l, 1, 2) @ Q @ w_l
    Bwc = w_c @ B.T  # (K, n)
    Lu = (
        np.einsum("ki,kij->kj", L, E)
        + np.einsum("ki,kij->kj", Bwc, NE)
        + np.einsum("ki,ij,kjl->kl", w_c, Q, w_l)
    )
    phi_u = (
        phi
        + 2.0 * np.einsum("ki,ki->k", L, Bwc)
        + np.einsum("ki,kij,kj->k", Bwc, N, Bwc)
        + np.einsum("ki,ij,kj->k", w_c, Q, w_c)
    )
    Mu = np.empty_like(mats)
    Mu[:, :n, :n] = h
    Mu[:, :n, n] = Lu
    Mu[:, n, :n] = Lu
    Mu[:, n, n] = phi_u
    T = np.eye(n + 1)
    T[:n, :n] = dyn.A
    T[:n, n] = dyn.a
    out = T.T[None] @ Mu @ T[None]
    return 0.5 * (out + np.swapaxes(out, 1, 2))


def dynamics_step_single(q: QuadraticForm, dyn: ReverseDynamics) -> QuadraticForm:
    """The quadratic ``x -> min_w q(A x + a + B w) + 0.5 w^T Qeta w``."""
    return QuadraticForm(dynamics_step_mats(q.mat[None], dyn)[0])


def dynamics_step(F: MinQuadFunction, dyn: ReverseDynamics) -> MinQuadFunction:
    """Apply the dynamics step to every form; min and the step commute."""
    return MinQuadFunction(dynamics_step_mats(F.mats, dyn))


def measurement_coefficients(y: float, ch: OutputChannel) -> np.ndarray:
    """Scalar pieces ``(a, b, c)`` whose minimum majorizes ``0.5 R (y - c(theta))^2``.

    Rows run over the sign collection (outer) and the square collection
    (inner); for ``y == 0`` only the square collection is used.
    """
    y = float(y)
    if not np.isfinite(y):
        raise InvalidArgumentError("measurement must be finite")
    sq = 0.5 * ch.square.coefficients()
    sq[:, 2] += 0.5 * ch.R * y * y
    if y == 0.0:
        return sq
    cross = abs(y) * (ch.neg_pos if y > 0 else ch.neg_neg).coefficients()
    return (cross[:, None, :] + sq[None, :, :]).reshape(-1, 3)


def measurement_step(F: MinQuadFunction, y: float, ch: OutputChannel) -> MinQuadFunction:
    """Add the majorized output term: all sums ``Q_i + Q_m`` (``i`` outer)."""
    if F.dim != ch.dim:
        raise InvalidArgumentError("value function and output channel dimensions differ")
    lifted = lift_coefficients(measurement_coefficients(y, ch), ch.s)
    return MinQuadFunction((F.mats[:, None] + lifted[None]).reshape(-1, F.dim + 1, F.dim + 1))


def _prune_scalar(coef):
    """Drop scalar pieces lying above another piece everywhere.

    Composition with ``theta = s^T x`` is onto, so dominance in ``theta``
    is the same as dominance of the lifted forms.
    """
    mats = np.empty((len(coef), 2, 2))
    mats[:, 0, 0] = 2.0 * coef[:, 0]
    mats[:, 0, 1] = mats[:, 1, 0] = coef[:, 1]
    mats[:, 1, 1] = 2.0 * coef[:, 2]
    return coef[~redundant_mask(mats)]


def _combine_pruned(Fd: MinQuadFunction, lifted: np.ndarray, grid, max_forms) -> MinQuadFunction:
    """Top-K of the product ``{Fd_i + lifted_m}`` without forming it.

    At every grid point the minimum over pairs splits into the minimum over
    ``i`` plus the minimum over ``m``, so grid wins and summed excess of a
    pair follow from the two factors alone.  Selection matches
    :func:`prune_topk` applied to the full product.
    """
    K, M = len(Fd), len(lifted)
    _, arg_f, _, exc_f = kernels.min_stats(Fd.mats, grid)
    _, arg_m, _, exc_m = kernels.min_stats(lifted, grid)
    wins = np.bincount(arg_f * M + arg_m, minlength=K * M)
    excess = (exc_f[:, None] + exc_m[None, :]).ravel()
    keep = topk_order(wins, excess, max_forms)
    i, m = np.divmod(keep, M)
    return MinQuadFunction(Fd.mats[i] + lifted[m])


def filter_step(st: FilterState, y: float, dyn: ReverseDynamics, ch: OutputChannel, fused=True) -> FilterState:
    """Dynamics step, measurement update, pruning.

    Exact pruning (when enabled) runs on the two factors before they are
    combined and again on the survivors of the top-K cap.  With ``fused``
    the cap is computed from the factors directly instead of materialising
    the full product.
    """
    cfg = st.prune
    Fd = dynamics_step(st.V, dyn)
    coef = measurement_coefficients(y, ch)
    n_pre = len(Fd) * len(coef)
    if cfg.exact_first:
        Fd = prune_exact(Fd)
        coef = _prune_scalar(coef)
    lifted = lift_coefficients(coef, ch.s)
    m = Fd.dim + 1
    if len(Fd) * len(lifted) <= cfg.max_forms:
        V = MinQuadFunction((Fd.mats[:, None] + lifted[None]).reshape(-1, m, m))
    else:
        grid = tracking_grid(Fd, cfg.track, cfg.track_points) if cfg.track > 0 else cfg.grid
        if grid.size == 0:
            raise InvalidArgumentError("top-K pruning needs a nonempty grid")
        if fused:
            V = _combine_pruned(Fd, lifted, grid, cfg.max_forms)
        else:
            full = MinQuadFunction((Fd.mats[:, None] + lifted[None]).reshape(-1, m, m))
            V = prune_topk(full, replace(cfg, grid=grid))
    if cfg.exact_first:
        V = prune_exact(V)
    return replace(st, t=st.t + 1, V=V, n_pre=n_pre, n_post=len(V))


def run_filter(
    budget: SqcBudget,
    dyn: ReverseDynamics,
    ch: OutputChannel,
    measurements: Sequence[float],
    prune: PruneConfig,
    with_sets=True,
):
    """Fold :func:`filter_step` over the measurements.

    Returns one :class:`StepResult` per measurement.
    """
    measurements = list(measurements)
    if not measurements:
        raise InvalidArgumentError("need at least one measurement")
    st = init_state(budget, prune)
    out = []
    for y in measurements:
        st = filter_step(st, y, dyn, ch)
        xhat, Pi, phihat = extract_estimate(st.V)
        sets = set_estimate(st.V, budget.d) if with_sets else []
        out.append(StepResult(st.t, float(y), xhat, Pi, phihat, 0.5 * phihat, sets, st.n_pre, st.n_post, st.V))
    return out


def value_at(result: StepResult, x) -> float:
    return eval_min(result.V, x)[0]
