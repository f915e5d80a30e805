"""System description, reverse-time discretization, simulation, SQC accounting."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, InvalidModelError


def _spd(name, M, allow_scalar=True):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise InvalidModelError(f"{name} must be square, got {M.shape}")
    if not np.allclose(M, M.T, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise InvalidModelError(f"{name} must be symmetric")
    lam = np.linalg.eigvalsh(M).min()
    if lam <= 0:
        raise InvalidModelError(f"{name} must be positive definite (smallest eigenvalue {lam:.3e})")
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class ContinuousModel:
    """``dx/dt = Ac x + Dc w``, ``y = c(s^T x) + v`` with IQC weights."""

    Ac: np.ndarray
    Dc: np.ndarray
    Qc: np.ndarray
    Rc: float
    N0: np.ndarray
    xbar0: np.ndarray
    d: float

    def __post_init__(self):
        Ac = np.atleast_2d(np.asarray(self.Ac, dtype=float))
        n = Ac.shape[0]
        if Ac.shape != (n, n):
            raise InvalidModelError("Ac must be square")
        Dc = np.asarray(self.Dc, dtype=float).reshape(n, -1)
        Qc = _spd("Qc", self.Qc)
        if Qc.shape[0] != Dc.shape[1]:
            raise InvalidModelError("Qc size must match the columns of Dc")
        if not float(self.Rc) > 0:
            raise InvalidModelError("Rc must be positive")
        N0 = _spd("N0", self.N0)
        xbar0 = np.atleast_1d(np.asarray(self.xbar0, dtype=float))
        if N0.shape != (n, n) or xbar0.shape != (n,):
            raise InvalidModelError("N0 and xbar0 must match the state dimension")
        if not float(self.d) > 0:
            raise InvalidModelError("budget d must be positive")
        for name, val in (("Ac", Ac), ("Dc", Dc), ("Qc", Qc), ("N0", N0), ("xbar0", xbar0)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "Rc", float(self.Rc))
        object.__setattr__(self, "d", float(self.d))

    @property
    def n(self):
        return self.Ac.shape[0]


@dataclass(frozen=True, eq=False)
class ReverseDynamics:
    """``x_k = A x_{k+1} + a + B w`` with disturbance weight ``Qeta``."""

    A: np.ndarray
    a: np.ndarray
    B: np.ndarray
    Qeta: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidModelError("A must be square")
        a = np.zeros(n) if self.a is None else np.atleast_1d(np.asarray(self.a, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        Qeta = _spd("Qeta", self.Qeta)
        if a.shape != (n,) or Qeta.shape[0] != B.shape[1]:
            raise InvalidModelError("offset or disturbance weight has the wrong size")
        for name, val in (("A", A), ("a", a), ("B", B), ("Qeta", Qeta)):
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class ForwardDynamics:
    """``x_{k+1} = F x_k + G w_k``."""

    F: np.ndarray
    G: np.ndarray


@dataclass(frozen=True, eq=False)
class SqcBudget:
    """Discrete sum-quadratic-constraint weights and total budget ``d``."""

    N0: np.ndarray
    xbar0: np.ndarray
    Q: np.ndarray
    R: float
    d: float

    def __post_init__(self):
        N0 = _spd("N0", self.N0)
        xbar0 = np.atleast_1d(np.asarray(self.xbar0, dtype=float))
        if xbar0.shape != (N0.shape[0],):
            raise InvalidModelError("xbar0 must match N0")
        Q = _spd("Q", self.Q)
        if not float(self.R) > 0:
            raise InvalidModelError("R must be positive")
        if not float(self.d) > 0:
            raise InvalidModelError("budget d must be positive")
        object.__setattr__(self, "N0", N0)
        object.__setattr__(self, "xbar0", xbar0)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "d", float(self.d))


@dataclass(frozen=True, eq=False)
class SimulationRecord:
    """Forward trajectory: ``T+1`` states, ``T`` disturbances, noises and outputs."""

    tau: float
    states: np.ndarray
    disturbances: np.ndarray
    measurement_noises: np.ndarray
    outputs: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        T = states.shape[0] - 1
        w = np.asarray(self.disturbances, dtype=float).reshape(T, -1)
        v = np.asarray(self.measurement_noises, dtype=float).reshape(T)
        y = np.asarray(self.outputs, dtype=float).reshape(T)
        for name, val in (("states", states), ("disturbances", w), ("measurement_noises", v), ("outputs", y)):
            object.__setattr__(self, name, val)

    @property
    def T(self):
        return self.states.shape[0] - 1

    def write_csv(self, path):
        """Columns ``k, x_1..x_n, w_1..w_p, v, y``; row ``k=0`` leaves ``w, v, y`` blank."""
        n, p = self.states.shape[1], self.disturbances.shape[1]
        header = ["k"] + [f"x_{i + 1}" for i in range(n)] + [f"w_{j + 1}" for j in range(p)] + ["v", "y"]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(header)
            for k in range(self.T + 1):
                row = [str(k)] + [repr(float(v)) for v in self.states[k]]
                if k == 0:
                    row += [""] * (p + 2)
                else:
                    row += [repr(float(v)) for v in self.disturbances[k - 1]]
                    row += [repr(float(self.measurement_noises[k - 1])), repr(float(self.outputs[k - 1]))]
                out.writerow(row)

    @classmethod
    def read_csv(cls, path, tau=float("nan"), seed=None):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        xs = [i for i, h in enumerate(header) if h.startswith("x_")]
        ws = [i for i, h in enumerate(header) if h.startswith("w_")]
        iv, iy = header.index("v"), header.index("y")
        if header[0] != "k" or not xs or not ws:
            raise InvalidArgumentError(f"{path}: unexpected trajectory header {header}")
        states = np.array([[float(r[i]) for i in xs] for r in rows])
        body = rows[1:]
        w = np.array([[float(r[i]) for i in ws] for r in body]).reshape(len(body), len(ws))
        v = np.array([float(r[iv]) for r in body])
        y = np.array([float(r[iy]) for r in body])
        return cls(tau, states, w, v, y, seed)


def discretize_reverse_euler(cm: ContinuousModel, tau: float, Q=None, R=None):
    """Euler discretization of the continuous model, backwards and forwards.

    Returns ``(ReverseDynamics, ForwardDynamics, SqcBudget)``.  The reverse
    map is ``A = I - tau Ac``, ``B = -tau Dc``; the forward map is
    ``I + tau Ac`` with gain ``tau Dc``.  Per-step weights default to
    ``Q = tau Qc`` and ``R = tau Rc``.
    """
    tau = float(tau)
    if not tau > 0:
        raise InvalidArgumentError("sampling time tau must be positive")
    eye = np.eye(cm.n)
    Q = tau * cm.Qc if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
    R = tau * cm.Rc if R is None else float(R)
    rev = ReverseDynamics(eye - tau * cm.Ac, np.zeros(cm.n), -tau * cm.Dc, Q)
    fwd = ForwardDynamics(eye + tau * cm.Ac, tau * cm.Dc)
    budget = SqcBudget(cm.N0, cm.xbar0, Q, R, cm.d)
    return rev, fwd, budget


def uniform_noise(seed, w_amplitude, v_amplitude):
    """Bounded disturbance source: i.i.d. uniform on ``[-amp, amp]``.

    Returns a callable ``(T, p) -> (w, v)``.
    """
    def draw(T, p):
        rng = np.random.default_rng(seed)
        w = rng.uniform(-1.0, 1.0, size=(T, p)) * np.asarray(w_amplitude, dtype=float)
        v = rng.uniform(-1.0, 1.0, size=T) * float(v_amplitude)
        return w, v

    return draw


def simulate_forward(fwd: ForwardDynamics, output: Callable, T: int, noise, x0, tau=float("nan"), seed=None):
    """Run ``x_{k+1} = F x_k + G w_k``, ``y_{k+1} = output(x_{k+1}) + v_{k+1}``.

    ``noise`` is a callable ``(T, p) -> (w, v)`` such as :func:`uniform_noise`.
    """
    if T < 1:
        raise InvalidArgumentError("need at least one step")
    F = np.atleast_2d(fwd.F)
    G = np.asarray(fwd.G, dtype=float).reshape(F.shape[0], -1)
    w, v = noise(T, G.shape[1])
    x = np.empty((T + 1, F.shape[0]))
    x[0] = np.asarray(x0, dtype=float)
    y = np.empty(T)
    for k in range(T):
        x[k + 1] = F @ x[k] + G @ w[k]
        y[k] = float(output(x[k + 1])) + v[k]
    return SimulationRecord(tau, x, w, v, y, seed)


def sqc_terms(rec: SimulationRecord, budget: SqcBudget) -> np.ndarray:
    """Running SQC consumption after 0..T steps (length ``T+1``)."""
    dx = rec.states[0] - budget.xbar0
    start = 0.5 * float(dx @ budget.N0 @ dx)
    step = 0.5 * (
        np.einsum("ki,ij,kj->k", rec.disturbances, budget.Q, rec.disturbances)
        + budget.R * rec.measurement_noises**2
    )
    return start + np.concatenate([[0.0], np.cumsum(step)])


def sqc_consumption(rec: SimulationRecord, budget: SqcBudget) -> float:
    """``0.5 ||x0 - xbar0||^2_N0 + 0.5 sum(||w||^2_Q + R v^2)``."""
    return float(sqc_terms(rec, budget)[-1])


def calibrate_amplitudes(budget: SqcBudget, T: int, x0, p: int, share=0.5, w_fraction=0.8):
    """Uniform-noise amplitudes whose worst-case consumption fills ``share`` of
    the budget left after the initial-state term."""
    dx = np.asarray(x0, dtype=float) - budget.xbar0
    left = share * budget.d - 0.5 * float(dx @ budget.N0 @ dx)
    if left <= 0:
        raise InvalidArgumentError("initial state alone exhausts the budget")
    qmax = np.linalg.eigvalsh(budget.Q).max()
    # worst case per step: 0.5 (qmax p aw^2 + R av^2)
    aw = np.sqrt(2.0 * w_fraction * left / (T * qmax * p))
    av = np.sqrt(2.0 * (1.0 - w_fraction) * left / (T * budget.R))
    return float(aw), float(av)
