"""Command-line experiment runner: ``fit``, ``simulate``, ``filter``, ``compare``."""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, FitError, InvalidArgumentError, InvalidModelError, UnboundedBelowError
from .filtering import run_filter, value_at
from .model import SimulationRecord, simulate_forward, sqc_terms, uniform_noise
from .oracle import grid_dp, information_filter

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_COMPARE = 0, 1, 2, 3


def _fmt(v) -> str:
    return repr(float(v))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


# --- library-level workflows ------------------------------------------------


def simulate(exp: cfgmod.Experiment, T=None) -> SimulationRecord:
    """Seeded forward simulation for an experiment, or the ingested trajectory."""
    path = exp.trajectory_path()
    if path is not None and T is None:
        try:
            return SimulationRecord.read_csv(path, tau=exp.tau, seed=exp.seed)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"run.trajectory: {exc}") from exc
    T = exp.T if T is None else int(T)
    aw, av = exp.amplitudes()
    noise = uniform_noise(exp.seed, aw, av)
    return simulate_forward(exp.forward, exp.output_function(), T, noise, exp.x0, exp.tau, exp.seed)


@dataclass
class FilterRun:
    record: SimulationRecord
    results: list
    yhat: np.ndarray
    v_true: np.ndarray
    d: float
    seconds: float

    @property
    def xhat(self):
        return np.array([r.xhat for r in self.results])

    def rms_state_error(self):
        err = self.xhat - self.record.states[1 : len(self.results) + 1]
        return np.sqrt(np.mean(err**2, axis=0))

    def rms_output_residual(self):
        return float(np.sqrt(np.mean((self.yhat - self.record.outputs) ** 2)))

    def rms_noise(self):
        return float(np.sqrt(np.mean(self.record.measurement_noises**2)))


def run_experiment(exp: cfgmod.Experiment, rec: SimulationRecord | None = None, with_sets=True) -> FilterRun:
    """Simulate (unless ``rec`` is given) and filter; time only the filter."""
    rec = simulate(exp) if rec is None else rec
    ch = exp.channel()
    start = time.perf_counter()
    results = run_filter(exp.budget, exp.reverse, ch, rec.outputs, exp.prune, with_sets=with_sets)
    seconds = time.perf_counter() - start
    yhat = np.array([ch.predict(r.xhat) for r in results])
    v_true = np.array([value_at(r, x) for r, x in zip(results, rec.states[1:])])
    return FilterRun(rec, results, yhat, v_true, exp.budget.d, seconds)


@dataclass
class Comparison:
    oracle: str
    passed: bool
    lines: list


def compare_information(exp: cfgmod.Experiment, rec: SimulationRecord, atol: float) -> Comparison:
    if exp.kind != "linear":
        raise ConfigError("the information-filter oracle needs a linear output")
    ch = exp.channel()
    results = run_filter(exp.budget, exp.reverse, ch, rec.outputs, exp.prune, with_sets=False)
    ref = information_filter(exp.reverse, exp.gain * exp.s, exp.budget.R, exp.budget, rec.outputs)[1:]
    dx = max(float(np.abs(r.xhat - x).max()) for r, (x, _) in zip(results, ref))
    dpi = max(float(np.abs(r.Pi - P).max()) for r, (_, P) in zip(results, ref))
    passed = dx <= atol and dpi <= atol
    lines = [
        f"steps: {len(results)}",
        f"max |xhat - xhat_ref|: {dx:.3e}",
        f"max |Pi - Pi_ref|:     {dpi:.3e}",
        f"tolerance: {atol:.1e}",
    ]
    return Comparison("information", passed, lines)


def grid_sandwich(exp: cfgmod.Experiment, rec: SimulationRecord, grid, lower_slack, margin, upper_tolerance=np.inf):
    """Check ``grid - slack <= V_minplus <= grid + accumulated fit error``.

    Returns ``(lower_gap, upper_gap, per_step)``; a gap above zero is a
    violation.  Only grid points at least ``margin`` (fraction of the box
    width) away from the boundary are compared.
    """
    ch = exp.channel()
    ys = rec.outputs
    results = run_filter(exp.budget, exp.reverse, ch, ys, exp.prune, with_sets=False)
    values = grid_dp(exp.budget, exp.reverse, exp.fits.func, exp.s, exp.budget.R, ys, grid)
    pts = grid.points()
    width = grid.hi - grid.lo
    inner = np.all((pts >= grid.lo + margin * width) & (pts <= grid.hi - margin * width), axis=1)
    budget = np.cumsum([ch.step_error(y) for y in ys])
    lower_gap = upper_gap = -np.inf
    per_step = []
    for t, r in enumerate(results, start=1):
        vm = r.V(pts[inner])
        vg = values[t].ravel()[inner]
        allowed = min(float(budget[t - 1]), upper_tolerance)
        lo_t = float(np.max(vg - lower_slack - vm))
        up_t = float(np.max(vm - vg - allowed))
        per_step.append((t, float(np.max(vg - vm)), float(np.max(vm - vg)), allowed))
        lower_gap, upper_gap = max(lower_gap, lo_t), max(upper_gap, up_t)
    return lower_gap, upper_gap, per_step


def compare_grid(exp, rec, grid, lower_slack, margin, upper_tolerance) -> Comparison:
    if exp.n > 2 or exp.reverse.p > 1:
        raise ConfigError("the grid oracle supports at most two states and one disturbance")
    lower_gap, upper_gap, per_step = grid_sandwich(exp, rec, grid, lower_slack, margin, upper_tolerance)
    lines = ["t  max(grid - minplus)  max(minplus - grid)  allowed"]
    lines += [f"{t:<2d} {a:20.3e} {b:20.3e} {c:9.3e}" for t, a, b, c in per_step]
    lines.append(f"lower slack: {lower_slack:.1e}")
    passed = lower_gap <= 0 and upper_gap <= 0
    if not passed:
        lines.append(f"gap: lower {max(lower_gap, 0.0):.3e}, upper {max(upper_gap, 0.0):.3e}")
    return Comparison("grid", passed, lines)


def compare(exp: cfgmod.Experiment) -> Comparison:
    block = exp.raw.get("compare", {})
    oracle = block.get("oracle", "auto")
    if oracle == "auto":
        oracle = "information" if exp.kind == "linear" else "grid"
    horizon = int(block.get("horizon", exp.T))
    rec = simulate(exp, T=horizon)
    if oracle == "information":
        return compare_information(exp, rec, float(block.get("atol", 1e-9)))
    return compare_grid(
        exp,
        rec,
        exp.compare_grid(),
        float(block.get("lower_slack", 1e-3)),
        float(block.get("interior_margin", 0.1)),
        float(block.get("upper_tolerance", np.inf)),
    )


# --- CSV emitters ------------------------------------------------------------


def write_estimates(path, run: FilterRun):
    n = run.record.states.shape[1]
    header = ["t", "y"] + [f"xhat_{i + 1}" for i in range(n)]
    header += [f"Pi_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    header += ["vmin", "n_forms_pre_prune", "n_forms_post_prune", "yhat", "V_true", "in_set"]
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for r, yh, vt in zip(run.results, run.yhat, run.v_true):
            row = [str(r.t), _fmt(r.y)] + [_fmt(v) for v in r.xhat] + [_fmt(v) for v in r.Pi.ravel()]
            row += [_fmt(r.vmin), str(r.n_pre), str(r.n_post), _fmt(yh), _fmt(vt)]
            row.append("1" if vt <= run.d else "0")
            w.writerow(row)


def write_ellipsoids(path, run: FilterRun):
    n = run.record.states.shape[1]
    header = ["t", "ellipsoid_index"] + [f"center_{i + 1}" for i in range(n)]
    header += [f"shape_{i + 1}{j + 1}" for i in range(n) for j in range(n)] + ["level"]
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for r in run.results:
            for k, e in enumerate(r.ellipsoids):
                row = [str(r.t), str(k)] + [_fmt(v) for v in e.center] + [_fmt(v) for v in e.shape.ravel()]
                w.writerow(row + [_fmt(e.level)])


# --- subcommands --------------------------------------------------------------


def cmd_fit(exp, out: Path) -> int:
    fits = exp.fits
    out.mkdir(parents=True, exist_ok=True)
    for name in ("neg_pos", "neg_neg", "square"):
        fit = getattr(fits, name)
        fit.write_csv(out / f"{name}.csv")
        print(f"{name}: pieces={len(fit)} max_error={fit.max_error:.6g}")
    return EXIT_OK


def cmd_simulate(exp, out: Path) -> int:
    rec = simulate(exp)
    out.mkdir(parents=True, exist_ok=True)
    rec.write_csv(out / "trajectory.csv")
    used = sqc_terms(rec, exp.budget)[-1]
    print(f"steps: {rec.T}")
    print(f"consumption: {used:.6g}")
    print(f"d: {exp.budget.d:.6g}")
    return EXIT_OK


def cmd_filter(exp, out: Path) -> int:
    run = run_experiment(exp)
    out.mkdir(parents=True, exist_ok=True)
    if exp.wants("fits"):
        for name in ("neg_pos", "neg_neg", "square"):
            getattr(exp.fits, name).write_csv(out / f"{name}.csv")
    if exp.wants("trajectory"):
        run.record.write_csv(out / "trajectory.csv")
    if exp.wants("estimates"):
        write_estimates(out / "estimates.csv", run)
    if exp.wants("ellipsoids"):
        write_ellipsoids(out / "ellipsoids.csv", run)
    rms = run.rms_state_error()
    print("rms state error: " + " ".join(f"x_{i + 1}={v:.4g}" for i, v in enumerate(rms)))
    print(f"rms(yhat - y): {run.rms_output_residual():.4g}")
    print(f"rms(v): {run.rms_noise():.4g}")
    print(f"max V_t(x_true): {run.v_true.max():.4g} (d = {exp.budget.d:.4g})")
    print(f"filter time: {run.seconds:.2f} s")
    return EXIT_OK


def cmd_compare(exp, out: Path) -> int:
    result = compare(exp)
    print(f"oracle: {result.oracle}")
    for line in result.lines:
        print(line)
    print("PASS" if result.passed else "FAIL")
    return EXIT_OK if result.passed else EXIT_COMPARE


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "filter": cmd_filter, "compare": cmd_compare}


HELP = {
    "fit": "fit the measurement majorants and write them as CSV",
    "simulate": "simulate a seeded trajectory and report its constraint consumption",
    "filter": "simulate (or read) a trajectory and run the filter on it",
    "compare": "check the filter against a brute-force or closed-form oracle",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minplus-filter",
        description="Min-plus filtering experiments driven by a JSON config.",
        epilog="exit codes: 0 ok, 1 invalid input, 2 numerical failure, 3 oracle comparison failed",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", default=None, help="JSON config (default: the shipped two-state example)")
        p.add_argument("--out", default=None, help="output directory (default: outputs.directory)")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    path = args.config or cfgmod.shipped("default")
    try:
        exp = cfgmod.from_file(path, seed=args.seed)
        return COMMANDS[args.command](exp, exp.outputs_dir(args.out))
    except FitError as exc:
        print(f"fit failed: majorant dips below the target by {-exc.gap:.3e} at theta={exc.theta:.6g}", file=sys.stderr)
        return EXIT_NUMERIC
    except UnboundedBelowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, InvalidArgumentError, InvalidModelError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
