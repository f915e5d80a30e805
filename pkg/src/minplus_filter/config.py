"""JSON experiment configuration: schema validation and object construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .approx import (
    FunctionTable,
    MajorantFit,
    ScalarQuadratic,
    balanced_anchors,
    equispaced,
    fit_majorant,
    scale_fit,
)
from .errors import ConfigError
from .filtering import OutputChannel
from .minplus import PruneConfig, lattice
from .model import ContinuousModel, calibrate_amplitudes, discretize_reverse_euler
from .oracle import GridSpec

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}
_INTERVAL = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj(
    {
        "name": {"type": "string"},
        "system": _obj(
            {
                "Ac": _MAT,
                "Dc": _MAT,
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "xbar0": _VEC,
                "N0": _MAT,
                "d": {"type": "number", "exclusiveMinimum": 0},
                "Qc": _MAT,
                "Rc": {"type": "number", "exclusiveMinimum": 0},
            },
            ["Ac", "Dc", "tau", "xbar0", "N0", "d", "Qc", "Rc"],
        ),
        "output": _obj(
            {
                "kind": {"enum": ["linear", "sin-table", "custom-table"]},
                "s": _VEC,
                "R": {"type": "number", "exclusiveMinimum": 0},
                "gain": _NUM,
                "interval": _INTERVAL,
                "anchors": {"oneOf": [{"type": "integer", "minimum": 1}, _VEC]},
                "anchor_placement": {"enum": ["uniform", "balanced"]},
                "curvature": _obj(
                    {"value": {"type": "number", "minimum": 0}, "square": {"type": "number", "minimum": 0}}
                ),
                "table": {"type": "string"},
                "table_samples": {"type": "integer", "minimum": 2},
            },
            ["kind", "s"],
        ),
        "run": _obj(
            {
                "T": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "x0": _VEC,
                "noise": {
                    "oneOf": [
                        _obj(
                            {
                                "mode": {"const": "auto"},
                                "share": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                                "w_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                            },
                            ["mode"],
                        ),
                        _obj(
                            {
                                "mode": {"const": "fixed"},
                                "w_amplitude": {"oneOf": [{"type": "number", "minimum": 0}, _VEC]},
                                "v_amplitude": {"type": "number", "minimum": 0},
                            },
                            ["mode", "w_amplitude", "v_amplitude"],
                        ),
                    ]
                },
                "trajectory": {"type": "string"},
            },
            ["T", "seed"],
        ),
        "prune": _obj(
            {
                "max_forms": {"type": "integer", "minimum": 1},
                "box": _obj({"lo": _VEC, "hi": _VEC}, ["lo", "hi"]),
                "points": {"type": "integer", "minimum": 2},
                "exact_first": {"type": "boolean"},
                "track": {"type": "number", "minimum": 0},
            },
            ["max_forms", "box"],
        ),
        "outputs": _obj(
            {
                "directory": {"type": "string"},
                "write": {
                    "type": "array",
                    "items": {"enum": ["fits", "trajectory", "estimates", "ellipsoids", "values"]},
                    "uniqueItems": True,
                },
            }
        ),
        "compare": _obj(
            {
                "oracle": {"enum": ["auto", "grid", "information"]},
                "horizon": {"type": "integer", "minimum": 1},
                "atol": {"type": "number", "minimum": 0},
                "lower_slack": {"type": "number", "minimum": 0},
                "upper_tolerance": {"type": "number", "minimum": 0},
                "interior_margin": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
                "grid": _obj(
                    {
                        "lo": _VEC,
                        "hi": _VEC,
                        "points": {"type": "integer", "minimum": 3},
                        "w_lo": _VEC,
                        "w_hi": _VEC,
                        "w_points": {"type": "integer", "minimum": 3},
                    },
                    ["lo", "hi", "points", "w_lo", "w_hi", "w_points"],
                ),
            }
        ),
    },
    ["system", "output", "run", "prune"],
)

_VALIDATOR = Draft202012Validator(SCHEMA)


@dataclass
class Fits:
    """Unscaled majorants of ``-c``, ``+c`` and ``c^2`` plus the exact ``c``."""

    neg_pos: MajorantFit
    neg_neg: MajorantFit
    square: MajorantFit
    func: object

    def channel(self, s, R) -> OutputChannel:
        return OutputChannel(
            s, R, scale_fit(self.neg_pos, R), scale_fit(self.neg_neg, R), scale_fit(self.square, R), self.func
        )


@dataclass
class Experiment:
    """Everything derived from one configuration document."""

    raw: dict
    base_dir: Path
    model: ContinuousModel
    tau: float
    reverse: object
    forward: object
    budget: object
    s: np.ndarray
    kind: str
    gain: float
    fits: Fits | None = None
    prune: PruneConfig | None = None
    T: int = 1
    seed: int = 0
    x0: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def n(self):
        return self.model.n

    def channel(self) -> OutputChannel:
        if self.fits is None:
            self.fits = build_fits(self.raw["output"], self.base_dir)
        return self.fits.channel(self.s, self.budget.R)

    def output_function(self):
        """``x -> c(s^T x)`` for simulation."""
        func = self.fits.func if self.fits is not None else _exact_function(self.raw["output"], self.base_dir)
        s = self.s
        return lambda x: float(func(float(s @ np.asarray(x, dtype=float))))

    def amplitudes(self):
        noise = self.raw["run"].get("noise", {"mode": "auto"})
        if noise["mode"] == "fixed":
            return noise["w_amplitude"], float(noise["v_amplitude"])
        share = noise.get("share", 0.5)
        frac = noise.get("w_fraction", 0.5)
        return calibrate_amplitudes(self.budget, self.T, self.x0, self.reverse.p, share, frac)

    def outputs_dir(self, override=None) -> Path:
        if override is not None:
            return Path(override)
        return Path(self.raw.get("outputs", {}).get("directory", "out"))

    def wants(self, what) -> bool:
        return what in self.raw.get("outputs", {}).get("write", ["fits", "trajectory", "estimates", "ellipsoids"])

    def trajectory_path(self) -> Path | None:
        path = self.raw["run"].get("trajectory")
        return None if path is None else (self.base_dir / path)

    def compare_grid(self) -> GridSpec:
        g = self.raw.get("compare", {}).get("grid")
        if g is None:
            raise ConfigError("compare.grid is required for the grid oracle")
        try:
            return GridSpec(g["lo"], g["hi"], g["points"], g["w_lo"], g["w_hi"], g["w_points"])
        except ValueError as exc:
            raise ConfigError(f"compare.grid: {exc}") from exc


def validate(doc) -> None:
    """Raise :class:`ConfigError` listing every schema violation."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        lines = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


def load(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate(doc)
    return doc


def shipped(name="default") -> Path:
    """Path of a configuration bundled with the package."""
    return Path(str(resources.files(__package__) / "configs" / f"{name}.json"))


def _interval(out):
    return tuple(float(v) for v in out.get("interval", (-np.pi, np.pi)))


def _anchors(out, interval, table, curvature):
    spec = out.get("anchors", 17)
    if not isinstance(spec, int):
        return np.asarray(spec, dtype=float)
    if out.get("anchor_placement", "uniform") == "balanced":
        return balanced_anchors(table, interval, spec, curvature)
    return equispaced(interval, spec)


def _exact_function(out, base_dir):
    kind = out["kind"]
    gain = float(out.get("gain", 1.0))
    if kind == "linear":
        return lambda t: gain * np.asarray(t, dtype=float)
    if kind == "sin-table":
        return lambda t: gain * np.sin(t)
    spline = _custom_table(out, base_dir).spline()
    return lambda t: gain * spline(t)


def _custom_table(out, base_dir) -> FunctionTable:
    if "table" not in out:
        raise ConfigError("output.table is required for kind custom-table")
    try:
        return FunctionTable.read_csv(base_dir / out["table"])
    except (OSError, ValueError) as exc:
        raise ConfigError(f"output.table: {exc}") from exc


def _linear_fits(gain) -> Fits:
    inf = (-np.inf, np.inf)
    return Fits(
        MajorantFit([ScalarQuadratic(0.0, -gain, 0.0)], inf, 0.0),
        MajorantFit([ScalarQuadratic(0.0, gain, 0.0)], inf, 0.0),
        MajorantFit([ScalarQuadratic(gain * gain, 0.0, 0.0)], inf, 0.0),
        lambda t: gain * np.asarray(t, dtype=float),
    )


def build_fits(out: dict, base_dir=Path(".")) -> Fits:
    """Fit the three output majorants described by an ``output`` block.

    Raises :class:`~minplus_filter.errors.FitError` when a curvature bound is
    too small for the data.
    """
    kind = out["kind"]
    gain = float(out.get("gain", 1.0))
    if kind == "linear":
        return _linear_fits(gain)
    interval = _interval(out)
    samples = int(out.get("table_samples", 20001))
    if kind == "sin-table":
        base = FunctionTable.from_function(
            lambda t: gain * np.sin(t), lambda t: gain * np.cos(t), interval, samples
        )
        curv = out.get("curvature", {})
        c_val = float(curv.get("value", abs(gain)))
        c_sq = float(curv.get("square", 2.0 * gain * gain))
    else:
        raw = _custom_table(out, base_dir)
        base = FunctionTable(raw.theta, gain * raw.f, gain * raw.fprime)
        curv = out.get("curvature")
        if not curv or "value" not in curv or "square" not in curv:
            raise ConfigError("custom-table outputs need curvature.value and curvature.square")
        c_val, c_sq = float(curv["value"]), float(curv["square"])
    square = FunctionTable(base.theta, base.f**2, 2.0 * base.f * base.fprime)
    neg = base.scaled(-1.0)
    spline = base.spline()
    return Fits(
        fit_majorant(neg, interval, _anchors(out, interval, neg, c_val), c_val),
        fit_majorant(base, interval, _anchors(out, interval, base, c_val), c_val),
        fit_majorant(square, interval, _anchors(out, interval, square, c_sq), c_sq),
        spline if kind == "custom-table" else (lambda t: gain * np.sin(t)),
    )


def _prune_config(block, n) -> PruneConfig:
    lo = np.asarray(block["box"]["lo"], dtype=float)
    hi = np.asarray(block["box"]["hi"], dtype=float)
    if lo.shape != (n,) or hi.shape != (n,) or np.any(lo >= hi):
        raise ConfigError("prune.box needs lo < hi with one entry per state")
    points = int(block.get("points", 21))
    return PruneConfig(
        max_forms=int(block["max_forms"]),
        grid=lattice(lo, hi, points),
        exact_first=bool(block.get("exact_first", True)),
        track=float(block.get("track", 0.0)),
        track_points=points,
    )


def build(doc: dict, base_dir=Path("."), seed=None, fit=True) -> Experiment:
    """Turn a validated document into model objects.

    ``fit=False`` defers the majorant fits until :meth:`Experiment.channel`
    is first called.
    """
    sysb, out, run = doc["system"], doc["output"], doc["run"]
    try:
        cm = ContinuousModel(sysb["Ac"], sysb["Dc"], sysb["Qc"], sysb["Rc"], sysb["N0"], sysb["xbar0"], sysb["d"])
        rev, fwd, budget = discretize_reverse_euler(cm, sysb["tau"], R=out.get("R"))
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from exc
    s = np.asarray(out["s"], dtype=float)
    if s.shape != (cm.n,) or not np.any(s):
        raise ConfigError("output.s must be a nonzero vector with one entry per state")
    x0 = np.asarray(run.get("x0", sysb["xbar0"]), dtype=float)
    if x0.shape != (cm.n,):
        raise ConfigError("run.x0 must have one entry per state")
    exp = Experiment(
        raw=doc,
        base_dir=Path(base_dir),
        model=cm,
        tau=float(sysb["tau"]),
        reverse=rev,
        forward=fwd,
        budget=budget,
        s=s,
        kind=out["kind"],
        gain=float(out.get("gain", 1.0)),
        prune=_prune_config(doc["prune"], cm.n),
        T=int(run["T"]),
        seed=int(run["seed"] if seed is None else seed),
        x0=x0,
    )
    if fit:
        exp.fits = build_fits(out, exp.base_dir)
    return exp


def from_file(path, seed=None, fit=True) -> Experiment:
    path = Path(path)
    return build(load(path), path.parent, seed=seed, fit=fit)
