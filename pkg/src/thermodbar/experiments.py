"""Parameter sweeps that tie the pieces together, with deterministic reports."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .coupling_lab import dbar_upper_bounds
from .dbar_oracle import dbar_sandwich
from .gmeasure_lab import GFunction, perturb_toward_uniform
from .potential_lab import CylinderTable, Potential, holder_distance, holder_norm, load_table
from .pressure_lab import gurevich_pressure, spr_classify
from .rpf_transfer import eigen_ratio_deviation, normalized_potential_gap
from .shift_core import BoundViolation

KINDS = ("continuity-g", "lipschitz", "continuity-potential", "pressure-suite", "coupling-suite")
MONOTONE_SLACK = 1e-9


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    schedule: List[float] = field(default_factory=list)
    depth: Optional[int] = None
    seed: int = 0
    n_list: List[int] = field(default_factory=lambda: [1, 2, 3])
    theta: float = 0.5
    output: Optional[str] = None
    csv_output: Optional[str] = None
    record_time: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        s = [float(v) for v in self.schedule]
        if self.kind in ("continuity-g", "lipschitz", "continuity-potential"):
            if not s:
                raise ConfigError("a sweep needs a nonempty schedule")
            if any(v <= 0 for v in s) or any(b >= a for a, b in zip(s, s[1:])):
                raise ConfigError("schedule must be positive and strictly decreasing")
        self.schedule = s

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SweepReport:
    kind: str
    rows: List[Dict[str, Any]]
    metadata: Dict[str, Any]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "metadata": self.metadata, "rows": self.rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        buf = io.StringIO()
        keys = list(self.rows[0])
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _jsonable(r[k]) if not isinstance(r[k], (int, float, str)) else r[k]
                        for k in keys})
        return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _table(source, cls=None) -> CylinderTable:
    """An input given either as a file path or as an inline table document."""
    if isinstance(source, CylinderTable):
        return source
    if isinstance(source, str):
        return load_table(source)
    if isinstance(source, dict):
        if source.get("kind") == "g-function" or cls is GFunction:
            return GFunction.from_dict(source)
        return Potential.from_dict(source)
    raise ConfigError(f"cannot read a table from {source!r}")


def _metadata(config: ExperimentConfig, started: float) -> dict:
    meta = {
        "kind": config.kind,
        "seed": config.seed,
        "schedule": list(config.schedule),
        "versions": {"numpy": np.__version__, "python": platform.python_version()},
    }
    if config.record_time:
        meta["wall_time_s"] = time.perf_counter() - started
    return meta


def _check_decay(values: Sequence[float], schedule: Sequence[float], label: str,
                 factor: float = 4.0, monotone: bool = True) -> None:
    if monotone:
        for i, (a, b) in enumerate(zip(values, values[1:])):
            if b > a + MONOTONE_SLACK:
                raise BoundViolation(f"{label} increased from {a:.6g} to {b:.6g} at row {i + 1}")
    if schedule[0] / schedule[-1] >= 16 and values[0] > 0:
        if not values[-1] < values[0] / factor:
            raise BoundViolation(f"{label} fell only from {values[0]:.6g} to {values[-1]:.6g} "
                                 f"over a {schedule[0] / schedule[-1]:.0f}x reduction")


# --- g-function sweeps ------------------------------------------------------


def g_row(g: GFunction, h: GFunction, n_list: Sequence[int]) -> dict:
    b = dbar_upper_bounds(g, h)
    sw = dbar_sandwich(g, h, n_list, upper=b.coupling_value)
    return {
        "d": b.d,
        "coupling_upper": b.coupling_value,
        "return_time_bound": b.kac_bound,
        "exp_bound": b.exp_bound,
        "lipschitz_bound": b.lipschitz,
        "oracle_lower": sw.lower,
        "L_g": b.L_g,
        "within_hypothesis": b.within_hypothesis,
    }


def _g_rows(config: ExperimentConfig):
    g = _table(config.inputs["g"], GFunction)
    if not isinstance(g, GFunction):
        raise ConfigError("input 'g' must be a g-function")
    rows = []
    for delta in config.schedule:
        h = perturb_toward_uniform(g, delta)
        row = {"delta": delta}
        row.update(g_row(g, h, config.n_list))
        rows.append(row)
    return rows


def run_continuity_g(config: ExperimentConfig) -> SweepReport:
    """d-bar bounds between a g-measure and its perturbations, shrinking with ``d(g, h)``."""
    started = time.perf_counter()
    rows = _g_rows(config)
    _check_decay([r["coupling_upper"] for r in rows], config.schedule,
                 "d-bar upper bound along the g-sweep")
    return SweepReport(config.kind, rows, _metadata(config, started))


def run_lipschitz(config: ExperimentConfig) -> SweepReport:
    """Checks ``oracle <= coupling <= 2 e^{L_g} d(g, h)`` on every row inside the hypothesis."""
    started = time.perf_counter()
    rows = _g_rows(config)
    for r in rows:
        if r["oracle_lower"] > r["coupling_upper"] + 1e-8:
            raise BoundViolation(f"block-transport lower bound exceeds the coupling bound at "
                                 f"delta={r['delta']}")
        if r["within_hypothesis"] and r["coupling_upper"] > r["lipschitz_bound"] + 1e-10:
            raise BoundViolation(f"Lipschitz bound violated at delta={r['delta']}: "
                                 f"{r['coupling_upper']:.6g} > {r['lipschitz_bound']:.6g}")
    return SweepReport(config.kind, rows, _metadata(config, started))


# --- potential sweeps -------------------------------------------------------


def unit_direction(phi: Potential, theta: float, seed: int) -> Potential:
    """Random table of the same depth as ``phi`` with Hölder norm 1."""
    rng = np.random.default_rng(seed)
    w = Potential(phi.alphabet_size, phi.depth, rng.normal(size=phi.alphabet_size**phi.depth))
    return w * (1.0 / holder_norm(w, theta))


def potential_row(phi: Potential, tau: Potential, theta: float, n_list: Sequence[int]) -> dict:
    rec = spr_classify(tau)
    if rec.classification != "SPR":
        raise BoundViolation(f"perturbed potential not strongly positive recurrent "
                             f"(margin {rec.spr_margin:.3g})")
    gap = normalized_potential_gap(phi, tau)
    row = {
        "d_theta": holder_distance(phi, tau, theta).d_theta,
        "normalized_gap": gap.gap,
        "sup_term": gap.sup_term,
        "ratio_term": gap.ratio_term,
        "eigen_ratio_deviation": eigen_ratio_deviation(phi, tau),
        "spr_margin": rec.spr_margin,
    }
    row.update({f"measure_{k}": v for k, v in g_row(gap.g_phi, gap.g_tau, n_list).items()})
    return row


def run_continuity_potential(config: ExperimentConfig) -> SweepReport:
    """Normalized-potential gaps and d-bar bounds between RPF measures along ``phi + delta w``."""
    started = time.perf_counter()
    phi = _table(config.inputs["phi"])
    if not isinstance(phi, Potential):
        raise ConfigError("input 'phi' must be a potential")
    if "direction" in config.inputs:
        w = _table(config.inputs["direction"])
        w = w * (1.0 / holder_norm(w, config.theta))
    else:
        w = unit_direction(phi, config.theta, config.seed)
    rows = []
    for delta in config.schedule:
        row = {"delta": delta}
        row.update(potential_row(phi, phi + w * delta, config.theta, config.n_list))
        rows.append(row)
    _check_decay([r["normalized_gap"] for r in rows], config.schedule,
                 "normalized potential gap")
    _check_decay([r["measure_coupling_upper"] for r in rows], config.schedule,
                 "d-bar upper bound between RPF measures")
    return SweepReport(config.kind, rows, _metadata(config, started))


# --- suites -----------------------------------------------------------------


def run_pressure_suite(config: ExperimentConfig) -> SweepReport:
    started = time.perf_counter()
    rows = []
    for name, source in sorted(config.inputs.items()):
        phi = _table(source)
        est = gurevich_pressure(phi)
        rec = spr_classify(phi)
        rows.append({"name": name, "pressure": est.limit, "perron": est.reference,
                     "spr_margin": rec.spr_margin, "classification": rec.classification})
    return SweepReport(config.kind, rows, _metadata(config, started))


def run_coupling_suite(config: ExperimentConfig) -> SweepReport:
    started = time.perf_counter()
    rows = []
    for name, pair in sorted(config.inputs.items()):
        g, h = _table(pair["g"], GFunction), _table(pair["h"], GFunction)
        row = {"name": name}
        row.update(g_row(g, h, config.n_list))
        rows.append(row)
    return SweepReport(config.kind, rows, _metadata(config, started))


RUNNERS = {
    "continuity-g": run_continuity_g,
    "lipschitz": run_lipschitz,
    "continuity-potential": run_continuity_potential,
    "pressure-suite": run_pressure_suite,
    "coupling-suite": run_coupling_suite,
}


def run(config: ExperimentConfig) -> SweepReport:
    report = RUNNERS[config.kind](config)
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(report.to_json())
    if config.csv_output:
        with open(config.csv_output, "w") as fh:
            fh.write(report.to_csv())
    return report
