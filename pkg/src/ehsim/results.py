"""Telemetry tables and run summaries, with tolerance-based comparison."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

COLUMNS = (
    "t_s",
    "pos_x_m", "pos_y_m", "pos_z_m",
    "q_w", "q_x", "q_y", "q_z",
    "vel_x", "vel_y", "vel_z",
    "omg_x", "omg_y", "omg_z",
    "joint_pan_rad", "joint_pitch_rad", "joint_y_m",
    "joint_pan_rate", "joint_pitch_rate", "joint_y_rate",
    "cmd_fx", "cmd_fy", "cmd_fz", "cmd_tx", "cmd_ty", "cmd_tz",
    "app_fx", "app_fy", "app_fz", "app_tx", "app_ty", "app_tz",
    "eff_pan_nm", "eff_pitch_nm", "eff_y_n",
    "sat_flags",
    "imp_ux", "imp_uy", "imp_uz",
    "imp_nx", "imp_ny", "imp_nz",
)
COLUMN_INDEX = {name: i for i, name in enumerate(COLUMNS)}


@dataclass(frozen=True, eq=False)
class Telemetry:
    """Uniformly sampled run history, one row per sample, columns in :data:`COLUMNS`.

    Joint columns describe the first hook system.
    """

    data: np.ndarray

    def __len__(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COLUMN_INDEX[name]]

    def write_csv(self, path: str | Path) -> None:
        # repr() prints the shortest string that round-trips the float exactly
        flags = COLUMN_INDEX["sat_flags"]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for row in self.data.tolist():
                cells = [repr(v) for v in row]
                cells[flags] = str(int(row[flags]))
                fh.write(",".join(cells) + "\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> "Telemetry":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != COLUMNS:
                raise ValueError(f"{path}: unexpected telemetry header")
            rows = [[float(c) for c in r] for r in reader]
        return cls(np.array(rows, dtype=np.float64).reshape(-1, len(COLUMNS)))


@dataclass(frozen=True)
class Event:
    time_s: float
    kind: str
    channel: str


@dataclass
class RunSummary:
    scenario: str
    duration_s: float
    dt_s: float
    final_position_m: list[float]
    final_euler_rad: list[float]
    final_position_error_m: float
    final_attitude_error_rad: float
    max_position_error_m: float
    max_attitude_error_rad: float
    max_abs_force_n: list[float]
    max_abs_torque_nm: list[float]
    impulse_unsigned_ns: list[float]
    impulse_net_ns: list[float]
    max_joint_effort: list[float]
    max_joint_effort_commanded: list[float]
    final_joints: list[float]
    final_extension_m: float
    final_joint_error: list[float]
    max_joint_error: list[float]
    linear_momentum_change_ns: float = 0.0
    angular_momentum_change_nms: float = 0.0
    com_displacement_m: float = 0.0
    extension_error_probes: list[float] = field(default_factory=list)
    extension_error_spread: float | None = None
    events: list[Event] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunSummary":
        d = dict(d)
        d["events"] = [Event(**e) for e in d.get("events", [])]
        return cls(**d)


@dataclass
class ImpulseAccumulator:
    unsigned: np.ndarray = field(default_factory=lambda: np.zeros(3))
    net: np.ndarray = field(default_factory=lambda: np.zeros(3))


def accumulate_impulse(acc: ImpulseAccumulator, force, dt: float) -> ImpulseAccumulator:
    """Add ``|F| dt`` per axis to the unsigned total and ``F dt`` to the net total."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    f = np.asarray(force, dtype=np.float64).reshape(3)
    return ImpulseAccumulator(acc.unsigned + np.abs(f) * dt, acc.net + f * dt)


@dataclass(frozen=True)
class FieldCheck:
    field: str
    value: float
    reference: float | None
    passed: bool
    rule: str


@dataclass
class ComparisonReport:
    checks: list[FieldCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> list[FieldCheck]:
        return [c for c in self.checks if not c.passed]

    def format(self) -> str:
        lines = []
        for c in self.checks:
            ref = "" if c.reference is None else f" ref={c.reference:.6g}"
            lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.field} = {c.value:.6g}{ref}  ({c.rule})")
        return "\n".join(lines)


def _field_values(summary: RunSummary | dict, name: str) -> list[float]:
    data = summary.to_dict() if isinstance(summary, RunSummary) else summary
    if name not in data:
        raise KeyError(f"summary has no field {name!r}")
    value = data[name]
    if value is None:
        return [math.nan]
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(value)]


def _per_element(value, n: int, name: str, key: str) -> list[float]:
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ValueError(f"tolerance {name}.{key} has {len(value)} entries, field has {n}")
        return [float(v) for v in value]
    return [float(value)] * n


def compare_summary(
    result: RunSummary | dict,
    reference: RunSummary | dict | None,
    tolerances: dict[str, dict[str, float]],
) -> ComparisonReport:
    """Check each toleranced field of ``result``.

    Per field, ``abs`` and ``rel`` bound ``|value - reference|`` by
    ``abs + rel * |reference|``; ``min`` and ``max`` bound the value itself.
    Vector fields are checked element by element; a rule may be a scalar
    shared by every element or a list with one bound per element. A NaN value
    always fails.
    """
    checks: list[FieldCheck] = []
    for name, tol in tolerances.items():
        unknown = set(tol) - {"abs", "rel", "min", "max"}
        if unknown:
            raise ValueError(f"tolerance for {name!r} has unknown rules {sorted(unknown)}")
        values = _field_values(result, name)
        refs: Iterable[float | None] = [None] * len(values)
        if "abs" in tol or "rel" in tol:
            if reference is None:
                raise ValueError(f"field {name!r} needs a reference value")
            refs = _field_values(reference, name)
            if len(refs) != len(values):
                raise ValueError(f"field {name!r}: reference has {len(refs)} entries, result {len(values)}")
        rule = {key: _per_element(tol[key], len(values), name, key) for key in tol}
        for i, (v, r) in enumerate(zip(values, refs)):
            label = name if len(values) == 1 else f"{name}[{i}]"
            ok = math.isfinite(v)
            rules = []
            if r is not None:
                bound = rule.get("abs", [0.0] * len(values))[i] + rule.get("rel", [0.0] * len(values))[i] * abs(r)
                ok = ok and abs(v - r) <= bound
                rules.append(f"|diff|<={bound:.3g}")
            if "min" in rule:
                ok = ok and v >= rule["min"][i]
                rules.append(f">={rule['min'][i]:.6g}")
            if "max" in rule:
                ok = ok and v <= rule["max"][i]
                rules.append(f"<={rule['max'][i]:.6g}")
            checks.append(FieldCheck(label, v, r, ok, ", ".join(rules)))
    return ComparisonReport(checks)
