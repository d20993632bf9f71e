"""Validation suites: scenarios paired with reference summaries and tolerances.

A suite is a JSON object with an ``entries`` list. Each entry names a
scenario (file path relative to the suite, or a bundled name), an optional
``reference`` (inline object or path to a JSON summary) and ``tolerances``
in the form accepted by :func:`~ehsim.results.compare_summary`. Entries with
``"kind": "station_ramp"`` run :func:`~ehsim.engine.station_ramp_errors` over
``fractions`` and expose ``extension_error_probes`` and
``extension_error_spread`` for comparison.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .engine import run, station_ramp_errors
from .errors import ScenarioError
from .results import ComparisonReport, compare_summary
from .scenario import load_scenario, resolve_scenario_path

ENTRY_KEYS = {"name", "kind", "scenario", "reference", "tolerances", "fractions", "overrides"}


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    kind: str
    scenario: Path
    reference: dict[str, Any] | None
    tolerances: dict[str, dict[str, Any]]
    fractions: tuple[float, ...] = ()
    overrides: dict[str, Any] | None = None


def resolve_suite_path(ref: str | Path) -> Path:
    """Accept a file path or the name of a bundled suite (``reference``)."""
    path = Path(ref)
    if path.exists():
        return path
    name = path.name[:-5] if path.name.endswith(".json") else path.name
    bundled = resources.files("ehsim") / "suites" / f"{name}.json"
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError(f"suite file not found: {ref}")


def _resolve_scenario(ref: str, root: Path) -> Path:
    local = root / ref
    if local.exists():
        return local
    return resolve_scenario_path(ref)


def load_suite(ref: str | Path) -> list[SuiteEntry]:
    path = resolve_suite_path(ref)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    entries = doc.get("entries") if isinstance(doc, dict) else None
    if not entries:
        raise ScenarioError(f"{path}: suite has no entries")
    root = path.parent
    out = []
    for i, e in enumerate(entries):
        unknown = set(e) - ENTRY_KEYS
        if unknown:
            raise ScenarioError(f"{path}: entry {i} has unknown keys {sorted(unknown)}")
        if "scenario" not in e or "tolerances" not in e:
            raise ScenarioError(f"{path}: entry {i} needs 'scenario' and 'tolerances'")
        kind = e.get("kind", "run")
        if kind not in ("run", "station_ramp"):
            raise ScenarioError(f"{path}: entry {i} has unknown kind {kind!r}")
        reference = e.get("reference")
        if isinstance(reference, str):
            reference = json.loads((root / reference).read_text())
        fractions = tuple(float(f) for f in e.get("fractions", ()))
        if kind == "station_ramp" and not fractions:
            raise ScenarioError(f"{path}: station_ramp entry {i} needs 'fractions'")
        out.append(
            SuiteEntry(
                str(e.get("name", e["scenario"])), kind, _resolve_scenario(e["scenario"], root),
                reference, e["tolerances"], fractions, e.get("overrides"),
            )
        )
    return out


def run_entry(entry: SuiteEntry, overrides: dict[str, Any] | None = None) -> ComparisonReport:
    """Run one entry and compare it. ``overrides`` apply on top of the entry's own."""
    ov = {**(entry.overrides or {}), **(overrides or {})}
    if entry.kind == "station_ramp":
        errors = station_ramp_errors(entry.scenario, entry.fractions, overrides=ov)
        mags = [abs(v) for v in errors]
        spread = max(mags) / min(mags) if min(mags) > 0 else float("inf")
        result = {"extension_error_probes": errors, "extension_error_spread": spread}
    else:
        _, result = run(load_scenario(entry.scenario, ov))
    return compare_summary(result, entry.reference, entry.tolerances)
