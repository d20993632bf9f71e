"""Command-line front end.

Exit codes: 0 success, 1 invalid scenario or input, 2 numerical fault,
3 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .engine import run
from .errors import ScenarioError, SimulationFault
from .results import COLUMNS
from .scenario import bundled_scenarios, load_scenario
from .validation import load_suite, run_entry

EXIT_OK, EXIT_INVALID, EXIT_FAULT, EXIT_VALIDATION = 0, 1, 2, 3

# friendlier names for the most plotted columns
CHANNEL_ALIASES = {
    **{f"force_{a}": f"app_f{a}" for a in "xyz"},
    **{f"torque_{a}": f"app_t{a}" for a in "xyz"},
    **{f"impulse_unsigned_{a}": f"imp_u{a}" for a in "xyz"},
    **{f"impulse_net_{a}": f"imp_n{a}" for a in "xyz"},
}


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(args) -> dict:
    ov = {}
    for item in args.set or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ScenarioError(f"--set expects key=value, got {item!r}")
        ov[key] = _value(val)
    if args.dt is not None:
        ov["sim.dt_s"] = args.dt
    if args.duration is not None:
        ov["sim.duration_s"] = args.duration
    return ov


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.scenario, _overrides(args))
    except (ScenarioError, OSError) as exc:
        _err(str(exc))
        return EXIT_INVALID
    try:
        telemetry, summary = run(scenario)
    except SimulationFault as exc:
        _err(str(exc))
        return EXIT_FAULT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    telemetry.write_csv(out / "telemetry.csv")
    (out / "summary.json").write_text(summary.to_json() + "\n")
    if args.quiet:
        print(f"{scenario.name}: wrote {out / 'telemetry.csv'} and {out / 'summary.json'}")
    else:
        print(summary.to_json())
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        entries = load_suite(args.suite)
        overrides = _overrides(args)
    except (ScenarioError, OSError, json.JSONDecodeError) as exc:
        _err(str(exc))
        return EXIT_INVALID
    failed = False
    rows = []
    for entry in entries:
        try:
            report = run_entry(entry, overrides)
        except (ScenarioError, OSError, KeyError, ValueError) as exc:
            _err(f"{entry.name}: {exc}")
            return EXIT_INVALID
        except SimulationFault as exc:
            _err(f"{entry.name}: {exc}")
            return EXIT_FAULT
        failed |= not report.passed
        rows.append((entry.name, report))
        if not args.quiet:
            print(f"{'PASS' if report.passed else 'FAIL'}  {entry.name}")
            print(report.format())
    width = max(len(name) for name, _ in rows)
    print()
    for name, report in rows:
        print(f"{name:<{width}}  {'PASS' if report.passed else 'FAIL'}")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_plot_data(args) -> int:
    channels = [c for c in (args.channels or "").split(",") if c]
    if not channels:
        _err("no channels given; valid names: " + ", ".join(COLUMNS))
        return EXIT_INVALID
    resolved = [CHANNEL_ALIASES.get(c, c) for c in channels]
    unknown = [c for c, r in zip(channels, resolved) if r not in COLUMNS]
    if unknown:
        _err(f"unknown channel(s) {', '.join(unknown)}; valid names: " + ", ".join(COLUMNS))
        return EXIT_INVALID
    try:
        with open(args.telemetry, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != COLUMNS:
                _err(f"{args.telemetry}: not a telemetry file")
                return EXIT_INVALID
            rows = list(reader)
    except (OSError, StopIteration) as exc:
        _err(f"cannot read {args.telemetry}: {exc}")
        return EXIT_INVALID
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t_col = COLUMNS.index("t_s")
    for name, col in zip(channels, resolved):
        i = COLUMNS.index(col)
        path = out / f"{name}.dat"
        # cells are copied as written so no precision is lost
        with open(path, "w") as fh:
            fh.write(f"# t_s {col}\n")
            for r in rows:
                fh.write(f"{r[t_col]} {r[i]}\n")
        if not args.quiet:
            print(path)
    return EXIT_OK


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dt", type=float, help="override sim.dt_s")
    p.add_argument("--duration", type=float, help="override sim.duration_s")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any dotted scenario key; VALUE is parsed as JSON when possible")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ehsim", description=__doc__.splitlines()[0])
    parser.add_argument("--seedless", action="store_true",
                        help="accepted for compatibility; the simulator has no random state")
    parser.add_argument("--quiet", action="store_true", help="print only the essentials")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write telemetry.csv and summary.json")
    p.add_argument("scenario", help="scenario file or bundled name: " + ", ".join(_bundled()))
    p.add_argument("--out", default="out", help="output directory (default: out)")
    _add_overrides(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="run a validation suite against reference summaries")
    p.add_argument("suite", nargs="?", default="reference", help="suite file or bundled name (default: reference)")
    _add_overrides(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot-data", help="export telemetry channels as two-column series")
    p.add_argument("telemetry", help="telemetry.csv written by simulate")
    p.add_argument("--channels", default="", help="comma-separated CSV column names")
    p.add_argument("--out", default="plot", help="output directory (default: plot)")
    p.set_defaults(func=cmd_plot_data)

    for p in sub.choices.values():
        p.add_argument("--seedless", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def _bundled() -> list[str]:
    try:
        return bundled_scenarios()
    except OSError:
        return []


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
