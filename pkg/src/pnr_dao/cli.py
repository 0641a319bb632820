"""``pnr-dao`` command line: validate, run, report, gas."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import PnRError
from .gas_model import GasConfig, OpKind, cost_report_csv
from .simulator import MetricsReport, load_scenario_file, report, run

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _validate(args) -> int:
    try:
        sc = load_scenario_file(args.scenario)
    except PnRError as exc:
        print(f"invalid: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"ok: {len(sc.agents)} agents, {len(sc.script)} actions")
    return EXIT_OK


def _run(args) -> int:
    try:
        sc = load_scenario_file(args.scenario)
    except PnRError as exc:
        print(f"invalid: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    log, metrics = run(sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.log").write_text(log.dumps(), encoding="utf-8")
    (out / "metrics.csv").write_text(metrics.to_csv(), encoding="utf-8")
    print(f"{len(log)} events written to {out / 'events.log'}")
    return EXIT_OK


def _report(args) -> int:
    text = Path(args.metrics).read_text(encoding="utf-8")
    try:
        metrics = MetricsReport.from_csv(text)
    except ValueError:
        metrics = MetricsReport.from_table(text)
    sys.stdout.write(report(metrics, args.format))
    return EXIT_OK


def _gas(args) -> int:
    config = GasConfig.load(args.table)
    sys.stdout.write(cost_report_csv([OpKind.parse(args.op)], args.n, config))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnr-dao", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario against the schema")
    p.add_argument("scenario")
    p.set_defaults(func=_validate)

    p = sub.add_parser("run", help="execute a scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", default=".", help="directory for events.log and metrics.csv")
    p.set_defaults(func=_run)

    p = sub.add_parser("report", help="render a metrics file")
    p.add_argument("metrics")
    p.add_argument("--format", default="csv", help="csv or table")
    p.set_defaults(func=_report)

    p = sub.add_parser("gas", help="print gas, USD and L1->L2 reduction for one op")
    p.add_argument("--table", required=True, help="gas config JSON")
    p.add_argument("--op", required=True, help="op kind, e.g. Vote or BatchUpdate")
    p.add_argument("--n", type=int, default=1, help="batch size")
    p.set_defaults(func=_gas)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PnRError, OSError, ValueError) as exc:
        code = exc.code if isinstance(exc, PnRError) else type(exc).__name__
        print(f"error: {code}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
