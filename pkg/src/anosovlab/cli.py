"""Command-line entry point: one subcommand per experiment kind.

    lab <kind> --config path.json [--out dir] [--precision-bits N] [--threads K]
    lab preset <name> [--out dir] [--run]
    lab presets

Exit code 0 iff every assertion embedded in the config passes. All numeric
output is full-precision decimal; reports are written atomically.
"""

from __future__ import annotations

import argparse
import json
import sys

from .runner import KINDS, PRESETS, preset, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment from a config file")
        p.add_argument("--config", required=True, help="path to the experiment config JSON")
        p.add_argument("--out", default=None, help="artifact output directory")
        p.add_argument("--precision-bits", type=int, default=None, help="override model precision")
        p.add_argument("--threads", type=int, default=1, help="reserved; the pipeline is deterministic single-process")
    pp = sub.add_parser("preset", help="materialize (and optionally run) a named preset")
    pp.add_argument("name")
    pp.add_argument("--out", default=None)
    pp.add_argument("--run", action="store_true")
    sub.add_parser("presets", help="list preset names")
    args = parser.parse_args(argv)

    if args.command == "presets":
        for name in sorted(PRESETS):
            print(name)
        return 0
    if args.command == "preset":
        cfg = preset(args.name)
        if not args.run:
            json.dump(cfg, sys.stdout, indent=1, sort_keys=True)
            print()
            return 0
        report = run(cfg, out_dir=args.out)
        _print_report(report)
        return 0 if report.passed else 1

    with open(args.config) as f:
        cfg = json.load(f)
    if cfg.get("kind") != args.command:
        raise SystemExit(f"config kind {cfg.get('kind')!r} does not match subcommand {args.command!r}")
    if args.precision_bits is not None:
        cfg["model"]["precision_bits"] = args.precision_bits
    report = run(cfg, out_dir=args.out)
    _print_report(report)
    return 0 if report.passed else 1


def _print_report(report) -> None:
    for name, ok, detail in report.assertions:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    print(json.dumps(report.payload, sort_keys=True, indent=1))


if __name__ == "__main__":
    sys.exit(main())
