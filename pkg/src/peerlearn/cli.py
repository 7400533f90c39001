"""Command line entry point: serve the API or export reports.

    peerlearn serve --config config.json
    peerlearn export --offering off000002 --report attempts [--research] \\
        --store ./data [--out attempts.csv]
"""

from __future__ import annotations

import argparse
import sys

from . import reports
from .config import ServiceConfig
from .errors import PeerLearnError
from .store import open_store


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peerlearn")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config", help="path to a JSON config file")

    p_export = sub.add_parser("export", help="export a course report CSV")
    p_export.add_argument("--offering", required=True)
    p_export.add_argument(
        "--report",
        required=True,
        choices=list(reports.REPORT_NAMES) + ["knowledge_state", "grades", "deltas"],
    )
    p_export.add_argument("--store", help="storage directory (overrides config)")
    p_export.add_argument("--config", help="path to a JSON config file")
    p_export.add_argument("--research", action="store_true", help="consenting users only")
    p_export.add_argument("--out", help="output file (default: stdout)")
    return parser


def run_export(args) -> str:
    config = ServiceConfig.load(args.config)
    storage = args.store or config.storage_path
    engine = open_store(storage, durable=False, defaults=config.defaults)
    if args.report == "knowledge_state":
        return reports.export_knowledge_state(engine, args.offering, args.research)
    if args.report == "grades":
        return reports.export_grades(engine, args.offering)
    if args.report == "deltas":
        return reports.export_delta_ledger(engine, args.offering, args.research)
    return reports.export_report(engine, args.offering, args.report, args.research)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            from .api import serve

            serve(ServiceConfig.load(args.config))
            return 0
        text = run_export(args)
    except PeerLearnError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
