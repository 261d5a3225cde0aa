"""Command-line entry point: ``fedchain {run,verify-chain,report,gate,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import ledger, synthetic
from .harness import ExperimentConfig, ExperimentError, bundle_from_report, emit_report, run_experiment
from .ids import AccessRequest, IdsError, IdsModel, gate_request
from .metrics import table_csv


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.output:
        cfg.output_dir = args.output
    if args.parallel:
        from dataclasses import replace
        cfg.federation = replace(cfg.federation, parallel=True)
    bundle = run_experiment(cfg)
    files = emit_report(bundle, cfg.output_dir, figures=not args.no_figures)
    sys.stdout.write(table_csv(bundle.table_rows()))
    print(f"# ledger: {bundle.ledger_summary['length']} blocks, verified={bundle.ledger_summary['verified']}, "
          f"head={bundle.ledger_summary['head_hash'][:16]}", file=sys.stderr)
    print(f"# wrote {len(files)} files to {cfg.output_dir} in {bundle.duration_s:.1f}s", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    try:
        chain = ledger.load(args.path)
    except ledger.LedgerError as exc:
        print(f"INVALID: {exc}")
        return 1
    print(f"OK: {len(chain)} blocks, difficulty {chain.difficulty}, head {chain.head.block_hash.hex()}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.report)
    report = json.loads(path.read_text(encoding="utf-8"))
    bundle = bundle_from_report(report)
    text = table_csv(bundle.table_rows())
    out = Path(args.output) if args.output else path.parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "tables.csv").write_text(text, encoding="utf-8")
    if not args.no_figures:
        from . import plotting
        plotting.render_all(report, out)
    sys.stdout.write(text)
    return 0


def cmd_gate(args) -> int:
    model = IdsModel.load(args.model)
    chain = ledger.load(args.ledger)
    line = args.request if args.request != "-" else sys.stdin.readline()
    req = AccessRequest.from_csv_line(args.requester, line)
    decision, chain = gate_request(model, req, chain)
    ledger.save(chain, args.ledger)
    print(decision)
    return 0


def cmd_synth(args) -> int:
    if args.corpus == "nsl-kdd":
        path = synthetic.write_nsl_kdd(args.output, n_rows=args.rows, seed=args.seed, difficulty=args.difficulty)
    else:
        path = synthetic.write_parkinsons(args.output, seed=args.seed)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedchain", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides config and $FEDCHAIN_OUTPUT_DIR)")
    r.add_argument("--parallel", action="store_true", help="train selected clients concurrently")
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify-chain", help="re-verify a chain.jsonl ledger")
    v.add_argument("path")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("report", help="re-render tables.csv and figures from report.json")
    t.add_argument("report")
    t.add_argument("-o", "--output")
    t.add_argument("--no-figures", action="store_true")
    t.set_defaults(func=cmd_report)

    g = sub.add_parser("gate", help="classify one CSV flow record and record the access decision")
    g.add_argument("--model", required=True, help="model.json written by `run`")
    g.add_argument("--ledger", required=True, help="chain.jsonl to verify and extend")
    g.add_argument("--requester", default="requester")
    g.add_argument("request", help="41-field CSV line, or - to read stdin")
    g.set_defaults(func=cmd_gate)

    s = sub.add_parser("synth", help="write a seeded surrogate corpus")
    s.add_argument("corpus", choices=["nsl-kdd", "parkinsons"])
    s.add_argument("output")
    s.add_argument("--rows", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--difficulty", action="store_true", help="append the KDDTrain+ difficulty column")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ExperimentError, ledger.LedgerError, IdsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
