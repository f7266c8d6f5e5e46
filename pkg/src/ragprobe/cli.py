"""Command-line entry point: `ragprobe {run,zero,sweep,dup-position,synergy,report}`."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .report import load_runset, write_reports
from .runner import STUDIES, run_study

log = logging.getLogger("ragprobe")


def _add_study_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON config file; flags override its values")
    p.add_argument("--dataset", help="dataset JSON array")
    p.add_argument("--dataset-kind", choices=["hotpotqa", "2wiki"])
    p.add_argument("--limit", type=int, help="use the first N examples (or a seeded sample of N)")
    p.add_argument("--sample-seed", type=int, help="draw --limit examples at random with this seed")
    p.add_argument("--seed", type=int, help="global seed for bootstrap and easy replacement (default 42)")
    p.add_argument("--k", type=int, help="BM25 top-k (default 5)")
    p.add_argument("--model", help="model name sent to the endpoint")
    p.add_argument("--endpoint", help="OpenAI-compatible base URL")
    p.add_argument("--stub", nargs="?", const="default", choices=["default", "strict"],
                   help="answer with the deterministic stub; --stub=strict needs every support")
    p.add_argument("--hardness", choices=["easy", "medium", "hard"], help="replacement hardness for `run`")
    p.add_argument("--dup-position", choices=["front", "after_original", "end"])
    p.add_argument("--resamples", type=int)
    p.add_argument("--max-in-flight", type=int)
    p.add_argument("--cache-dir")
    p.add_argument("--out-dir")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    base = load_config(args.config) if args.config else ExperimentConfig()
    return base.replace(
        dataset=args.dataset,
        dataset_kind=args.dataset_kind,
        limit=args.limit,
        sample_seed=args.sample_seed,
        seed=args.seed,
        k=args.k,
        model=args.model,
        endpoint=args.endpoint,
        stub=args.stub,
        hardness=args.hardness,
        dup_position=args.dup_position,
        resamples=args.resamples,
        max_in_flight=args.max_in_flight,
        cache_dir=args.cache_dir,
        out_dir=args.out_dir,
    )


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragprobe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "original + remove/replace/duplicate on the BM25 top-k",
        "zero": "original vs zero-retrieval control",
        "sweep": "replacement hardness sweep (easy/medium/hard)",
        "dup-position": "duplicate at front / after original / end",
        "synergy": "two-support joint removal ablation",
    }
    for name in STUDIES:
        _add_study_flags(sub.add_parser(name, help=helps[name]))
    rep = sub.add_parser("report", help="re-render reports from a saved runset.json")
    rep.add_argument("runset", help="path to runset.json")
    rep.add_argument("--out-dir", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            rs = load_runset(args.runset)
            out_dir = args.out_dir
        else:
            config = build_config(args)
            rs = run_study(args.command, config)
            out_dir = config.out_dir
            print(f"{args.command}: {len(rs.records)} records, {rs.model_calls} model calls")
        for kind, path in write_reports(rs, out_dir).items():
            print(f"wrote {kind}: {path}")
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
