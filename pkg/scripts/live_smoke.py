#!/usr/bin/env python3
"""Small live run against an OpenAI-compatible endpoint (e.g. a local Ollama server)."""
import argparse

from ragprobe.config import ExperimentConfig
from ragprobe.report import summarize, write_reports
from ragprobe.runner import run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dataset", help="HotpotQA distractor-format JSON")
    ap.add_argument("--endpoint", default="http://localhost:11434/v1")
    ap.add_argument("--model", default="qwen3:8b")
    ap.add_argument("--limit", type=int, default=20)
    ap.add_argument("--out-dir", default="out/live_smoke")
    args = ap.parse_args()

    cfg = ExperimentConfig(dataset=args.dataset, endpoint=args.endpoint, model=args.model,
                           limit=args.limit, out_dir=args.out_dir)
    rs = run_experiment(cfg)
    write_reports(rs, cfg.out_dir)
    s = summarize(rs)
    ok = (s.deltas["remove"]["correct"].delta_mean >= 0
          and s.deltas["replace"]["correct"].delta_mean >= 0
          and s.conditions["remove"]["trace_div"].mean > s.conditions["duplicate"]["trace_div"].mean)
    for arm, metrics in s.conditions.items():
        print(f"{arm:10s} " + "  ".join(f"{m}={b.mean:.3f}" for m, b in metrics.items()))
    print("smoke check:", "PASS" if ok else "FAIL")


if __name__ == "__main__":
    main()
