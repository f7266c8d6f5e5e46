#!/usr/bin/env python3
"""Run every study on synthetic data with the stub answerer and write reports."""
import argparse
import tempfile
from pathlib import Path

from ragprobe.config import ExperimentConfig
from ragprobe.report import write_reports
from ragprobe.runner import STUDIES, run_study
from ragprobe.synthetic import write_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/stub_demo")
    ap.add_argument("-n", type=int, default=20)
    ap.add_argument("--resamples", type=int, default=5000)
    args = ap.parse_args()

    out = Path(args.out_dir)
    with tempfile.TemporaryDirectory() as tmp:
        single = write_dataset(Path(tmp) / "single.json", args.n, seed=0)
        double = write_dataset(Path(tmp) / "double.json", args.n, seed=1, both_supports_retrieved=True)
        for study in STUDIES:
            stub = "strict" if study == "synergy" else "default"
            cfg = ExperimentConfig(
                dataset=str(double if study == "synergy" else single),
                stub=stub,
                resamples=args.resamples,
                cache_dir=str(out / "cache"),
                out_dir=str(out / study),
            )
            rs = run_study(study, cfg)
            paths = write_reports(rs, cfg.out_dir)
            print(f"{study:13s} -> {paths['markdown']}")


if __name__ == "__main__":
    main()
