#!/usr/bin/env python3
"""Write a synthetic HotpotQA-format dataset for stub runs."""
import argparse

from ragprobe.synthetic import write_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output JSON path")
    ap.add_argument("-n", type=int, default=20, help="number of examples")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--both-supports", action="store_true",
                    help="put both supporting paragraphs in the BM25 top-5 (synergy study)")
    args = ap.parse_args()
    path = write_dataset(args.out, args.n, args.seed, args.both_supports)
    print(f"wrote {args.n} examples to {path}")


if __name__ == "__main__":
    main()
