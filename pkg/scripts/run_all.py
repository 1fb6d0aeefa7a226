"""Run every experiment with the default configuration and write results.

    python3 scripts/run_all.py [--out results] [--seed 7]
"""
import argparse
import sys

from spfq.cli import main


def run(out, seed):
    codes = {}
    for cmd in (["design"], ["geem"], ["recon"], ["rotation"], ["angular", "--step", "5"], ["bench-sht"]):
        codes[cmd[0]] = main(["--out", out, "--seed", str(seed), *cmd])
    return codes


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=7)
    a = p.parse_args()
    codes = run(a.out, a.seed)
    for k, v in codes.items():
        print(f"{k:10s} exit {v}")
    sys.exit(max(codes.values()))
