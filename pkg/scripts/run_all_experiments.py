"""Run every experiment preset into one output tree and print the checks.

Usage: python scripts/run_all_experiments.py [OUT_DIR] [PRESET ...]
"""
import argparse
import logging
import sys
import time
from pathlib import Path

from lemp.harness.experiments import PRESETS, run_experiment


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out", nargs="?", default="runs")
    p.add_argument("presets", nargs="*", default=list(PRESETS))
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    ok = True
    for name in args.presets:
        t0 = time.perf_counter()
        res = run_experiment(name, Path(args.out) / name)
        print(f"== {name} ({time.perf_counter() - t0:.0f} s)")
        for c in res.checks:
            print(f"   {'PASS' if c.passed else 'FAIL'} {c.name} = {c.value:.4g} {c.op} {c.limit:g}")
        ok &= res.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
