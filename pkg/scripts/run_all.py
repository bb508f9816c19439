"""Run every config in scripts/configs one after another and tabulate the checks.

Recipes run sequentially; the heavy ones are the stability matrix (a few
minutes per grid of perturbations) and the existence table (about a minute).
"""
import argparse
import sys
import time
from pathlib import Path

from fkdv.experiments import load_config, run

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default="results", help="root directory for all recipe outputs")
    ap.add_argument("--skip", nargs="*", default=[], help="recipe names to leave out")
    args = ap.parse_args()
    failed = []
    for path in sorted((HERE / "configs").glob("*.ini")):
        cfg = load_config(path)
        if cfg.recipe in args.skip:
            continue
        t0 = time.perf_counter()
        man = run(cfg, Path(args.output) / cfg.recipe)
        bad = [k for k, v in man.checks.items() if not v]
        status = "PASS" if man.passed else "FAIL " + ",".join(bad)
        print(f"{cfg.recipe:18s} {status:8s} {time.perf_counter() - t0:7.1f}s  hash={man.config_hash}")
        if not man.passed:
            failed.append(cfg.recipe)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
