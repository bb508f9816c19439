"""Run one experiment config (or a recipe with its defaults) and print the manifest.

    python3 scripts/run_recipe.py scripts/configs/dcurve.ini
    python3 scripts/run_recipe.py --recipe decay_fits --output results/decay
"""
import argparse
import sys

from fkdv.experiments import RECIPES, ExperimentConfig, load_config, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", help="INI file with an [experiment] section")
    ap.add_argument("--recipe", choices=RECIPES, help="run a recipe with its default settings")
    ap.add_argument("--output", help="output directory (overrides the config)")
    args = ap.parse_args()
    if bool(args.config) == bool(args.recipe):
        ap.error("give exactly one of a config file or --recipe")
    cfg = load_config(args.config) if args.config else ExperimentConfig.with_defaults(args.recipe)
    manifest = run(cfg, args.output)
    print(manifest.to_json())
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    sys.exit(main())
