"""Command-line entry point: run recipes, plot saved results, list recipes."""

import argparse
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .harness import emit_plots, list_recipes, resolve_config, run_experiment


def _load_overrides(path):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="risbeam",
        description="RIS-assisted MIMO downlink SER experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a recipe and write CSV results")
    run_p.add_argument("--recipe", required=True, help="recipe name (see list-recipes)")
    run_p.add_argument("--seed", required=True, type=int, help="root seed (u64)")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--config", default=None, help="TOML config overriding recipe defaults")

    plot_p = sub.add_parser("plot", help="render SVG plots from a result directory")
    plot_p.add_argument("--in", dest="in_dir", required=True, help="result directory")

    sub.add_parser("list-recipes", help="print available recipes")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list-recipes":
        for name, description in list_recipes():
            print(f"{name:14s} {description}")
        return 0
    if args.command == "run":
        cfg = resolve_config(args.recipe, _load_overrides(args.config))
        paths = run_experiment(cfg, args.seed, args.out)
        for path in paths:
            print(path)
        return 0
    if args.command == "plot":
        try:
            paths = emit_plots(args.in_dir)
        except FileNotFoundError as exc:
            print(f"risbeam plot: {exc}", file=sys.stderr)
            return 3
        for path in paths:
            print(path)
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
