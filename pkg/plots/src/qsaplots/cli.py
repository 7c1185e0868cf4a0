"""Command line entry: render figures from an experiment directory.

Exit codes: 0 success, 2 usage error, 3 artifact problem.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import PlotsError
from .recipes import RECIPES
from .render import render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from experiment artifact directories.",
    )
    sub = parser.add_subparsers(dest="command")

    render_p = sub.add_parser("render", help="draw one recipe to an image")
    render_p.add_argument("--recipe", required=True,
                          help="recipe name, see 'plots list'")
    render_p.add_argument("--in", dest="in_dir", required=True,
                          help="experiment directory with the artifacts")
    render_p.add_argument("--out", dest="out_dir", required=True,
                          help="directory the image is written into")

    sub.add_parser("list", help="show available recipes")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "list":
        for name in sorted(RECIPES):
            recipe = RECIPES[name]
            print(f"{name:18} {recipe.kind:18} reads {', '.join(recipe.inputs)}")
        return 0

    if args.command != "render":
        parser.print_usage(sys.stderr)
        return 2

    recipe = RECIPES.get(args.recipe)
    if recipe is None:
        print(f"plots: unknown recipe {args.recipe!r}; "
              f"available: {', '.join(sorted(RECIPES))}", file=sys.stderr)
        return 2

    try:
        path = render(recipe, Path(args.in_dir), Path(args.out_dir))
    except PlotsError as exc:
        print(f"plots: {exc}", file=sys.stderr)
        return 3
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
