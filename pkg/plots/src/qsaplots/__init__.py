"""Deterministic figure rendering for qsalab experiment directories.

The renderer consumes only the files an experiment run leaves behind
(config.echo, run_<k>.csv, aggregate.csv, summary.json) and never imports
the library that produced them, so the artifact layout is the sole contract
between the two packages.
"""

from .errors import MissingArtifact, PlotsError, SchemaMismatch
from .recipes import RECIPES, FigureRecipe
from .render import render

__version__ = "0.1.0"

__all__ = [
    "FigureRecipe",
    "MissingArtifact",
    "PlotsError",
    "RECIPES",
    "SchemaMismatch",
    "render",
    "__version__",
]
