"""Figure recipes: what to draw and which artifacts feed it."""

from __future__ import annotations

from dataclasses import dataclass, field

KINDS = (
    "rate_trace",
    "histogram",
    "covariance_trace",
    "loss_curve",
    "contour_overlay",
)


@dataclass(frozen=True)
class FigureRecipe:
    """A named figure: its kind, the artifacts it reads, and guide lines.

    guide_rho_multiples lists the m for which a T^(-m*rho) reference line
    is overlaid, with rho taken from the run's config echo.
    """

    name: str
    kind: str
    inputs: tuple[str, ...]
    guide_rho_multiples: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")


RECIPES: dict[str, FigureRecipe] = {
    r.name: r
    for r in (
        FigureRecipe(
            name="rate_trace",
            kind="rate_trace",
            inputs=("config.echo", "run_0.csv", "summary.json"),
            guide_rho_multiples=(1.0, 2.0),
        ),
        FigureRecipe(
            name="histogram",
            kind="histogram",
            inputs=("aggregate.csv",),
        ),
        FigureRecipe(
            name="covariance_trace",
            kind="covariance_trace",
            inputs=("summary.json",),
        ),
        FigureRecipe(
            name="loss_curve",
            kind="loss_curve",
            inputs=("config.echo", "run_*.csv"),
        ),
        FigureRecipe(
            name="contour_overlay",
            kind="contour_overlay",
            inputs=("config.echo", "summary.json"),
        ),
    )
}
