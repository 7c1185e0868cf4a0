"""Drawing code for the five figure kinds.

Every number shown is read from the experiment artifacts; the only local
math is presentation (norms of stored vectors, histogram binning, and the
textbook objective surfaces used as contour backgrounds). The shipped
studies all place their reference point at the origin, so the norm of a
stored channel is the error magnitude.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .artifacts import (
    Aggregate,
    load_aggregate,
    load_config_echo,
    load_run_series,
    load_summary,
    list_run_ids,
)
from .errors import MissingArtifact, SchemaMismatch
from .figstyle import GUIDE_COLOR, PALETTE, apply_style, save
from .recipes import FigureRecipe

MAX_LOSS_CURVES = 50

# Background shading only; every data point comes from summary.json.
_SURFACES = {
    "rastrigin": (5.12, lambda x, y: (
        20.0 + x**2 - 10.0 * np.cos(2.0 * np.pi * x)
        + y**2 - 10.0 * np.cos(2.0 * np.pi * y)
    )),
    "ackley": (32.768, lambda x, y: (
        -20.0 * np.exp(-0.2 * np.sqrt(0.5 * (x**2 + y**2)))
        - np.exp(0.5 * (np.cos(2.0 * np.pi * x) + np.cos(2.0 * np.pi * y)))
        + 20.0 + math.e
    )),
    "three_hump_camel": (5.0, lambda x, y: (
        2.0 * x**2 - 1.05 * x**4 + x**6 / 6.0 + x * y + y**2
    )),
}


def freedman_diaconis_bins(values: np.ndarray) -> int:
    """Bin count via the Freedman-Diaconis width, 30 when degenerate."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 30
    q75, q25 = np.percentile(values, [75.0, 25.0])
    iqr = q75 - q25
    span = float(values.max() - values.min())
    if iqr <= 0.0 or span <= 0.0:
        return 30
    width = 2.0 * iqr * values.size ** (-1.0 / 3.0)
    return max(1, min(200, int(math.ceil(span / width))))


def exclude_outliers(values: np.ndarray) -> np.ndarray:
    """Drop points beyond 3 scaled median absolute deviations."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values
    med = float(np.median(values))
    scaled_mad = 1.4826 * float(np.median(np.abs(values - med)))
    if scaled_mad == 0.0:
        return values
    return values[np.abs(values - med) <= 3.0 * scaled_mad]


def _log_mask(times: np.ndarray, mags: np.ndarray) -> np.ndarray:
    return (times > 0.0) & (mags > 0.0) & np.isfinite(mags)


def _channel_label(name: str, summary: dict) -> str:
    fit = summary.get("channels", {}).get(name)
    if isinstance(fit, dict) and "slope" in fit:
        return f"{name} (slope {fit['slope']:+.2f})"
    return name


def _add_guides(ax, times, anchor_t, anchor_v, rho, multiples) -> None:
    styles = ("--", ":")
    for i, m in enumerate(multiples):
        g = m * rho
        ax.plot(times, anchor_v * (times / anchor_t) ** (-g),
                styles[i % len(styles)], color=GUIDE_COLOR, linewidth=1.0,
                label=f"$T^{{-{g:g}}}$")


def _trace_panel(ax, series, names, summary, rho, multiples) -> None:
    anchor = None
    for i, name in enumerate(names):
        mags = np.linalg.norm(series.channels[name], axis=1)
        keep = _log_mask(series.times, mags)
        if not np.any(keep):
            continue
        t, v = series.times[keep], mags[keep]
        thin = name == "raw"
        ax.loglog(t, v, color=PALETTE[i % len(PALETTE)],
                  linewidth=0.9 if thin else 1.6,
                  alpha=0.7 if thin else 1.0,
                  label=_channel_label(name, summary))
        if name != "raw" and anchor is None:
            j = int(np.searchsorted(t, t[-1] / 100.0))
            j = min(j, len(t) - 1)
            anchor = (t, t[j], v[j])
    if anchor is not None and multiples:
        _add_guides(ax, anchor[0], anchor[1], anchor[2], rho, multiples)
    ax.set_xlabel("T")
    ax.legend(loc="best")


def _draw_rate_trace(in_dir: Path, recipe: FigureRecipe):
    import matplotlib.pyplot as plt

    echo = load_config_echo(in_dir)
    rho = echo.require_float("gain", "rho")
    series = load_run_series(in_dir, 0)
    summary = load_summary(in_dir)
    multiples = recipe.guide_rho_multiples

    if "fb" in series.channels:
        fig, axes = plt.subplots(1, 2, figsize=(7.4, 3.2),
                                 sharex=True, sharey=True)
        _trace_panel(axes[0], series, ("raw", "pr"), summary, rho, multiples)
        _trace_panel(axes[1], series, ("fb",), summary, rho, (max(multiples),))
        axes[0].set_title("averaged iterate")
        axes[1].set_title("forward-backward filtered")
        axes[0].set_ylabel("error magnitude")
    else:
        fig, ax = plt.subplots(figsize=(4.6, 3.4))
        names = [n for n in ("raw", "pr") if n in series.channels]
        _trace_panel(ax, series, names, summary, rho, multiples)
        ax.set_title(f"convergence (rho = {rho:g})")
        ax.set_ylabel("error magnitude")
    return fig


def _draw_histogram(in_dir: Path, recipe: FigureRecipe):
    import matplotlib.pyplot as plt

    agg: Aggregate = load_aggregate(in_dir)
    names = agg.estimators()
    fig, axes = plt.subplots(1, len(names), figsize=(3.6 * len(names), 3.2),
                             sharey=True, squeeze=False)
    for i, name in enumerate(names):
        ax = axes[0][i]
        values = agg.scaled_for(name)
        finite = values[np.isfinite(values)]
        kept = exclude_outliers(finite)
        if kept.size == 0:
            ax.text(0.5, 0.5, "no finite samples", ha="center", va="center",
                    transform=ax.transAxes)
            ax.set_title(f"{name} (n=0/{values.size})")
            continue
        ax.hist(kept, bins=freedman_diaconis_bins(kept),
                color=PALETTE[i % len(PALETTE)], edgecolor="white",
                linewidth=0.4)
        ax.set_title(f"{name} (n={kept.size}/{values.size})")
        ax.set_xlabel("scaled terminal error")
    axes[0][0].set_ylabel("count")
    return fig


def _draw_covariance_trace(in_dir: Path, recipe: FigureRecipe):
    import matplotlib.pyplot as plt

    summary = load_summary(in_dir)
    trace = summary["covariance_trace"]
    if not trace:
        raise MissingArtifact(
            f"{in_dir}/summary.json has an empty covariance trace "
            "(needs a multi-run experiment)"
        )
    arr = np.asarray(trace, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise SchemaMismatch(
            f"{in_dir}/summary.json covariance trace is not (T, value) pairs"
        )
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.loglog(arr[:, 0], arr[:, 1], "o-", color=PALETTE[0], markersize=4)
    ax.set_xlabel("T")
    ax.set_ylabel("scaled covariance")
    ax.set_title("scaled covariance at checkpoints")
    return fig


def _draw_loss_curve(in_dir: Path, recipe: FigureRecipe):
    import matplotlib.pyplot as plt

    run_ids = list_run_ids(in_dir)
    if not run_ids:
        raise MissingArtifact(f"{in_dir} holds no run_<k>.csv files")
    run_ids = run_ids[:MAX_LOSS_CURVES]
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    drew = False
    for run_id in run_ids:
        series = load_run_series(in_dir, run_id)
        name = "pr" if "pr" in series.channels else next(iter(series.channels))
        mags = np.linalg.norm(series.channels[name], axis=1)
        keep = _log_mask(series.times, mags)
        if not np.any(keep):
            continue
        ax.loglog(series.times[keep], mags[keep], color=PALETTE[0],
                  linewidth=0.9, alpha=0.45)
        drew = True
    if not drew:
        raise SchemaMismatch(
            f"{in_dir}: no run has positive values to draw on log axes"
        )
    ax.set_xlabel("T")
    ax.set_ylabel("distance to reference")
    ax.set_title(f"descent across {len(run_ids)} runs")
    return fig


def _draw_contour_overlay(in_dir: Path, recipe: FigureRecipe):
    import matplotlib.pyplot as plt

    echo = load_config_echo(in_dir)
    objective = echo.get("model", "objective")
    if objective is None:
        raise SchemaMismatch(
            "contour overlay needs an optimization run "
            "(config.echo lacks [model] objective)"
        )
    if objective not in _SURFACES:
        raise SchemaMismatch(
            f"no background surface for objective {objective!r}; "
            f"known: {sorted(_SURFACES)}"
        )
    dim = int(echo.require_float("model", "dim"))
    if dim != 2:
        raise SchemaMismatch(
            f"contour overlay is two-dimensional, run has dim = {dim}"
        )
    summary = load_summary(in_dir)
    points = []
    for run in summary["runs"]:
        terminal = run.get("terminal", {})
        if "pr" not in terminal:
            raise SchemaMismatch(
                "summary.json run entries lack a 'pr' terminal vector"
            )
        points.append(terminal["pr"])
    pts = np.asarray(points, dtype=float)
    finite = np.all(np.isfinite(pts), axis=1)
    pts = pts[finite]

    half, surface = _SURFACES[objective]
    grid = np.linspace(-half, half, 241)
    xg, yg = np.meshgrid(grid, grid)
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    filled = ax.contourf(xg, yg, surface(xg, yg), levels=24, cmap="viridis")
    fig.colorbar(filled, ax=ax, shrink=0.85)
    if pts.size:
        ax.plot(pts[:, 0], pts[:, 1], "o", color="white",
                markeredgecolor="black", markersize=5,
                label=f"averaged terminals ({pts.shape[0]})")
    ax.plot([0.0], [0.0], "*", color="#ffd700", markeredgecolor="black",
            markersize=13, label="optimum")
    ax.set_xlabel("theta 1")
    ax.set_ylabel("theta 2")
    ax.set_title(f"{objective}: terminal estimates "
                 f"({int(np.sum(finite))}/{finite.size} finite)")
    ax.legend(loc="upper right")
    ax.set_aspect("equal")
    return fig


_DRAWERS = {
    "rate_trace": _draw_rate_trace,
    "histogram": _draw_histogram,
    "covariance_trace": _draw_covariance_trace,
    "loss_curve": _draw_loss_curve,
    "contour_overlay": _draw_contour_overlay,
}


def render(recipe: FigureRecipe, in_dir: Path, out_dir: Path) -> Path:
    """Draw one recipe from the artifacts in in_dir; returns the image path."""
    in_dir = Path(in_dir)
    if not in_dir.is_dir():
        raise MissingArtifact(f"{in_dir} is not a directory")
    apply_style()
    fig = _DRAWERS[recipe.kind](in_dir, recipe)
    return save(fig, Path(out_dir) / f"{recipe.name}.png")
