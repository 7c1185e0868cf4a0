"""Flat-window iterate averaging and the forward-backward filter.

The running average at horizon T covers the window [(1 - 1/kappa)T, T]; the
forward-backward filter is the half-sum of the averages from a forward run
and a run driven by the time-reversed probe.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Trajectory
from .errors import QsaError


class EmptyTrajectory(QsaError):
    """Averaging needs at least two stored samples."""


class GridMismatch(QsaError):
    """Series to be combined must share one time grid."""


@dataclass(frozen=True)
class AveragingConfig:
    """Window parameter kappa > 1; the window start is (1 - 1/kappa) * T."""

    kappa: float

    def __post_init__(self) -> None:
        if not self.kappa > 1:
            raise ValueError(f"kappa must exceed 1, got {self.kappa}")


@dataclass(frozen=True, eq=False)
class EstimateSeries:
    """Raw, averaged, and optionally forward-backward estimates on one grid."""

    times: np.ndarray  # (n,)
    raw: np.ndarray  # (n, d)
    pr: np.ndarray  # (n, d), running flat-window average
    fb: np.ndarray | None = None  # (n, d), present when a backward run was combined


def pr_average(traj: Trajectory, cfg: AveragingConfig) -> EstimateSeries:
    """Running flat-window average of a trajectory at every stored time.

    The average at horizon T is the trapezoidal integral over
    [(1 - 1/kappa)T, T] divided by T/kappa, read off a cumulative prefix
    integral with linear interpolation at the window's left edge.  At T = 0
    the average is defined as the initial state.
    """
    if traj.states.shape[0] < 2:
        raise EmptyTrajectory("need at least two stored samples to average")
    t = traj.times
    x = traj.states
    n = t.shape[0]
    ts = traj.Ts
    if traj.prefix_integral is not None:
        J = traj.prefix_integral
    else:
        J = np.empty_like(x)
        J[0] = 0.0
        np.cumsum(0.5 * ts * (x[:-1] + x[1:]), axis=0, out=J[1:])

    pos = ((1.0 - 1.0 / cfg.kappa) / ts) * t
    idx = np.clip(pos.astype(int), 0, n - 2)
    frac = pos - idx
    J0 = J[idx] + frac[:, None] * (J[idx + 1] - J[idx])
    pr = np.empty_like(x)
    pr[0] = x[0]
    pr[1:] = (J[1:] - J0[1:]) * (cfg.kappa / t[1:])[:, None]
    return EstimateSeries(times=t.copy(), raw=x.copy(), pr=pr)


def fb_combine(forward_pr: EstimateSeries, backward_pr: EstimateSeries) -> EstimateSeries:
    """Half-sum of the averaged channels from a forward and a backward run."""
    if forward_pr.times.shape != backward_pr.times.shape or not np.array_equal(
        forward_pr.times, backward_pr.times
    ):
        raise GridMismatch("forward and backward series are on different grids")
    if forward_pr.pr.shape != backward_pr.pr.shape:
        raise GridMismatch("forward and backward series have different dimensions")
    fb = 0.5 * (forward_pr.pr + backward_pr.pr)
    return EstimateSeries(
        times=forward_pr.times, raw=forward_pr.raw, pr=forward_pr.pr, fb=fb
    )


def c_kappa_rho(kappa: float, rho: float) -> float:
    """Window bias constant kappa * (1 - (1 - 1/kappa)^(1-rho)) / (1-rho).

    Multiplied by a_T, it scales the residual bias of the flat-window
    average; it tends to 1 as rho tends to 0.
    """
    if not kappa > 1:
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    return kappa * (1.0 - (1.0 - 1.0 / kappa) ** (1.0 - rho)) / (1.0 - rho)


def write_estimates_csv(series: EstimateSeries, path) -> None:
    """Serialize as `t,raw_1..raw_d,pr_1..pr_d[,fb_1..fb_d]`."""
    d = series.raw.shape[1]
    cols = ["t"]
    cols += [f"raw_{i + 1}" for i in range(d)]
    cols += [f"pr_{i + 1}" for i in range(d)]
    blocks = [series.times, series.raw, series.pr]
    if series.fb is not None:
        cols += [f"fb_{i + 1}" for i in range(d)]
        blocks.append(series.fb)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, np.column_stack(blocks), fmt="%.17g", delimiter=",")


def read_estimates_csv(path) -> EstimateSeries:
    """Inverse of write_estimates_csv."""
    with open(path, "r", newline="") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if not header or header[0] != "t":
        raise ValueError(f"{path}: expected a `t,raw_*,pr_*[,fb_*]` header")
    d, rem = divmod(len(header) - 1, 3)
    has_fb = rem == 0 and d > 0 and header[-1].startswith("fb_")
    if not has_fb:
        d, rem = divmod(len(header) - 1, 2)
        if rem != 0 or d < 1:
            raise ValueError(f"{path}: malformed estimate header {header}")
    times = data[:, 0]
    raw = data[:, 1 : 1 + d]
    pr = data[:, 1 + d : 1 + 2 * d]
    fb = data[:, 1 + 2 * d : 1 + 3 * d] if has_fb else None
    return EstimateSeries(times=times, raw=raw, pr=pr, fb=fb)
