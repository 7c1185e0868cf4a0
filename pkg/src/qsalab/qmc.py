"""Mean estimation of h(probe) through the scalar averaging ODE.

The estimator integrates d/dt theta = a_t [-theta + h(q_t)] and applies the
flat-window average; a stochastic twin replaces q_t with i.i.d. uniform draws
so the deterministic and random excitations can be compared at equal budgets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .averaging import AveragingConfig, EstimateSeries, pr_average
from .core import Direction, GainSchedule, Trajectory, VectorFieldSpec, gain_at
from .core import integrate
from .probing import ProbingSignal, eval_probe

_SUM_CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class QmcTarget:
    """Scalar integrand over the probe's range, with its mean when known."""

    h: Callable[[np.ndarray], np.ndarray | float]
    true_mean: float | None = None
    gamma: float | None = None


def make_exp_sin_target(gamma: float = 1.0) -> QmcTarget:
    """exp(gamma x1) sin(2 pi (x2 - x1)); mean zero for every gamma."""
    gamma = float(gamma)

    def h(x: np.ndarray) -> np.ndarray:
        return np.exp(gamma * x[..., 0]) * np.sin(
            2.0 * np.pi * (x[..., 1] - x[..., 0])
        )

    return QmcTarget(h=h, true_mean=0.0, gamma=gamma)


def mean_field(target: QmcTarget) -> VectorFieldSpec:
    """The 1-D vector field -theta + h(probe)."""
    h = target.h

    def f(theta: np.ndarray, probe: np.ndarray, t) -> np.ndarray:
        if probe.ndim == 1:
            out = np.empty(1)
            out[0] = h(probe) - theta[0]
            return out
        return (np.asarray(h(probe)) - theta[..., 0])[..., None]

    theta_star = None
    if target.true_mean is not None:
        theta_star = np.array([float(target.true_mean)])
    return VectorFieldSpec(
        d=1,
        name="probe-mean",
        f=f,
        jacobian=None,
        theta_star=theta_star,
        vectorized=True,
    )


def qmc_estimate(
    target: QmcTarget,
    p: ProbingSignal,
    g: GainSchedule,
    theta0: float,
    T: float,
    Ts: float,
    cfg: AveragingConfig,
    *,
    store_stride: int = 1,
) -> EstimateSeries:
    """Deterministic-excitation mean estimate with running averages."""
    traj = integrate(
        mean_field(target),
        p,
        g,
        np.array([float(theta0)]),
        T=T,
        Ts=Ts,
        store_stride=store_stride,
    )
    return pr_average(traj, cfg)


def mc_baseline(
    target: QmcTarget,
    g: GainSchedule,
    theta0: float,
    T: float,
    Ts: float,
    cfg: AveragingConfig,
    seed: int,
    dim: int = 2,
    *,
    store_stride: int = 1,
) -> tuple[EstimateSeries, float]:
    """Same recursion driven by i.i.d. uniform draws on [-1,1]^dim.

    Returns the estimate series plus the plain sample mean of h over the
    same draws (the classical Monte Carlo estimate at equal budget).
    """
    if not Ts > 0 or T < Ts:
        raise ValueError("need T >= Ts > 0")
    n = int(round(T / Ts))
    if store_stride < 1 or n % store_stride != 0:
        raise ValueError(
            f"store_stride must be >= 1 and divide the {n} Euler steps"
        )
    rng = np.random.default_rng(int(seed))
    draws = rng.uniform(-1.0, 1.0, size=(n, int(dim)))
    hv = np.asarray(target.h(draws), dtype=float)
    ga = Ts * np.asarray(gain_at(g, np.arange(n) * Ts))

    states = np.empty(n + 1)
    th = float(theta0)
    states[0] = th
    ga_l = ga.tolist()
    hv_l = hv.tolist()
    for k in range(n):
        th += ga_l[k] * (hv_l[k] - th)
        states[k + 1] = th

    prefix = np.empty(n + 1)
    prefix[0] = 0.0
    np.cumsum(0.5 * Ts * (states[:-1] + states[1:]), out=prefix[1:])
    sel = np.arange(0, n + 1, store_stride)
    traj = Trajectory(
        times=sel * Ts,
        states=states[sel, None],
        Ts=store_stride * Ts,
        direction=Direction.FORWARD,
        prefix_integral=prefix[sel, None],
    )
    return pr_average(traj, cfg), float(hv.mean())


def partial_sum_check(
    h: Callable[[np.ndarray], np.ndarray | float],
    p: ProbingSignal,
    N: int,
    true_mean: float | None = None,
) -> tuple[float, list[float]]:
    """Boundedness of S_n = sum_{k<=n} (h(q_k) - center) at integer samples.

    Centering uses the known mean when given, else the empirical mean over a
    10x longer integer-sample budget. Returns sup_{n<=N} |S_n| and the |S_n|
    trace at decade checkpoints n = 10, 100, ..., N.
    """
    N = int(N)
    if N < 1:
        raise ValueError("need N >= 1")
    if true_mean is None:
        total = 0.0
        count = 10 * N
        k = 1
        while k <= count:
            m = min(_SUM_CHUNK, count - k + 1)
            kk = (k + np.arange(m)).astype(float)
            total += float(np.sum(h(eval_probe(p, kk))))
            k += m
        center = total / count
    else:
        center = float(true_mean)

    sup_abs = 0.0
    trace: list[float] = []
    checkpoints = [10**j for j in range(1, 13) if 10**j <= N]
    running = 0.0
    k = 1
    while k <= N:
        m = min(_SUM_CHUNK, N - k + 1)
        kk = (k + np.arange(m)).astype(float)
        vals = np.asarray(h(eval_probe(p, kk)), dtype=float) - center
        s = np.cumsum(vals)
        s += running
        sup_abs = max(sup_abs, float(np.max(np.abs(s))))
        for cp in checkpoints:
            if k <= cp <= k + m - 1:
                trace.append(float(abs(s[cp - k])))
        running = float(s[-1])
        k += m
    return sup_abs, trace
