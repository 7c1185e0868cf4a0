"""Gradient-free optimization driven by probing signals.

One- and two-point vector fields turn objective evaluations into descent
directions; benchmark objectives are pinned to their standard published
formulas; a Gaussian-excitation twin of the one- and two-point fields serves
as the stochastic comparator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .core import (
    BoxConstraint,
    Direction,
    GainSchedule,
    Trajectory,
    VectorFieldSpec,
    _integrate_table,
    clamp_box,
)
from .errors import QsaError
from .probing import ProbingSignal, empirical_average, make_sin_probe
from .seeds import FREQUENCIES, PHASES, THETA0, experiment_rng, run_rng

_TWO_PI = 2.0 * math.pi


class NonFiniteObjective(QsaError):
    """Objective returned NaN or infinity at a queried point."""


class DimensionMismatch(QsaError):
    """Objective does not support the requested dimension."""


class UnknownObjective(QsaError):
    """Objective name not in the builtin registry."""


class GfoMethod(Enum):
    ONE_QSGD = "1qsgd"
    TWO_QSGD = "2qsgd"


@dataclass(eq=False)
class Objective:
    """Instrumented objective; eval_count tallies scalar evaluations."""

    name: str
    dim: int
    eval: Callable[[np.ndarray], np.ndarray | float]
    theta_opt: np.ndarray
    min_value: float
    default_box: BoxConstraint
    eval_count: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        self.dim = int(self.dim)
        self.theta_opt = np.asarray(self.theta_opt, dtype=float).reshape(self.dim)
        self.min_value = float(self.min_value)
        at_opt = float(np.asarray(self.eval(self.theta_opt)))
        if abs(at_opt - self.min_value) > 1e-12:
            raise ValueError(
                f"objective {self.name!r} evaluates to {at_opt!r} at its "
                f"declared minimizer, expected {self.min_value!r}"
            )

    def evaluate(self, theta: np.ndarray) -> np.ndarray | float:
        """Counted evaluation; batched input counts one per leading row."""
        if theta.ndim <= 1:
            self.eval_count += 1
        else:
            self.eval_count += int(np.prod(theta.shape[:-1]))
        return self.eval(theta)


def _rastrigin_eval(dim: int) -> Callable[[np.ndarray], np.ndarray]:
    def f(theta: np.ndarray) -> np.ndarray:
        return 10.0 * dim + np.sum(
            theta * theta - 10.0 * np.cos(_TWO_PI * theta), axis=-1
        )

    return f


def _ackley_eval() -> Callable[[np.ndarray], np.ndarray]:
    def f(theta: np.ndarray) -> np.ndarray:
        sq = np.mean(theta * theta, axis=-1)
        c = np.mean(np.cos(_TWO_PI * theta), axis=-1)
        return -20.0 * np.exp(-0.2 * np.sqrt(sq)) - np.exp(c) + 20.0 + math.e

    return f


def _three_hump_eval() -> Callable[[np.ndarray], np.ndarray]:
    def f(theta: np.ndarray) -> np.ndarray:
        x = theta[..., 0]
        y = theta[..., 1]
        return 2.0 * x * x - 1.05 * x**4 + x**6 / 6.0 + x * y + y * y

    return f


BUILTIN_OBJECTIVES = ("rastrigin", "ackley", "three_hump_camel")


def builtin_objective(name: str, dim: int) -> Objective:
    """Benchmark objective by name; all have minimizer 0 and minimum 0."""
    key = name.strip().lower()
    dim = int(dim)
    if dim < 1:
        raise DimensionMismatch(f"dim must be >= 1, got {dim}")
    if key == "rastrigin":
        ev, half = _rastrigin_eval(dim), 5.12
    elif key == "ackley":
        ev, half = _ackley_eval(), 32.768
    elif key == "three_hump_camel":
        if dim != 2:
            raise DimensionMismatch("three_hump_camel is defined for dim=2 only")
        ev, half = _three_hump_eval(), 5.0
    else:
        raise UnknownObjective(
            f"unknown objective {name!r}; choices: {', '.join(BUILTIN_OBJECTIVES)}"
        )
    box = BoxConstraint(lower=np.full(dim, -half), upper=np.full(dim, half))
    return Objective(
        name=key,
        dim=dim,
        eval=ev,
        theta_opt=np.zeros(dim),
        min_value=0.0,
        default_box=box,
    )


@dataclass(eq=False)
class GfoProblem:
    """One optimization setup: objective, probe amplitude, gain matrix, box."""

    objective: Objective
    epsilon: float
    method: GfoMethod
    gain_matrix: np.ndarray | None = None
    box: BoxConstraint | None = None

    def __post_init__(self) -> None:
        self.epsilon = float(self.epsilon)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        self.method = GfoMethod(self.method)
        d = self.objective.dim
        if self.gain_matrix is None:
            self.gain_matrix = np.eye(d)
        else:
            self.gain_matrix = np.asarray(self.gain_matrix, dtype=float).reshape(d, d)
        m = self.gain_matrix
        if not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("gain matrix must be symmetric")
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise ValueError("gain matrix must be positive definite") from None
        self.identity_gain = bool(np.array_equal(m, np.eye(d)))
        if self.box is None:
            self.box = self.objective.default_box


def _check_finite(val, prob: GfoProblem) -> None:
    if not np.all(np.isfinite(val)):
        raise NonFiniteObjective(
            f"objective {prob.objective.name!r} returned a non-finite value"
        )


def f_1qsgd(theta: np.ndarray, probe: np.ndarray, prob: GfoProblem) -> np.ndarray:
    """One evaluation per step: -(1/eps) M probe Obj(theta + eps probe)."""
    eps = prob.epsilon
    val = prob.objective.evaluate(theta + eps * probe)
    _check_finite(val, prob)
    mq = probe if prob.identity_gain else probe @ prob.gain_matrix.T
    if np.ndim(val) == 0:
        return (-float(val) / eps) * mq
    return (-1.0 / eps) * mq * np.asarray(val)[..., None]


def f_2qsgd(theta: np.ndarray, probe: np.ndarray, prob: GfoProblem) -> np.ndarray:
    """Two evaluations per step: -(1/2eps) M probe [Obj(+) - Obj(-)]."""
    eps = prob.epsilon
    shift = eps * probe
    up = prob.objective.evaluate(theta + shift)
    dn = prob.objective.evaluate(theta - shift)
    _check_finite(up, prob)
    _check_finite(dn, prob)
    mq = probe if prob.identity_gain else probe @ prob.gain_matrix.T
    if np.ndim(up) == 0:
        return (-(float(up) - float(dn)) / (2.0 * eps)) * mq
    diff = np.asarray(up) - np.asarray(dn)
    return (-0.5 / eps) * mq * diff[..., None]


def make_gfo_field(prob: GfoProblem) -> VectorFieldSpec:
    """Adapt a problem to the integrator's field interface."""
    if prob.method is GfoMethod.ONE_QSGD:
        def f(theta: np.ndarray, probe: np.ndarray, t) -> np.ndarray:
            return f_1qsgd(theta, probe, prob)
    else:
        def f(theta: np.ndarray, probe: np.ndarray, t) -> np.ndarray:
            return f_2qsgd(theta, probe, prob)
    return VectorFieldSpec(
        d=prob.objective.dim,
        name=f"{prob.objective.name}-{prob.method.value}",
        f=f,
        jacobian=None,
        # reported against the minimizer; the root differs by the O(eps^2) bias
        theta_star=prob.objective.theta_opt.copy(),
        vectorized=True,
    )


def check_fbar_equality(
    prob_pair: tuple[GfoProblem, GfoProblem],
    p: ProbingSignal,
    thetas: Sequence[np.ndarray],
    T: float,
    dt: float,
) -> float:
    """Max over test points of the gap between the two averaged fields."""
    one, two = prob_pair
    if one.method is not GfoMethod.ONE_QSGD or two.method is not GfoMethod.TWO_QSGD:
        raise ValueError("expected a (one-point, two-point) problem pair")
    worst = 0.0
    for th in thetas:
        th = np.asarray(th, dtype=float)
        g1 = empirical_average(lambda q: f_1qsgd(th, q, one), p, T, dt)
        g2 = empirical_average(lambda q: f_2qsgd(th, q, two), p, T, dt)
        worst = max(worst, float(np.linalg.norm(g1 - g2)))
    return worst


def draw_protocol_probe(
    dim: int,
    master_seed: int,
    run_id: int,
    freq_range: tuple[float, float] = (0.05, 0.5),
    amplitude: float = 2.0,
    phase_range: tuple[float, float] = (-math.pi / 2.0, math.pi / 2.0),
) -> ProbingSignal:
    """Per-axis sine probe with shared frequencies and per-run phases.

    Frequencies are drawn once per experiment (every run_id sees the same
    draw); phases are drawn per run. Amplitude 2 makes the probe covariance
    twice the identity.
    """
    lo, hi = freq_range
    if not 0 < lo < hi:
        raise ValueError("need 0 < freq_range[0] < freq_range[1]")
    omega = experiment_rng(master_seed, FREQUENCIES).uniform(lo, hi, int(dim))
    plo, phi_hi = phase_range
    phases = run_rng(master_seed, PHASES, run_id).uniform(plo, phi_hi, int(dim))
    return make_sin_probe(float(amplitude) * np.eye(int(dim)), omega, phases)


def draw_theta0(box: BoxConstraint, master_seed: int, run_id: int) -> np.ndarray:
    """Uniform initial condition over the projection box."""
    rng = run_rng(master_seed, THETA0, run_id)
    return rng.uniform(box.lower, box.upper)


def spsa_baseline(
    prob: GfoProblem,
    gain: GainSchedule,
    theta0: np.ndarray,
    T: float,
    Ts: float,
    seed: int,
    sigma: np.ndarray | None = None,
    *,
    store_stride: int = 1,
) -> Trajectory:
    """Stochastic twin: the same recursion with i.i.d. Gaussian excitation.

    The Gaussian covariance defaults to twice the identity, matching the
    protocol probe's covariance.
    """
    if not Ts > 0 or T < Ts:
        raise ValueError("need T >= Ts > 0")
    n = int(round(T / Ts))
    if store_stride < 1 or n % store_stride != 0:
        raise ValueError(
            f"store_stride must be >= 1 and divide the {n} Euler steps"
        )
    d = prob.objective.dim
    theta0 = np.asarray(theta0, dtype=float).reshape(d)
    if not np.all(np.isfinite(theta0)):
        raise ValueError("theta0 must be finite")
    box = prob.box
    if box is not None and not np.array_equal(theta0, clamp_box(theta0, box)):
        raise ValueError("theta0 must lie inside the projection box")
    if sigma is None:
        sigma = 2.0 * np.eye(d)
    chol = np.linalg.cholesky(np.asarray(sigma, dtype=float).reshape(d, d))
    rng = np.random.default_rng(int(seed))
    zeta = rng.standard_normal((n, d)) @ chol.T

    def noise_chunk(t: np.ndarray) -> np.ndarray:
        return zeta[np.rint(t / Ts).astype(int)]

    return _integrate_table(
        make_gfo_field(prob),
        noise_chunk,
        gain,
        theta0,
        n,
        Ts,
        box,
        Direction.FORWARD,
        store_stride,
    )
