"""Explicit Euler integration of the probed ODE d/dt Theta = a_t f(Theta, q_t).

A run is a recursion

    theta_{n+1} = clamp(theta_n + Ts * a_{t_n} * f(theta_n, q_{t_n}, t_n))

with an optional componentwise box projection.  Backward runs replace q_t by
q_{-t}; the gain and the field's own clock still move forward in t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import QsaError
from .probing import ProbingSignal, eval_probe, eval_probe_backward

_CHUNK = 4096  # probe/gain table length precomputed per inner-loop block


class NonFiniteState(QsaError):
    """Integration produced NaN or infinity; usually a too-large gain or Ts."""

    def __init__(self, step_index: int):
        super().__init__(f"non-finite state first reached at step {step_index}")
        self.step_index = step_index


class Direction(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class GainSchedule:
    """Vanishing step-size process a_t.

    capped=False gives a_t = a0 * (1+t)^(-rho); capped=True gives
    a_t = min(a0, (1+t)^(-rho)).  rho = 0 yields a constant gain, useful in
    small step-by-step checks; experiments use rho in (1/2, 1).
    """

    a0: float
    rho: float
    capped: bool = False

    def __post_init__(self) -> None:
        if not self.a0 > 0:
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if not 0 <= self.rho <= 1:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")


def gain_at(g: GainSchedule, t: float | np.ndarray) -> float | np.ndarray:
    """Evaluate a_t; accepts scalars or arrays of times t >= 0."""
    decay = (1.0 + np.asarray(t, dtype=float)) ** (-g.rho)
    if g.capped:
        return np.minimum(g.a0, decay)
    return g.a0 * decay


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    """Evaluation interface for the right-hand side f(theta, probe, t).

    f takes the current state (d,), the probe vector (K,), and the time, and
    returns (d,).  When vectorized=True, f (and jacobian, if given) also
    accept a stacked probe (..., K) with times (...,) at a single theta and
    return (..., d); the batch oracles rely on that fast path.  jacobian is
    the state derivative df/dtheta with the same call signature, returning
    (d, d) (or (..., d, d) when vectorized).
    """

    d: int
    name: str
    f: Callable[[np.ndarray, np.ndarray, float | np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray, float | np.ndarray], np.ndarray] | None = None
    theta_star: np.ndarray | None = None
    vectorized: bool = False


@dataclass(frozen=True)
class BoxConstraint:
    """Componentwise interval [lower_i, upper_i] used for path projection."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape or not np.all(lower < upper):
            raise ValueError("box needs lower < upper componentwise")


def clamp_box(theta: np.ndarray, box: BoxConstraint) -> np.ndarray:
    """Componentwise max(lower, min(upper, theta))."""
    return np.minimum(np.maximum(theta, box.lower), box.upper)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stored samples of one Euler run.

    times[k] = k * Ts where Ts is the spacing of the *stored* samples; when a
    run is decimated the recording interval is a multiple of the Euler step.
    prefix_integral[k] is the trapezoidal integral of the state over
    [0, times[k]], accumulated at full Euler resolution before decimation so
    running averages stay exact.
    """

    times: np.ndarray  # (n,), uniformly spaced, starting at 0
    states: np.ndarray  # (n, d)
    Ts: float  # spacing of the stored samples
    direction: Direction
    prefix_integral: np.ndarray | None = None  # (n, d)


def integrate(
    field: VectorFieldSpec,
    probe: ProbingSignal,
    gain: GainSchedule,
    theta0: np.ndarray,
    T: float,
    Ts: float,
    box: BoxConstraint | None = None,
    direction: Direction = Direction.FORWARD,
    *,
    store_stride: int = 1,
) -> Trajectory:
    """Run the Euler recursion over [0, T] and record every store_stride-th step."""
    if not Ts > 0 or T < Ts:
        raise ValueError("need T >= Ts > 0")
    n = int(round(T / Ts))
    if store_stride < 1 or n % store_stride != 0:
        raise ValueError(
            f"store_stride must be >= 1 and divide the {n} Euler steps"
        )
    theta0 = np.asarray(theta0, dtype=float).reshape(field.d)
    if not np.all(np.isfinite(theta0)):
        raise ValueError("theta0 must be finite")
    if box is not None and not np.array_equal(theta0, clamp_box(theta0, box)):
        raise ValueError("theta0 must lie inside the projection box")

    if direction is Direction.BACKWARD:
        def probe_chunk(t: np.ndarray) -> np.ndarray:
            return eval_probe_backward(probe, t)
    else:
        def probe_chunk(t: np.ndarray) -> np.ndarray:
            return eval_probe(probe, t)

    return _integrate_table(
        field, probe_chunk, gain, theta0, n, Ts, box, direction, store_stride
    )


def _integrate_table(
    field: VectorFieldSpec,
    probe_chunk: Callable[[np.ndarray], np.ndarray],
    gain: GainSchedule,
    theta0: np.ndarray,
    n: int,
    Ts: float,
    box: BoxConstraint | None,
    direction: Direction,
    stride: int,
) -> Trajectory:
    """Shared Euler loop; probe_chunk maps a time block (m,) to probe rows (m, K)."""
    d = field.d
    f = field.f
    theta = theta0.copy()
    n_stored = n // stride + 1
    states = np.empty((n_stored, d))
    states[0] = theta
    track_prefix = stride > 1
    if track_prefix:
        prefix = np.empty((n_stored, d))
        prefix[0] = 0.0
        running = np.zeros(d)
    lower = box.lower if box is not None else None
    upper = box.upper if box is not None else None
    half = 0.5 * Ts
    store_i = 1
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while k < n:
            m = min(_CHUNK, n - k)
            t = (k + np.arange(m)) * Ts
            q = probe_chunk(t)
            ga = Ts * np.asarray(gain_at(gain, t))
            chunk_entry = theta
            chunk_states = np.empty((m, d))
            if lower is None:
                for i in range(m):
                    theta = theta + ga[i] * f(theta, q[i], t[i])
                    chunk_states[i] = theta
            else:
                for i in range(m):
                    theta = theta + ga[i] * f(theta, q[i], t[i])
                    theta = np.minimum(np.maximum(theta, lower), upper)
                    chunk_states[i] = theta
            if not np.all(np.isfinite(chunk_states)):
                _raise_first_nonfinite(
                    field, chunk_entry, q, ga, t, lower, upper, k
                )
            # steps k+1 .. k+m land at local index i when (k+1+i) % stride == 0
            first = (-(k + 1)) % stride
            sel = np.arange(first, m, stride)
            n_sel = sel.size
            if n_sel:
                states[store_i : store_i + n_sel] = chunk_states[sel]
            if track_prefix:
                contrib = np.empty_like(chunk_states)
                contrib[0] = chunk_entry + chunk_states[0]
                np.add(chunk_states[:-1], chunk_states[1:], out=contrib[1:])
                contrib *= half
                cum = np.cumsum(contrib, axis=0)
                cum += running
                if n_sel:
                    prefix[store_i : store_i + n_sel] = cum[sel]
                running = cum[-1].copy()
            store_i += n_sel
            k += m

    times = np.arange(n_stored) * (stride * Ts)
    if not track_prefix:
        prefix = np.empty((n_stored, d))
        prefix[0] = 0.0
        np.cumsum(half * (states[:-1] + states[1:]), axis=0, out=prefix[1:])
    return Trajectory(
        times=times,
        states=states,
        Ts=stride * Ts,
        direction=direction,
        prefix_integral=prefix,
    )


def _raise_first_nonfinite(
    field: VectorFieldSpec,
    theta: np.ndarray,
    q: np.ndarray,
    ga: np.ndarray,
    t: np.ndarray,
    lower: np.ndarray | None,
    upper: np.ndarray | None,
    k: int,
) -> None:
    """Replay a failed block step by step to report the first offending index."""
    for i in range(q.shape[0]):
        theta = theta + ga[i] * field.f(theta, q[i], t[i])
        if lower is not None:
            theta = np.minimum(np.maximum(theta, lower), upper)
        if not np.all(np.isfinite(theta)):
            raise NonFiniteState(step_index=k + i + 1)
    raise NonFiniteState(step_index=k + q.shape[0])


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Serialize as `t,theta_1,...,theta_d` with round-trippable decimals."""
    d = traj.states.shape[1]
    header = "t," + ",".join(f"theta_{i + 1}" for i in range(d))
    data = np.column_stack([traj.times, traj.states])
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")
