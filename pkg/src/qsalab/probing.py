"""Deterministic probing signals: sinusoid mixtures and triangle waves.

A probing signal plays the role of noise in quasi-stochastic approximation.
The canonical form is a mixture of K channels

    q_t = sum_i v_i * w(omega_i * t + phi_i)

where w is either cos(2*pi*x) or the unit triangle wave, omega_i is in
cycles per unit time, and phi_i is a phase in cycles.  Frequency sets of the
form log(a_i/b_i) with multiplicatively independent rationals get an exact
independence validator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import QsaError

MAX_RATIONAL = 2**63 - 1  # factorization contract: plain machine-range integers


class DependentFrequencies(QsaError):
    """The prime-exponent vectors of the rationals are linearly dependent."""


class NonPositiveFrequency(QsaError):
    """A rational pair (a, b) with a <= b would give omega = log(a/b) <= 0."""


class UnsupportedWaveform(QsaError):
    """The requested closed form exists only for the cosine waveform."""


class Waveform(Enum):
    COSINE = "cosine"
    TRIANGLE = "triangle"


@dataclass(frozen=True)
class FrequencySpec:
    """Frequencies omega_i = log(a_i/b_i) stored with their exact rational pairs."""

    pairs: tuple[tuple[int, int], ...]  # (a_i, b_i), a_i > b_i >= 1
    omega: tuple[float, ...]  # log(a_i / b_i), cycles per unit time before scaling


def _factorize(n: int) -> dict[int, int]:
    """Prime factorization by trial division; n must be in [1, MAX_RATIONAL]."""
    factors: dict[int, int] = {}
    m = n
    p = 2
    while p * p <= m:
        while m % p == 0:
            factors[p] = factors.get(p, 0) + 1
            m //= p
        p += 1 if p == 2 else 2
    if m > 1:
        factors[m] = factors.get(m, 0) + 1
    return factors


def _exact_rank(rows: list[list[int]]) -> int:
    """Rank over the rationals of an integer matrix, by fraction-free elimination."""
    mat = [[x for x in row] for row in rows]
    n_rows = len(mat)
    n_cols = len(mat[0]) if n_rows else 0
    rank = 0
    col = 0
    while rank < n_rows and col < n_cols:
        pivot = next((r for r in range(rank, n_rows) if mat[r][col] != 0), None)
        if pivot is None:
            col += 1
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        for r in range(rank + 1, n_rows):
            if mat[r][col] != 0:
                a, b = mat[rank][col], mat[r][col]
                mat[r] = [a * x - b * y for x, y in zip(mat[r], mat[rank])]
        rank += 1
        col += 1
    return rank


def make_log_rational_frequencies(
    pairs: Sequence[tuple[int, int]],
) -> FrequencySpec:
    """Build a validated frequency set omega_i = log(a_i/b_i).

    Multiplicative independence of the rationals a_i/b_i is verified exactly:
    each ratio is factored into a prime-exponent vector and the integer matrix
    of exponents must have full row rank over the rationals.
    """
    clean: list[tuple[int, int]] = []
    for a, b in pairs:
        a, b = int(a), int(b)
        if a < 1 or b < 1:
            raise NonPositiveFrequency(f"integers must be >= 1, got ({a}, {b})")
        if a > MAX_RATIONAL or b > MAX_RATIONAL:
            raise ValueError(f"rational pair ({a}, {b}) exceeds {MAX_RATIONAL}")
        if a <= b:
            raise NonPositiveFrequency(
                f"pair ({a}, {b}) gives omega = log({a}/{b}) <= 0; need a > b"
            )
        clean.append((a, b))
    if not clean:
        raise ValueError("at least one rational pair is required")

    exponents = []
    for a, b in clean:
        vec = _factorize(a)
        for p, e in _factorize(b).items():
            vec[p] = vec.get(p, 0) - e
        exponents.append(vec)
    primes = sorted(set(p for vec in exponents for p in vec))
    matrix = [[vec.get(p, 0) for p in primes] for vec in exponents]
    if _exact_rank(matrix) < len(clean):
        raise DependentFrequencies(
            f"prime-exponent vectors of {clean} are rationally dependent"
        )
    omega = tuple(math.log(a / b) for a, b in clean)
    return FrequencySpec(pairs=tuple(clean), omega=omega)


def _triangle(x: np.ndarray) -> np.ndarray:
    """Unit triangle wave: period 1, odd, range [-1, 1], slope +4 at 0."""
    return 1.0 - 4.0 * np.abs(0.5 - np.mod(x + 0.25, 1.0))


@dataclass(frozen=True, eq=False)
class ProbingSignal:
    """Immutable K-channel probing signal in d dimensions.

    Phases are stored in cycles: channel i contributes
    v_i * w(2*pi*(omega_i*t + phi_i)) for the cosine waveform and
    v_i * triangle(omega_i*t + phi_i) for the triangle waveform.
    """

    d: int  # output dimension
    v: np.ndarray  # (K, d) amplitude vectors; must span d-space
    omega: np.ndarray  # (K,) frequencies, cycles per unit time, > 0
    phi: np.ndarray  # (K,) phases, in cycles
    waveform: Waveform = Waveform.COSINE

    def __post_init__(self) -> None:
        v = np.atleast_2d(np.asarray(self.v, dtype=float))
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "phi", phi)
        k = omega.shape[0]
        if v.shape != (k, self.d):
            raise ValueError(f"v must have shape ({k}, {self.d}), got {v.shape}")
        if phi.shape != (k,):
            raise ValueError(f"phi must have shape ({k},), got {phi.shape}")
        if not np.all(omega > 0):
            raise NonPositiveFrequency("all probe frequencies must be positive")
        if np.linalg.matrix_rank(v) < self.d:
            raise ValueError("amplitude vectors must span the output space")

    @property
    def K(self) -> int:
        return self.omega.shape[0]


def make_sin_probe(
    amplitudes: np.ndarray, omega_rad: Sequence[float], phi_rad: Sequence[float]
) -> ProbingSignal:
    """Probe with channels amplitudes_i * sin(omega_rad_i * t + phi_rad_i).

    Adapter for the sine-with-radian-phase convention, using
    sin(x) = cos(2*pi*(x/(2*pi) - 1/4)).
    """
    amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    omega = np.asarray(omega_rad, dtype=float) / (2.0 * np.pi)
    phi = np.asarray(phi_rad, dtype=float) / (2.0 * np.pi) - 0.25
    return ProbingSignal(
        d=amplitudes.shape[1], v=amplitudes, omega=omega, phi=phi,
        waveform=Waveform.COSINE,
    )


def eval_probe(p: ProbingSignal, t: float | np.ndarray) -> np.ndarray:
    """Evaluate q_t; scalar t gives a (d,) vector, an array t adds leading axes."""
    t = np.asarray(t, dtype=float)
    arg = p.omega * t[..., None] + p.phi
    if p.waveform is Waveform.COSINE:
        w = np.cos(2.0 * np.pi * arg)
    else:
        w = _triangle(arg)
    return w @ p.v


def eval_probe_backward(p: ProbingSignal, t: float | np.ndarray) -> np.ndarray:
    """Evaluate the time-reversed probe q_{-t}."""
    return eval_probe(p, -np.asarray(t, dtype=float))


def probe_covariance(p: ProbingSignal) -> np.ndarray:
    """Closed-form time average of q q^T for cosine probes: (1/2) sum_i v_i v_i^T."""
    if p.waveform is not Waveform.COSINE:
        raise UnsupportedWaveform(
            "no closed-form covariance for the triangle waveform; "
            "use empirical_average instead"
        )
    return 0.5 * (p.v.T @ p.v)


def empirical_average(
    g: Callable[[np.ndarray], np.ndarray | float],
    p: ProbingSignal,
    T: float,
    dt: float,
) -> np.ndarray:
    """Left-endpoint Riemann average (1/N) sum_k g(q_{k*dt}), N = floor(T/dt)."""
    if T <= 0 or dt <= 0 or dt > T:
        raise ValueError("need T > 0 and 0 < dt <= T")
    n = int(T / dt)
    acc: np.ndarray | None = None
    chunk = 65536
    k = 0
    while k < n:
        m = min(chunk, n - k)
        q = eval_probe(p, (k + np.arange(m)) * dt)
        for row in q:
            val = np.asarray(g(row), dtype=float)
            acc = val.copy() if acc is None else acc + val
        k += m
    assert acc is not None
    return acc / n
