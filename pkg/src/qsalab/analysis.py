"""Theory-facing numerics: bias vectors, covariance reductions, rate fits.

The central object is the bias vector of the averaged iterate,

    Ybar = inv(A*) Upsilon,
    Upsilon = lim (1/T) int_0^T { int_0^t [A(theta*, q_r) - A*] dr } f(theta*, q_t) dt,

estimated here by brute-force quadrature.  The module also carries the
two-dimensional sinusoid-driven linear benchmark whose Upsilon has a closed
form, a log-rational-frequency demo model whose bias vanishes, rate fitting
on log-log grids, and the across-run covariance summary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .averaging import EstimateSeries
from .core import Direction, VectorFieldSpec
from .errors import QsaError
from .probing import (
    ProbingSignal,
    Waveform,
    eval_probe,
    eval_probe_backward,
    make_log_rational_frequencies,
)

_YBAR_CHUNK = 65536


class SingularAStar(QsaError):
    """The supplied linearization matrix is not invertible."""


class DegenerateWindow(QsaError):
    """A rate fit needs at least 10 grid points with positive errors."""


@dataclass(frozen=True, eq=False)
class LinearExampleModel:
    """Two-dimensional linear benchmark driven by four sinusoid channels.

    The field is f(theta, t) = (A* + A(t)) theta + forcing_scale * b(t) with

        A(t) = [[4 sin(w11 t), sin(w21 t)], [sin(w12 t), 4 sin(w22 t)]]
        b(t) = [2 cos(w11 t), cos(w22 t)]

    where the frequencies are in radians per unit time and A* is Hurwitz.
    The averaged field is A* theta, so the root is the origin.
    """

    a_star: np.ndarray  # (2, 2), Hurwitz
    omega_rad: tuple[float, float, float, float]  # (w11, w21, w12, w22)
    forcing_scale: float = 10.0

    def __post_init__(self) -> None:
        a = np.asarray(self.a_star, dtype=float).reshape(2, 2)
        object.__setattr__(self, "a_star", a)
        if np.any(np.real(np.linalg.eigvals(a)) >= 0):
            raise ValueError("a_star must be Hurwitz")

    def probe(self) -> ProbingSignal:
        """Six-channel cosine probe carrying the four sines and two cosines.

        Channels 0..3 are sin(w11 t), sin(w21 t), sin(w12 t), sin(w22 t)
        (quarter-cycle phase); channels 4..5 are cos(w11 t), cos(w22 t).
        """
        w11, w21, w12, w22 = self.omega_rad
        omega = np.array([w11, w21, w12, w22, w11, w22]) / (2.0 * np.pi)
        phi = np.array([-0.25, -0.25, -0.25, -0.25, 0.0, 0.0])
        return ProbingSignal(d=6, v=np.eye(6), omega=omega, phi=phi)

    def field(self) -> VectorFieldSpec:
        a = self.a_star
        b1 = 2.0 * self.forcing_scale
        b2 = self.forcing_scale

        a11 = a[0, 0]
        a12 = a[0, 1]
        a21 = a[1, 0]
        a22 = a[1, 1]

        def f(theta: np.ndarray, probe: np.ndarray, t) -> np.ndarray:
            if probe.ndim == 1:
                # scalar path kept allocation-light; it dominates Euler runtime
                out = np.empty(2)
                out[0] = (a11 + 4.0 * probe[0]) * theta[0] \
                    + (a12 + probe[1]) * theta[1] + b1 * probe[4]
                out[1] = (a21 + probe[2]) * theta[0] \
                    + (a22 + 4.0 * probe[3]) * theta[1] + b2 * probe[5]
                return out
            th1 = theta[..., 0]
            th2 = theta[..., 1]
            f1 = (a11 + 4.0 * probe[..., 0]) * th1 \
                + (a12 + probe[..., 1]) * th2 + b1 * probe[..., 4]
            f2 = (a21 + probe[..., 2]) * th1 \
                + (a22 + 4.0 * probe[..., 3]) * th2 + b2 * probe[..., 5]
            return np.stack([f1, f2], axis=-1)

        def jacobian(theta: np.ndarray, probe: np.ndarray, t) -> np.ndarray:
            j11 = a[0, 0] + 4.0 * probe[..., 0]
            j12 = a[0, 1] + probe[..., 1]
            j21 = a[1, 0] + probe[..., 2]
            j22 = a[1, 1] + 4.0 * probe[..., 3]
            row1 = np.stack([j11, j12], axis=-1)
            row2 = np.stack([j21, j22], axis=-1)
            return np.stack([row1, row2], axis=-2)

        return VectorFieldSpec(
            d=2,
            name="linear-sinusoid-2d",
            f=f,
            jacobian=jacobian,
            theta_star=np.zeros(2),
            vectorized=True,
        )


def make_linear_example(
    a_star_diag: float = -0.8,
    omega_rad: tuple[float, float, float, float] | None = None,
    forcing_scale: float = 10.0,
) -> LinearExampleModel:
    """Benchmark instance; default frequencies (pi, sqrt 3, 4, sqrt 5) / 5."""
    if omega_rad is None:
        omega_rad = (
            math.pi / 5.0,
            math.sqrt(3.0) / 5.0,
            4.0 / 5.0,
            math.sqrt(5.0) / 5.0,
        )
    return LinearExampleModel(
        a_star=a_star_diag * np.eye(2),
        omega_rad=tuple(float(w) for w in omega_rad),
        forcing_scale=forcing_scale,
    )


def make_log_rational_demo() -> tuple[VectorFieldSpec, ProbingSignal]:
    """Nonlinear 2-D model with probe-dependent linearization and zero bias.

    The probe is a two-channel cosine signal at frequencies (log 6, log 2)
    cycles per unit time, a multiplicatively independent pair; with that
    design every probe-mixing average feeding the bias vector vanishes.
    """
    spec = make_log_rational_frequencies([(6, 1), (2, 1)])
    probe = ProbingSignal(
        d=2, v=np.eye(2), omega=np.array(spec.omega), phi=np.zeros(2)
    )

    def f(theta: np.ndarray, probe_v: np.ndarray, t) -> np.ndarray:
        if probe_v.ndim == 1:
            # scalar path kept allocation-light; it dominates Euler runtime
            q1 = probe_v[0]
            q2 = probe_v[1]
            out = np.empty(2)
            out[0] = (-1.0 + 0.5 * q1) * theta[0] + 0.25 * q1 * theta[1] \
                + 2.0 * q2 + q1 * q2
            out[1] = 0.5 * q2 * theta[0] - theta[1] + q1 \
                + 2.0 * (q1 * q1 - 0.5)
            return out
        q1 = probe_v[..., 0]
        q2 = probe_v[..., 1]
        th1 = theta[..., 0]
        th2 = theta[..., 1]
        f1 = (-1.0 + 0.5 * q1) * th1 + 0.25 * q1 * th2 + 2.0 * q2 + q1 * q2
        f2 = 0.5 * q2 * th1 - th2 + q1 + 2.0 * (q1 * q1 - 0.5)
        return np.stack([f1, f2], axis=-1)

    def jacobian(theta: np.ndarray, probe_v: np.ndarray, t) -> np.ndarray:
        q1 = probe_v[..., 0]
        q2 = probe_v[..., 1]
        row1 = np.stack([-1.0 + 0.5 * q1, 0.25 * q1], axis=-1)
        row2 = np.stack([0.5 * q2, -1.0 + 0.0 * q2], axis=-1)
        return np.stack([row1, row2], axis=-2)

    field = VectorFieldSpec(
        d=2,
        name="log-rational-demo-2d",
        f=f,
        jacobian=jacobian,
        theta_star=np.zeros(2),
        vectorized=True,
    )
    return field, probe


@dataclass(frozen=True, eq=False)
class CovarianceSummary:
    """Across-run covariance of terminal states at one horizon."""

    sigma_bar: np.ndarray  # (d, d), symmetric PSD up to rounding
    theta_bar: np.ndarray  # (d,)
    M: int  # run count
    T: float  # horizon the states were taken at

    def scaled_trace(self, rho: float) -> float:
        """T^(2 rho) * sqrt(tr Sigma_bar)."""
        return float(self.T ** (2.0 * rho) * math.sqrt(max(np.trace(self.sigma_bar), 0.0)))

    def scaled_rmse(self, rho: float, theta_star: np.ndarray) -> float:
        """T^(2 rho) * sqrt(tr Sigma_bar + |theta_bar - theta*|^2)."""
        bias2 = float(np.sum((self.theta_bar - np.asarray(theta_star, float)) ** 2))
        return float(
            self.T ** (2.0 * rho)
            * math.sqrt(max(np.trace(self.sigma_bar), 0.0) + bias2)
        )


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log-error against log-time."""

    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]


def ybar_closed_form(model: LinearExampleModel) -> np.ndarray:
    """Closed-form bias vector of the linear benchmark, pre-conditioned form.

    Returns -2 * forcing_scale * (2/w11, 1/w22).  This is the limit average
    of the inner-integral form before applying inv(A*); the observable
    averaged-iterate bias is inv(A*) times this vector, which ybar_numeric
    returns.
    """
    w11, _, _, w22 = model.omega_rad
    return -2.0 * model.forcing_scale * np.array([2.0 / w11, 1.0 / w22])


def _jacobian_blocks(
    field: VectorFieldSpec, theta_star: np.ndarray, q: np.ndarray, t: np.ndarray
) -> np.ndarray:
    """Jacobians A(theta*, q_t) for a block of probe rows, shape (m, d, d)."""
    d = field.d
    m = q.shape[0]
    if field.jacobian is not None:
        jac = np.asarray(field.jacobian(theta_star, q, t))
        return np.broadcast_to(jac, (m, d, d))
    h = 1e-5 * (1.0 + float(np.linalg.norm(theta_star)))
    out = np.empty((m, d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        fp = np.asarray(field.f(theta_star + e, q, t))
        fm = np.asarray(field.f(theta_star - e, q, t))
        out[:, :, j] = (fp - fm) / (2.0 * h)
    return out


def ybar_numeric(
    field: VectorFieldSpec,
    probe: ProbingSignal,
    theta_star: np.ndarray,
    a_star: np.ndarray,
    T: float,
    dt: float,
    direction: Direction = Direction.FORWARD,
) -> np.ndarray:
    """Brute-force quadrature estimate of the averaged-iterate bias vector.

    Accumulates the running integral I_t of A(theta*, q_r) - A* and averages
    I_t f(theta*, q_t) over [0, T], then applies inv(A*).  The zero-mean
    normalization of the running integral is immaterial because the time
    average of f(theta*, q_t) vanishes; the leftover is O(1/T) and sits
    inside the quadrature tolerance.  Requires a vectorized field.
    """
    a_star = np.asarray(a_star, dtype=float)
    d = field.d
    if a_star.shape != (d, d):
        raise ValueError(f"a_star must be ({d}, {d})")
    if abs(np.linalg.det(a_star)) < 1e-12:
        raise SingularAStar("a_star is numerically singular")
    if not field.vectorized:
        raise ValueError("ybar_numeric needs a vectorized field evaluation")
    theta_star = np.asarray(theta_star, dtype=float).reshape(d)
    n = int(round(T / dt))
    running = np.zeros((d, d))  # integral of A - A* up to the block start
    acc = np.zeros(d)
    k = 0
    while k < n:
        m = min(_YBAR_CHUNK, n - k)
        t = (k + np.arange(m)) * dt
        if direction is Direction.BACKWARD:
            q = eval_probe_backward(probe, t)
        else:
            q = eval_probe(probe, t)
        fv = np.asarray(field.f(theta_star, q, t)).reshape(m, d)
        da = _jacobian_blocks(field, theta_star, q, t) - a_star
        csum = np.cumsum(da, axis=0)
        csum *= dt
        # exclusive prefix: I at sample k integrates over [0, t_k)
        inner = csum - da * dt
        inner += running
        acc += np.einsum("tij,tj->i", inner, fv)
        running += csum[-1]
        k += m
    upsilon = acc * (dt / T)
    return np.linalg.solve(a_star, upsilon)


def empirical_covariance(
    terminal_states: np.ndarray, T: float = float("nan")
) -> CovarianceSummary:
    """Across-run covariance (1/M) sum x x^T - xbar xbar^T of terminal states."""
    states = np.atleast_2d(np.asarray(terminal_states, dtype=float))
    m = states.shape[0]
    if m < 1:
        raise ValueError("need at least one terminal state")
    theta_bar = states.mean(axis=0)
    second = states.T @ states / m
    sigma = second - np.outer(theta_bar, theta_bar)
    sigma = 0.5 * (sigma + sigma.T)
    return CovarianceSummary(sigma_bar=sigma, theta_bar=theta_bar, M=m, T=float(T))


def fit_rate(
    series: EstimateSeries,
    channel: str,
    theta_star: np.ndarray,
    window: tuple[float, float],
) -> RateFit:
    """OLS of log|estimate - theta*| against log T over grid points in window.

    Zero-error points are dropped and the recorded window shrinks to the
    surviving grid points; fewer than 10 such points is an error.
    """
    values = getattr(series, channel, None)
    if values is None:
        raise ValueError(f"series has no {channel!r} channel")
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError("window must satisfy T_lo < T_hi")
    theta_star = np.asarray(theta_star, dtype=float)
    errs = np.linalg.norm(values - theta_star, axis=1)
    mask = (series.times >= t_lo) & (series.times <= t_hi) & (errs > 0)
    if int(mask.sum()) < 10:
        raise DegenerateWindow(
            f"only {int(mask.sum())} usable grid points in [{t_lo}, {t_hi}]"
        )
    lt = np.log(series.times[mask])
    le = np.log(errs[mask])
    slope, intercept = np.polyfit(lt, le, 1)
    resid = le - (slope * lt + intercept)
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    used = series.times[mask]
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        window=(float(used[0]), float(used[-1])),
    )


def orthogonality_check(
    g,
    h,
    p: ProbingSignal,
    T: float,
    dt: float,
) -> float:
    """Decorrelation of g(q_t) from the re-centered running integral of h.

    Computes H_t = -int_0^t (h(q_s) - mean h) ds on the sample grid,
    re-centers H to zero mean, and returns |mean of g(q_t) H_t|.  Scalar
    g and h; both are evaluated sample by sample.
    """
    n = int(T / dt)
    gv = np.empty(n)
    hv = np.empty(n)
    chunk = 65536
    k = 0
    while k < n:
        m = min(chunk, n - k)
        q = eval_probe(p, (k + np.arange(m)) * dt)
        for i in range(m):
            gv[k + i] = g(q[i])
            hv[k + i] = h(q[i])
        k += m
    hv -= hv.mean()
    big_h = -dt * np.cumsum(hv)
    big_h -= big_h.mean()
    return float(abs(np.mean(gv * big_h)))
