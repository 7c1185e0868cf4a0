"""Session fixtures: expensive runs computed once and shared across files.

The linear-example integrations at T=1e5 (~30 s each) and the 1500-run QMC
error sample (~8 min) dominate suite runtime; every test that needs them
pulls from these lazy caches.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from qsalab.analysis import make_linear_example, ybar_numeric
from qsalab.averaging import AveragingConfig, fb_combine, pr_average
from qsalab.core import Direction, GainSchedule, integrate
from qsalab.probing import ProbingSignal, Waveform
from qsalab.qmc import make_exp_sin_target, mc_baseline, qmc_estimate
from qsalab.seeds import MC_DRAWS, PHASES, THETA0, derive_token, run_rng

LINEAR_T = 1.0e5
LINEAR_TS = 0.01
LINEAR_STRIDE = 100
LINEAR_THETA0 = (5.0, -5.0)
LINEAR_KAPPA = 4.0

QMC_MASTER = 314159
QMC_T = 1.0e4
QMC_TS = 0.1
QMC_STRIDE = 100
QMC_KAPPA = 5.0
QMC_OMEGA = (math.log(6.0), math.log(2.0))


@pytest.fixture(scope="session")
def linear_model():
    return make_linear_example()


@pytest.fixture(scope="session")
def linear_runs(linear_model):
    """rho -> EstimateSeries (raw/pr/fb) at T=1e5; computed on first use."""
    field, probe = linear_model.field(), linear_model.probe()
    acfg = AveragingConfig(LINEAR_KAPPA)
    theta0 = np.array(LINEAR_THETA0)
    cache: dict[float, object] = {}

    def get(rho: float):
        if rho not in cache:
            g = GainSchedule(1.0, rho)
            fwd = integrate(field, probe, g, theta0, LINEAR_T, LINEAR_TS,
                            store_stride=LINEAR_STRIDE)
            bwd = integrate(field, probe, g, theta0, LINEAR_T, LINEAR_TS,
                            direction=Direction.BACKWARD,
                            store_stride=LINEAR_STRIDE)
            cache[rho] = fb_combine(pr_average(fwd, acfg),
                                    pr_average(bwd, acfg))
        return cache[rho]

    return get


@pytest.fixture(scope="session")
def ybar_pair(linear_model):
    """direction -> numeric bias vector on the linear example at T=1e5."""
    cache: dict[str, np.ndarray] = {}

    def get(direction: str) -> np.ndarray:
        if direction not in cache:
            d = (Direction.BACKWARD if direction == "backward"
                 else Direction.FORWARD)
            cache[direction] = ybar_numeric(
                linear_model.field(), linear_model.probe(),
                theta_star=np.zeros(2), a_star=linear_model.a_star,
                T=1.0e5, dt=1.0e-3, direction=d,
            )
        return cache[direction]

    return get


def qmc_probe(phases) -> ProbingSignal:
    return ProbingSignal(
        d=2, v=np.eye(2), omega=np.array(QMC_OMEGA),
        phi=np.asarray(phases, dtype=float), waveform=Waveform.TRIANGLE,
    )


def qmc_qsa_error(run_id: int, rho: float) -> float:
    """Terminal PR error of one protocol run (true mean is zero)."""
    phases = run_rng(QMC_MASTER, PHASES, run_id).uniform(0.0, 1.0, 2)
    theta0 = float(run_rng(QMC_MASTER, THETA0, run_id).uniform(-25.0, 25.0))
    est = qmc_estimate(
        make_exp_sin_target(1.0), qmc_probe(phases),
        GainSchedule(1.0, rho), theta0, QMC_T, QMC_TS,
        AveragingConfig(QMC_KAPPA), store_stride=QMC_STRIDE,
    )
    return float(est.pr[-1, 0])


def qmc_mc_error(run_id: int, rho: float) -> float:
    """Terminal PR error of the i.i.d.-driven twin at the same budget."""
    theta0 = float(run_rng(QMC_MASTER, THETA0, run_id).uniform(-25.0, 25.0))
    est, _ = mc_baseline(
        make_exp_sin_target(1.0), GainSchedule(1.0, rho), theta0,
        QMC_T, QMC_TS, AveragingConfig(QMC_KAPPA),
        derive_token(QMC_MASTER, MC_DRAWS, run_id),
        store_stride=QMC_STRIDE,
    )
    return float(est.pr[-1, 0])


@pytest.fixture(scope="session")
def qmc_error_sample():
    """500-run terminal error arrays: QSA at rho 0.7 and 0.8, MC at 0.7.

    build_seconds records the wall clock spent producing all 1500 runs so
    the budgeted test can check it no matter which test triggers the build.
    """
    t0 = time.perf_counter()
    err07 = np.array([qmc_qsa_error(r, 0.7) for r in range(500)])
    err08 = np.array([qmc_qsa_error(r, 0.8) for r in range(500)])
    errmc = np.array([qmc_mc_error(r, 0.7) for r in range(500)])
    return {"qsa07": err07, "qsa08": err08, "mc07": errmc,
            "build_seconds": time.perf_counter() - t0}
