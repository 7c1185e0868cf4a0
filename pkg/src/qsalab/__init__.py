"""Deterministic-probing stochastic approximation toolkit.

Root finding driven by periodic probing signals instead of random noise,
with flat-window (Polyak-Ruppert style) averaging, a forward-backward
bias-cancelling filter, gradient-free optimizers built on the same
machinery, and a quasi-Monte Carlo estimator. The harness subpackage runs
configured experiments and writes CSV/JSON artifacts.
"""

from .averaging import (
    AveragingConfig,
    EstimateSeries,
    c_kappa_rho,
    fb_combine,
    pr_average,
    read_estimates_csv,
    write_estimates_csv,
)
from .core import (
    BoxConstraint,
    Direction,
    GainSchedule,
    NonFiniteState,
    Trajectory,
    VectorFieldSpec,
    gain_at,
    integrate,
    write_trajectory_csv,
)
from .errors import QsaError
from .probing import (
    FrequencySpec,
    ProbingSignal,
    Waveform,
    eval_probe,
    eval_probe_backward,
    make_log_rational_frequencies,
    make_sin_probe,
    probe_covariance,
)

__version__ = "0.1.0"

__all__ = [
    "AveragingConfig",
    "BoxConstraint",
    "Direction",
    "EstimateSeries",
    "FrequencySpec",
    "GainSchedule",
    "NonFiniteState",
    "ProbingSignal",
    "QsaError",
    "Trajectory",
    "VectorFieldSpec",
    "Waveform",
    "c_kappa_rho",
    "eval_probe",
    "eval_probe_backward",
    "fb_combine",
    "gain_at",
    "integrate",
    "make_log_rational_frequencies",
    "make_sin_probe",
    "pr_average",
    "probe_covariance",
    "read_estimates_csv",
    "write_estimates_csv",
    "write_trajectory_csv",
    "__version__",
]
