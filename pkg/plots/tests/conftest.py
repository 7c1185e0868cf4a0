"""Artifact fixtures: tiny experiment directories produced by driving the
qsalab command line, which is the only interface this package may rely on."""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

LINEAR_CFG = """\
[experiment]
kind = linear_example
runs = 1
master_seed = 0
channels = raw, pr, fb
comparators =

[model]
a_star_diag = -0.8
omega_rad = 0.6283185307179586, 0.34641016151377546, 0.8, 0.447213595499958
forcing_scale = 10.0
theta0 = 5.0, -5.0

[probe]
style = model

[gain]
a0 = 1.0
rho = 0.7
capped = false

[integration]
T = 200.0
Ts = 0.01
store_stride = 100

[averaging]
kappa = 4.0
"""

QMC_CFG = """\
[experiment]
kind = qmc
runs = 3
master_seed = 7
channels = pr
comparators = mc

[model]
gamma = 1.0
dim = 2
theta0 = uniform
theta0_range = -25.0, 25.0

[probe]
style = explicit
waveform = triangle
log_rational_pairs = 6/1, 2/1
phi_cycles = uniform
v = identity

[gain]
a0 = 1.0
rho = 0.7
capped = false

[integration]
T = 50.0
Ts = 0.1
store_stride = 10

[averaging]
kappa = 5.0
"""

GFO_CFG = """\
[experiment]
kind = gfo
runs = 4
master_seed = 11
channels = raw, pr
comparators =

[model]
objective = rastrigin
dim = 2
epsilon = 0.25
method = 1qsgd
theta0 = uniform_box

[probe]
style = random_sin
freq_range_rad = 0.05, 0.5
amplitude = 2.0
phase_range_rad = -1.5707963267948966, 1.5707963267948966

[gain]
a0 = 0.5
rho = 0.85
capped = true

[integration]
T = 400.0
Ts = 1.0
store_stride = 10

[averaging]
kappa = 5.0
"""


def produce_artifacts(cfg_text: str, name: str, root: Path) -> Path:
    cfg_path = root / f"{name}.cfg"
    cfg_path.write_text(cfg_text)
    out_root = root / "results"
    proc = subprocess.run(
        [sys.executable, "-m", "qsalab", "run",
         "--config", str(cfg_path), "--out", str(out_root)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, (
        f"artifact producer failed ({proc.returncode}):\n{proc.stderr}"
    )
    out_dir = out_root / name
    assert (out_dir / "summary.json").is_file()
    return out_dir


@pytest.fixture(scope="session")
def linear_dir(tmp_path_factory) -> Path:
    return produce_artifacts(LINEAR_CFG, "linear_small",
                             tmp_path_factory.mktemp("linear"))


@pytest.fixture(scope="session")
def qmc_dir(tmp_path_factory) -> Path:
    return produce_artifacts(QMC_CFG, "qmc_small",
                             tmp_path_factory.mktemp("qmc"))


@pytest.fixture(scope="session")
def gfo_dir(tmp_path_factory) -> Path:
    return produce_artifacts(GFO_CFG, "gfo_small",
                             tmp_path_factory.mktemp("gfo"))
