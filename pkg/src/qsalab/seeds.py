"""Labeled deterministic seed streams derived from one master seed.

Every random quantity in an experiment comes from a stream keyed by
(master_seed, purpose[, run_id]), so adding a comparator or reordering
runs never perturbs the draws of an existing stream.
"""

from __future__ import annotations

import numpy as np

# purpose labels; appending new ones is fine, renumbering is not
PHASES = 0
THETA0 = 1
MC_DRAWS = 2
SPSA = 3
FREQUENCIES = 4


def run_rng(master_seed: int, purpose: int, run_id: int) -> np.random.Generator:
    """Generator private to one (purpose, run) pair."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(purpose), int(run_id)])
    )


def experiment_rng(master_seed: int, purpose: int) -> np.random.Generator:
    """Generator shared by every run of one experiment (e.g. frequency draws)."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(purpose)])
    )


def derive_token(master_seed: int, purpose: int, run_id: int) -> int:
    """Integer seed for components that take a plain seed argument."""
    seq = np.random.SeedSequence([int(master_seed), int(purpose), int(run_id)])
    return int(seq.generate_state(1)[0])


def run_token(master_seed: int, run_id: int) -> int:
    """Stable per-run identifier recorded in run summaries."""
    seq = np.random.SeedSequence([int(master_seed), int(run_id)])
    return int(seq.generate_state(1)[0])
