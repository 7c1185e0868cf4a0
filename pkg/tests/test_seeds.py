"""Seed-stream derivation: stability, separation, reproducibility."""

import numpy as np

from qsalab.seeds import (
    FREQUENCIES,
    MC_DRAWS,
    PHASES,
    SPSA,
    THETA0,
    derive_token,
    experiment_rng,
    run_rng,
    run_token,
)


class TestPurposeLabels:
    def test_labels_are_distinct_and_frozen(self):
        labels = (PHASES, THETA0, MC_DRAWS, SPSA, FREQUENCIES)
        assert labels == (0, 1, 2, 3, 4)
        assert len(set(labels)) == len(labels)


class TestRunRng:
    def test_reproducible(self):
        a = run_rng(314159, PHASES, 7).uniform(size=8)
        b = run_rng(314159, PHASES, 7).uniform(size=8)
        np.testing.assert_array_equal(a, b)

    def test_runs_separated(self):
        a = run_rng(314159, PHASES, 0).uniform(size=8)
        b = run_rng(314159, PHASES, 1).uniform(size=8)
        assert not np.array_equal(a, b)

    def test_purposes_separated(self):
        a = run_rng(314159, PHASES, 0).uniform(size=8)
        b = run_rng(314159, THETA0, 0).uniform(size=8)
        assert not np.array_equal(a, b)

    def test_masters_separated(self):
        a = run_rng(314159, PHASES, 0).uniform(size=8)
        b = run_rng(314160, PHASES, 0).uniform(size=8)
        assert not np.array_equal(a, b)


class TestExperimentRng:
    def test_shared_across_runs_by_construction(self):
        a = experiment_rng(2024, FREQUENCIES).uniform(size=4)
        b = experiment_rng(2024, FREQUENCIES).uniform(size=4)
        np.testing.assert_array_equal(a, b)

    def test_purposes_separated(self):
        a = experiment_rng(2024, FREQUENCIES).uniform(size=4)
        b = experiment_rng(2024, PHASES).uniform(size=4)
        assert not np.array_equal(a, b)


class TestTokens:
    def test_derive_token_stable(self):
        assert derive_token(99, SPSA, 3) == derive_token(99, SPSA, 3)

    def test_derive_token_separates_axes(self):
        base = derive_token(99, SPSA, 3)
        assert derive_token(99, SPSA, 4) != base
        assert derive_token(99, MC_DRAWS, 3) != base
        assert derive_token(100, SPSA, 3) != base

    def test_run_token_stable_and_distinct(self):
        assert run_token(5, 0) == run_token(5, 0)
        tokens = {run_token(5, rid) for rid in range(100)}
        assert len(tokens) == 100

    def test_tokens_fit_in_unsigned_32_bits(self):
        for rid in range(10):
            assert 0 <= run_token(123, rid) < 2**32
            assert 0 <= derive_token(123, PHASES, rid) < 2**32
