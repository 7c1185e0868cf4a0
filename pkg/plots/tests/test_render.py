"""Rendering: every recipe draws from real artifacts, deterministically."""

from __future__ import annotations

import json
import shutil

import numpy as np
import pytest

from qsaplots import RECIPES, render
from qsaplots.errors import MissingArtifact, SchemaMismatch
from qsaplots.render import exclude_outliers, freedman_diaconis_bins

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _render_twice(recipe_name, src, tmp_path):
    recipe = RECIPES[recipe_name]
    a = render(recipe, src, tmp_path / "a")
    b = render(recipe, src, tmp_path / "b")
    data = a.read_bytes()
    assert data.startswith(PNG_MAGIC) and len(data) > 1000
    assert data == b.read_bytes(), f"{recipe_name} render is not stable"
    return a


class TestRecipesDraw:
    def test_rate_trace_two_panel(self, linear_dir, tmp_path):
        _render_twice("rate_trace", linear_dir, tmp_path)

    def test_rate_trace_single_panel(self, qmc_dir, tmp_path):
        _render_twice("rate_trace", qmc_dir, tmp_path)

    def test_histogram(self, qmc_dir, tmp_path):
        _render_twice("histogram", qmc_dir, tmp_path)

    def test_covariance_trace(self, gfo_dir, tmp_path):
        _render_twice("covariance_trace", gfo_dir, tmp_path)

    def test_loss_curve(self, gfo_dir, tmp_path):
        _render_twice("loss_curve", gfo_dir, tmp_path)

    def test_contour_overlay(self, gfo_dir, tmp_path):
        _render_twice("contour_overlay", gfo_dir, tmp_path)


class TestErrorPaths:
    def test_missing_directory(self, tmp_path):
        with pytest.raises(MissingArtifact):
            render(RECIPES["rate_trace"], tmp_path / "absent", tmp_path)

    def test_histogram_on_empty_aggregate(self, tmp_path):
        (tmp_path / "aggregate.csv").write_text(
            "run_id,estimator,rho,T,error,scaled_error\n"
        )
        with pytest.raises(MissingArtifact):
            render(RECIPES["histogram"], tmp_path, tmp_path / "out")

    def test_covariance_trace_requires_checkpoints(self, gfo_dir, tmp_path):
        work = tmp_path / "copy"
        shutil.copytree(gfo_dir, work)
        doc = json.loads((work / "summary.json").read_text())
        doc["covariance_trace"] = []
        (work / "summary.json").write_text(json.dumps(doc))
        with pytest.raises(MissingArtifact, match="covariance trace"):
            render(RECIPES["covariance_trace"], work, tmp_path / "out")

    def test_contour_overlay_needs_objective(self, qmc_dir, tmp_path):
        with pytest.raises(SchemaMismatch, match="objective"):
            render(RECIPES["contour_overlay"], qmc_dir, tmp_path / "out")

    def test_loss_curve_needs_runs(self, tmp_path):
        src = tmp_path / "empty"
        src.mkdir()
        with pytest.raises(MissingArtifact):
            render(RECIPES["loss_curve"], src, tmp_path / "out")


class TestHistogramRules:
    def test_bins_follow_spread(self):
        rng = np.random.default_rng(0)
        narrow = rng.normal(0.0, 1.0, 1000)
        assert 10 <= freedman_diaconis_bins(narrow) <= 60

    def test_bins_fall_back_on_degenerate_spread(self):
        assert freedman_diaconis_bins(np.ones(100)) == 30
        assert freedman_diaconis_bins(np.array([1.0])) == 30

    def test_outlier_dropped(self):
        values = np.concatenate([np.zeros(50), np.ones(50), [500.0]])
        kept = exclude_outliers(values)
        assert 500.0 not in kept
        assert kept.size == 100

    def test_zero_mad_keeps_everything(self):
        values = np.array([2.0, 2.0, 2.0, 9.0])
        assert exclude_outliers(values).size == 4
