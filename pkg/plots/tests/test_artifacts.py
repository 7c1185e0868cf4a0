"""Readers: real experiment directories parse, broken ones raise."""

from __future__ import annotations

import numpy as np
import pytest

from qsaplots.artifacts import (
    list_run_ids,
    load_aggregate,
    load_config_echo,
    load_run_series,
    load_summary,
)
from qsaplots.errors import MissingArtifact, SchemaMismatch


class TestConfigEcho:
    def test_sections_and_values(self, linear_dir):
        echo = load_config_echo(linear_dir)
        assert echo.require("experiment", "kind") == "linear_example"
        assert echo.require_float("gain", "rho") == 0.7

    def test_missing_key_raises(self, linear_dir):
        echo = load_config_echo(linear_dir)
        with pytest.raises(SchemaMismatch, match="no_such_key"):
            echo.require("gain", "no_such_key")

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(MissingArtifact):
            load_config_echo(tmp_path)

    def test_malformed_line_raises(self, tmp_path):
        (tmp_path / "config.echo").write_text("[a]\nnot a pair\n")
        with pytest.raises(SchemaMismatch, match="key = value"):
            load_config_echo(tmp_path)


class TestRunSeries:
    def test_linear_channels(self, linear_dir):
        series = load_run_series(linear_dir, 0)
        assert set(series.channels) == {"raw", "pr", "fb"}
        n = series.times.shape[0]
        assert all(v.shape == (n, 2) for v in series.channels.values())
        assert np.all(np.diff(series.times) > 0)

    def test_comparator_series(self, qmc_dir):
        series = load_run_series(qmc_dir, 1, comparator="mc")
        assert "pr" in series.channels
        assert series.channels["pr"].shape[1] == 1

    def test_run_ids_skip_comparator_files(self, qmc_dir):
        assert list_run_ids(qmc_dir) == [0, 1, 2]

    def test_missing_run_raises(self, qmc_dir):
        with pytest.raises(MissingArtifact):
            load_run_series(qmc_dir, 99)

    def test_bad_column_label_raises(self, tmp_path):
        (tmp_path / "run_0.csv").write_text("t,weird\n0.0,1.0\n")
        with pytest.raises(SchemaMismatch, match="weird"):
            load_run_series(tmp_path, 0)

    def test_header_only_raises(self, tmp_path):
        (tmp_path / "run_0.csv").write_text("t,raw_1,pr_1\n")
        with pytest.raises(MissingArtifact, match="no data rows"):
            load_run_series(tmp_path, 0)


class TestAggregate:
    def test_qmc_rows(self, qmc_dir):
        agg = load_aggregate(qmc_dir)
        assert agg.estimators() == ["pr", "mc"]
        assert agg.scaled_for("pr").shape == (3,)
        assert agg.scaled_for("mc").shape == (3,)
        np.testing.assert_allclose(agg.T, 50.0)

    def test_wrong_header_raises(self, tmp_path):
        (tmp_path / "aggregate.csv").write_text("a,b,c\n1,2,3\n")
        with pytest.raises(SchemaMismatch, match="header"):
            load_aggregate(tmp_path)

    def test_header_only_raises(self, tmp_path):
        (tmp_path / "aggregate.csv").write_text(
            "run_id,estimator,rho,T,error,scaled_error\n"
        )
        with pytest.raises(MissingArtifact, match="no data rows"):
            load_aggregate(tmp_path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(MissingArtifact):
            load_aggregate(tmp_path)


class TestSummary:
    def test_required_keys_present(self, gfo_dir):
        doc = load_summary(gfo_dir)
        assert {"config", "channels", "covariance_trace",
                "runs", "ybar"} <= set(doc)
        assert len(doc["runs"]) == 4

    def test_missing_keys_raise(self, tmp_path):
        (tmp_path / "summary.json").write_text('{"config": {}}')
        with pytest.raises(SchemaMismatch, match="missing keys"):
            load_summary(tmp_path)

    def test_invalid_json_raises(self, tmp_path):
        (tmp_path / "summary.json").write_text("{nope")
        with pytest.raises(SchemaMismatch, match="invalid JSON"):
            load_summary(tmp_path)
