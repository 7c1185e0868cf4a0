"""Experiment harness: config grammar, artifacts, CLI, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from qsalab.harness.cli import main as cli_main
from qsalab.harness.config import (
    ParseError,
    ValidationError,
    load_config,
    parse_config,
    serialize_config,
)
from qsalab.harness.runner import (
    MissingArtifact,
    analyze_dir,
    checkpoint_indices,
    run_experiment,
)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "qsalab" / "configs"


def _qmc_text(runs=3, T=50.0, a0=1.0, rho=0.7, capped="false",
              comparators="mc"):
    return f"""\
[experiment]
kind = qmc
runs = {runs}
master_seed = 314159
channels = pr
comparators = {comparators}

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
a0 = {a0}
rho = {rho}
capped = {capped}

[integration]
T = {T}
Ts = 0.1
store_stride = 10

[averaging]
kappa = 5.0
"""


class TestConfigGrammar:
    def test_round_trip_identity(self):
        cfg = parse_config(_qmc_text(), "<test>")
        text = serialize_config(cfg)
        again = parse_config(text, "<echo>")
        assert again == cfg
        assert serialize_config(again) == text

    def test_load_config_accepts_text_or_path(self, tmp_path):
        text = _qmc_text()
        from_text = load_config(text)
        path = tmp_path / "exp.cfg"
        path.write_text(text)
        from_path = load_config(path)
        assert from_text == from_path

    def test_unknown_section_rejected_with_location(self):
        bad = _qmc_text() + "\n[plotting]\nstyle = fancy\n"
        with pytest.raises(ParseError) as err:
            parse_config(bad, "exp.cfg")
        assert "exp.cfg" in str(err.value)
        assert "plotting" in str(err.value)

    def test_unknown_key_rejected(self):
        bad = _qmc_text().replace("kappa = 5.0", "kappa = 5.0\nwindow = 3")
        with pytest.raises(ParseError) as err:
            parse_config(bad, "exp.cfg")
        assert "window" in str(err.value)

    def test_duplicate_key_rejected(self):
        bad = _qmc_text().replace("rho = 0.7", "rho = 0.7\nrho = 0.8")
        with pytest.raises(ParseError):
            parse_config(bad, "exp.cfg")

    def test_key_in_wrong_section_rejected(self):
        bad = _qmc_text().replace("kappa = 5.0", "kappa = 5.0\ngamma = 2.0")
        with pytest.raises(ParseError):
            parse_config(bad, "exp.cfg")

    def test_missing_required_key_rejected(self):
        bad = _qmc_text().replace("rho = 0.7\n", "")
        with pytest.raises(ValidationError) as err:
            parse_config(bad, "exp.cfg")
        assert "rho" in str(err.value)

    def test_optional_gain_scale_defaults_to_one(self):
        cfg = parse_config(_qmc_text().replace("a0 = 1.0\n", ""), "<t>")
        assert cfg.gain.a0 == 1.0


class TestConfigValidation:
    def test_kappa_must_exceed_one(self):
        with pytest.raises(ValidationError):
            parse_config(_qmc_text().replace("kappa = 5.0", "kappa = 1.0"),
                         "<t>")

    def test_dependent_pairs_rejected(self):
        bad = _qmc_text().replace("6/1, 2/1", "4/1, 2/1")
        with pytest.raises(ValidationError):
            parse_config(bad, "<t>")

    def test_rho_domain(self):
        with pytest.raises(ValidationError):
            parse_config(_qmc_text(rho=0.0), "<t>")
        with pytest.raises(ValidationError):
            parse_config(_qmc_text(rho=1.5), "<t>")

    def test_stride_must_divide(self):
        bad = _qmc_text().replace("store_stride = 10", "store_stride = 7")
        with pytest.raises(ValidationError):
            parse_config(bad, "<t>")

    def test_horizon_ordering(self):
        with pytest.raises(ValidationError):
            parse_config(_qmc_text(T=0.05), "<t>")

    def test_unknown_channel_rejected(self):
        bad = _qmc_text().replace("channels = pr", "channels = pr, magic")
        with pytest.raises(ValidationError):
            parse_config(bad, "<t>")

    def test_linear_kind_refuses_comparators(self):
        text = (CONFIG_DIR / "linear_fig2.cfg").read_text()
        bad = text.replace("comparators =", "comparators = mc")
        with pytest.raises(ValidationError):
            parse_config(bad, "<t>")

    def test_qmc_refuses_spsa_comparator(self):
        with pytest.raises(ValidationError):
            parse_config(_qmc_text(comparators="spsa1"), "<t>")

    def test_runs_must_be_positive(self):
        with pytest.raises(ValidationError):
            parse_config(_qmc_text(runs=0), "<t>")


class TestShippedConfigs:
    @pytest.mark.parametrize("name", ["linear_fig2.cfg", "qmc_hist.cfg",
                                      "gfo_rastrigin.cfg"])
    def test_parse_and_echo_stable(self, name):
        text = (CONFIG_DIR / name).read_text()
        cfg = parse_config(text, name)
        assert serialize_config(cfg) == text

    def test_shipped_kinds_cover_all_three(self):
        kinds = {parse_config((CONFIG_DIR / n).read_text(), n).kind
                 for n in ("linear_fig2.cfg", "qmc_hist.cfg",
                           "gfo_rastrigin.cfg")}
        assert kinds == {"linear_example", "qmc", "gfo"}


class TestCheckpointIndices:
    def test_log_spaced_within_bounds(self):
        times = np.arange(0.0, 1000.5, 0.5)
        idx = checkpoint_indices(times)
        assert len(idx) <= 16
        assert len(idx) == len(np.unique(idx))
        picked = times[idx]
        assert picked[0] >= 10.0 - 0.5  # T/100 up to grid rounding
        assert picked[-1] == pytest.approx(1000.0)

    def test_short_grid_still_works(self):
        times = np.arange(0.0, 11.0, 1.0)
        idx = checkpoint_indices(times)
        assert len(idx) >= 1
        assert idx[0] >= 1  # never the initial point


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out_root = tmp_path_factory.mktemp("qmc_small")
    cfg = parse_config(_qmc_text(), "<t>")
    out_dir, summaries = run_experiment(cfg, "qmc_small",
                                        out_root=out_root, threads=1)
    return cfg, out_dir, summaries


class TestRunExperiment:
    def test_artifact_files_present(self, small_run):
        _, out_dir, _ = small_run
        names = {p.name for p in out_dir.iterdir()}
        assert "config.echo" in names
        assert "aggregate.csv" in names
        assert "summary.json" in names
        for k in range(3):
            assert f"run_{k}.csv" in names
            assert f"run_{k}_mc.csv" in names

    def test_config_echo_matches_serializer(self, small_run):
        cfg, out_dir, _ = small_run
        assert (out_dir / "config.echo").read_text() == serialize_config(cfg)

    def test_aggregate_row_count_and_schema(self, small_run):
        _, out_dir, _ = small_run
        lines = (out_dir / "aggregate.csv").read_text().splitlines()
        assert lines[0] == "run_id,estimator,rho,T,error,scaled_error"
        body = lines[1:]
        assert len(body) == 3 * 2  # runs x (channels + comparators)
        estimators = [ln.split(",")[1] for ln in body]
        assert estimators.count("pr") == 3
        assert estimators.count("mc") == 3

    def test_scaled_error_column_consistent(self, small_run):
        _, out_dir, _ = small_run
        for ln in (out_dir / "aggregate.csv").read_text().splitlines()[1:]:
            _, _, rho, T, err, scaled = ln.split(",")
            assert float(scaled) == pytest.approx(
                float(T) ** (2.0 * float(rho)) * float(err), rel=1e-12)

    def test_summary_schema(self, small_run):
        _, out_dir, summaries = small_run
        doc = json.loads((out_dir / "summary.json").read_text())
        assert set(doc) == {"config", "channels", "covariance_trace", "runs",
                            "ybar"}
        assert doc["ybar"] == {}  # closed form only exists for the linear kind
        assert len(doc["runs"]) == 3
        entry = doc["runs"][0]
        assert set(entry) == {"run_id", "seed", "terminal",
                              "objective_evaluations", "wall_clock_s",
                              "diverged"}
        assert not entry["diverged"]
        assert len(summaries) == 3

    def test_thread_count_does_not_change_artifacts(self, small_run,
                                                    tmp_path):
        cfg, out_dir, _ = small_run
        redo_dir, _ = run_experiment(cfg, "qmc_small", out_root=tmp_path,
                                     threads=2)
        assert (redo_dir / "aggregate.csv").read_bytes() == \
            (out_dir / "aggregate.csv").read_bytes()
        for k in range(3):
            assert (redo_dir / f"run_{k}.csv").read_bytes() == \
                (out_dir / f"run_{k}.csv").read_bytes()

    def test_analyze_dir_idempotent(self, small_run):
        _, out_dir, _ = small_run
        before = (out_dir / "summary.json").read_bytes()
        analyze_dir(out_dir)
        assert (out_dir / "summary.json").read_bytes() == before

    def test_analyze_missing_dir_raises(self, tmp_path):
        with pytest.raises(MissingArtifact):
            analyze_dir(tmp_path / "nowhere")


class TestLinearSummaryExtras:
    def test_ybar_block_present(self, tmp_path):
        text = (CONFIG_DIR / "linear_fig2.cfg").read_text() \
            .replace("T = 100000.0", "T = 200.0") \
            .replace("Ts = 0.01", "Ts = 0.1") \
            .replace("store_stride = 1000", "store_stride = 20")
        cfg = parse_config(text, "<t>")
        out_dir, _ = run_experiment(cfg, "linear_small", out_root=tmp_path,
                                    threads=1)
        doc = json.loads((out_dir / "summary.json").read_text())
        assert "ybar" in doc
        np.testing.assert_allclose(
            doc["ybar"]["closed_form"],
            [-200.0 / np.pi, -20.0 * np.sqrt(5.0)], rtol=1e-12)


class TestCli:
    def test_validate_ok(self, tmp_path):
        path = tmp_path / "ok.cfg"
        path.write_text(_qmc_text())
        assert cli_main(["validate", "--config", str(path)]) == 0

    def test_validate_bad_config(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(_qmc_text().replace("kappa = 5.0", "kappa = 1.0"))
        assert cli_main(["validate", "--config", str(path)]) == 3

    def test_usage_errors(self):
        assert cli_main([]) == 2
        assert cli_main(["run", "--no-such-flag"]) == 2

    def test_negative_runs_override(self, tmp_path):
        path = tmp_path / "ok.cfg"
        path.write_text(_qmc_text())
        assert cli_main(["run", "--config", str(path), "--runs", "-2",
                         "--out", str(tmp_path / "out")]) == 2

    def test_run_and_analyze(self, tmp_path):
        path = tmp_path / "ok.cfg"
        path.write_text(_qmc_text(runs=2))
        out = tmp_path / "out"
        assert cli_main(["run", "--config", str(path),
                         "--out", str(out)]) == 0
        produced = list(out.iterdir())
        assert len(produced) == 1
        assert cli_main(["analyze", "--in", str(produced[0])]) == 0

    def test_analyze_missing_dir(self, tmp_path):
        assert cli_main(["analyze", "--in", str(tmp_path / "gone")]) == 3

    def test_divergence_exit_code(self, tmp_path):
        path = tmp_path / "div.cfg"
        path.write_text(_qmc_text(runs=1, a0=1000.0, rho=0.55))
        out = tmp_path / "out"
        assert cli_main(["run", "--config", str(path),
                         "--out", str(out)]) == 4
        produced = list(out.iterdir())[0]
        doc = json.loads((produced / "summary.json").read_text())
        assert doc["runs"][0]["diverged"]
        agg = (produced / "aggregate.csv").read_text().splitlines()[1:]
        assert all("nan" in ln for ln in agg)

    def test_list_objectives(self, capsys):
        assert cli_main(["list-objectives"]) == 0
        out = capsys.readouterr().out
        for name in ("rastrigin", "ackley", "three_hump_camel"):
            assert name in out
