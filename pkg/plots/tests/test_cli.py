"""Command line contract: exit codes and cross-process determinism."""

from __future__ import annotations

import subprocess
import sys

from qsaplots.cli import main
from qsaplots.recipes import RECIPES


class TestExitCodes:
    def test_list_names_every_recipe(self, capsys):
        assert main(["list"]) == 0
        out = capsys.readouterr().out
        for name in RECIPES:
            assert name in out

    def test_no_command_is_usage_error(self, capsys):
        assert main([]) == 2

    def test_unknown_recipe_is_usage_error(self, tmp_path, capsys):
        code = main(["render", "--recipe", "nope",
                     "--in", str(tmp_path), "--out", str(tmp_path)])
        assert code == 2
        assert "nope" in capsys.readouterr().err

    def test_missing_artifacts_exit_3(self, tmp_path, capsys):
        src = tmp_path / "empty"
        src.mkdir()
        code = main(["render", "--recipe", "histogram",
                     "--in", str(src), "--out", str(tmp_path / "out")])
        assert code == 3
        assert "not found" in capsys.readouterr().err

    def test_successful_render_prints_path(self, qmc_dir, tmp_path, capsys):
        code = main(["render", "--recipe", "histogram",
                     "--in", str(qmc_dir), "--out", str(tmp_path)])
        assert code == 0
        printed = capsys.readouterr().out.strip()
        assert printed.endswith("histogram.png")
        assert (tmp_path / "histogram.png").is_file()


class TestCrossProcessDeterminism:
    def test_two_processes_agree_byte_for_byte(self, linear_dir, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            proc = subprocess.run(
                [sys.executable, "-m", "qsaplots", "render",
                 "--recipe", "rate_trace",
                 "--in", str(linear_dir), "--out", str(out)],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, proc.stderr
            outs.append(out / "rate_trace.png")
        assert outs[0].read_bytes() == outs[1].read_bytes()
