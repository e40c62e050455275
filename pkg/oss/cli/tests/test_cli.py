"""Tests for the ergotile CLI using typer.testing.CliRunner."""

from __future__ import annotations

from pathlib import Path

import pytest
from typer.testing import CliRunner

from ergotile_cli.main import EXIT_CONFIG, app

runner = CliRunner()


@pytest.fixture(autouse=True)
def _work_in_tmp(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> Path:
    """Run every command from a temp directory so results/ lands there."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _config(tmp_path: Path, text: str, name: str = "config.yaml") -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# ------------------------------------------------------------------
# run
# ------------------------------------------------------------------


class TestRun:
    def test_transfer_bridge(self, tmp_path: Path) -> None:
        config = _config(tmp_path, "kind: transfer-bridge\nseed: 5\nparams:\n  cases: 2\n")
        result = runner.invoke(app, ["run", config])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "results" / "transfer-bridge-seed5.csv").exists()
        assert "transfer-bridge-seed5.txt" in result.stdout

    def test_output_dir_override(self, tmp_path: Path) -> None:
        config = _config(tmp_path, "kind: lemma7\nparams:\n  pairs: 20\n  spread: 8\n")
        result = runner.invoke(app, ["run", config, "--output-dir", str(tmp_path / "out")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "lemma7-seed1.csv").exists()

    def test_unknown_kind_exits_2(self, tmp_path: Path) -> None:
        config = _config(tmp_path, "kind: fourier\n")
        result = runner.invoke(app, ["run", config])
        assert result.exit_code == EXIT_CONFIG

    def test_missing_file_exits_2(self, tmp_path: Path) -> None:
        result = runner.invoke(app, ["run", str(tmp_path / "absent.yaml")])
        assert result.exit_code == EXIT_CONFIG
        assert "config file not found" in result.output

    def test_rejected_tile_constants_exit_2(self, tmp_path: Path) -> None:
        config = _config(tmp_path, "kind: lemma7\ntiles:\n  e: 2\n")
        result = runner.invoke(app, ["run", config])
        assert result.exit_code == EXIT_CONFIG
        assert "tile constants" in result.output


# ------------------------------------------------------------------
# validate
# ------------------------------------------------------------------


class TestValidate:
    def test_valid(self, tmp_path: Path) -> None:
        config = _config(tmp_path, "kind: ergodic\nprofile: paper\nseed: 9\n")
        result = runner.invoke(app, ["validate", config])
        assert result.exit_code == 0
        assert "ok: ergodic (profile paper, seed 9)" in result.stdout

    def test_schema_failure(self, tmp_path: Path) -> None:
        config = _config(tmp_path, "kind: ergodic\nsead: 9\n")
        result = runner.invoke(app, ["validate", config])
        assert result.exit_code == EXIT_CONFIG
        assert "1 schema violation(s)" in result.output
        assert "  - <root>: Additional properties are not allowed ('sead' was unexpected)" in result.output


# ------------------------------------------------------------------
# list-experiments / describe
# ------------------------------------------------------------------


class TestListAndDescribe:
    def test_list_experiments(self) -> None:
        result = runner.invoke(app, ["list-experiments"])
        assert result.exit_code == 0
        names = [line.split()[0] for line in result.stdout.splitlines() if line.strip()]
        assert len(names) == 16
        assert "transfer-bridge" in names

    def test_describe(self) -> None:
        result = runner.invoke(app, ["describe", "oscillation-scaling"])
        assert result.exit_code == 0
        assert "j_values" in result.stdout

    def test_describe_unknown(self) -> None:
        result = runner.invoke(app, ["describe", "fourier"])
        assert result.exit_code == EXIT_CONFIG
