"""Shared pytest fixtures for ergotile SDK tests."""

from __future__ import annotations

from pathlib import Path

import pytest

from ergotile.rng import SplitMix64


@pytest.fixture()
def rng() -> SplitMix64:
    """A fresh stream with a fixed seed."""
    return SplitMix64(20240601)


@pytest.fixture()
def tmp_dir(tmp_path: Path) -> Path:
    """Temporary directory for experiment artifacts."""
    return tmp_path


@pytest.fixture()
def write_config(tmp_path: Path):
    """Write a YAML config file and return its path."""

    def _write(text: str, name: str = "config.yaml") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
