"""Shared pytest fixtures for ergotile contract validation tests."""

import json
from pathlib import Path

import pytest

CONTRACTS_DIR = Path(__file__).resolve().parent.parent
SCHEMAS_DIR = CONTRACTS_DIR / "schemas"
EXAMPLES_DIR = CONTRACTS_DIR / "examples"


def _load_json(path: Path) -> dict:
    """Load and parse a JSON file."""
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture(scope="session")
def config_schema() -> dict:
    """Load the experiment config JSON Schema."""
    return _load_json(SCHEMAS_DIR / "experiment-config.v0.schema.json")


@pytest.fixture(scope="session")
def valid_examples() -> dict[str, dict]:
    """Every valid-*.json example, by file name."""
    return {p.name: _load_json(p) for p in sorted(EXAMPLES_DIR.glob("valid-*.json"))}


@pytest.fixture(scope="session")
def invalid_examples() -> dict[str, dict]:
    """Every invalid-*.json example, by file name."""
    return {p.name: _load_json(p) for p in sorted(EXAMPLES_DIR.glob("invalid-*.json"))}
