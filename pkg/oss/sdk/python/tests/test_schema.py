"""Tests for the config schema loader."""

from __future__ import annotations

import pytest

from ergotile.exceptions import ValidationError
from ergotile.experiments import ExperimentRegistry
from ergotile.schema import CONFIG_SCHEMA, config_errors, load_schema, schema_kinds, validate_config


def test_schema_loads_without_extension() -> None:
    """The schema resolves with or without its .json suffix."""
    assert load_schema(CONFIG_SCHEMA) == load_schema(CONFIG_SCHEMA.removesuffix(".json"))


def test_schema_kinds_match_registry() -> None:
    """Every registered experiment kind is allowed by the schema, and only those."""
    assert sorted(schema_kinds()) == ExperimentRegistry.default().names()


def test_valid_document() -> None:
    """A well-formed document validates."""
    validate_config({"kind": "grids", "seed": 0, "resolution": {"a": 3, "b": 4}})


@pytest.mark.parametrize(
    "doc",
    [
        {},
        {"kind": "grids", "seed": -1},
        {"kind": "grids", "kernel": {"kind": "fejer"}},
        {"kind": "grids", "scales": {"U": [1]}},
        {"kind": "grids", "extra": True},
    ],
)
def test_invalid_documents(doc: dict) -> None:
    """Schema violations raise ValidationError."""
    with pytest.raises(ValidationError):
        validate_config(doc)


def test_every_violation_is_located() -> None:
    """All violations come back at once, ordered by their place in the document."""
    doc = {"kind": "grids", "seed": -1, "resolution": {"a": 9, "b": 4}, "extra": True}
    errors = config_errors(doc)
    assert [line.split(":")[0] for line in errors] == ["<root>", "resolution.a", "seed"]
    assert "'extra' was unexpected" in errors[0]
    assert errors[1] == "resolution.a: 9 is greater than the maximum of 8"
    with pytest.raises(ValidationError) as info:
        validate_config(doc)
    assert info.value.errors == tuple(errors)


def test_nested_array_location() -> None:
    errors = config_errors({"kind": "grids", "scales": {"U": [0, "one"]}})
    assert errors == ["scales.U.1: 'one' is not of type 'integer'"]


def test_valid_document_has_no_errors() -> None:
    assert config_errors({"kind": "packets", "profile": "paper"}) == []
