"""Schema validation tests for the experiment config contract.

Valid examples must pass, invalid examples must fail, and the schema must
carry its meta fields and list every registered experiment kind.
"""

import pytest
from jsonschema import Draft202012Validator, ValidationError


class TestValidExamples:
    """Valid example configs pass schema validation."""

    def test_examples_present(self, valid_examples: dict):
        assert len(valid_examples) >= 2

    def test_valid_examples_pass(self, config_schema: dict, valid_examples: dict):
        validator = Draft202012Validator(config_schema)
        for name, doc in valid_examples.items():
            errors = list(validator.iter_errors(doc))
            assert not errors, f"{name}: {errors[0].message if errors else ''}"


class TestInvalidExamples:
    """Invalid example configs fail schema validation."""

    def test_invalid_examples_fail(self, config_schema: dict, invalid_examples: dict):
        validator = Draft202012Validator(config_schema)
        for name, doc in invalid_examples.items():
            with pytest.raises(ValidationError):
                validator.validate(doc)

    def test_unknown_top_level_key_fails(self, config_schema: dict):
        with pytest.raises(ValidationError):
            Draft202012Validator(config_schema).validate({"kind": "grids", "sead": 3})

    def test_zero_gap_fails(self, config_schema: dict):
        with pytest.raises(ValidationError):
            Draft202012Validator(config_schema).validate({"kind": "lemma7", "tiles": {"e": 0}})


class TestSchemaMeta:
    """The schema is well formed and carries its meta fields."""

    def test_schema_is_valid_draft_2020_12(self, config_schema: dict):
        Draft202012Validator.check_schema(config_schema)

    def test_meta_fields(self, config_schema: dict):
        for key in ("$schema", "$id", "title", "description", "schema_version"):
            assert key in config_schema

    def test_kind_enum_sorted_and_unique(self, config_schema: dict):
        kinds = config_schema["properties"]["kind"]["enum"]
        assert kinds == sorted(set(kinds))
        assert "lemma7" in kinds and "transfer-bridge" in kinds
