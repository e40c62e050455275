"""JSON Schema loader and validator for experiment configs.

Violations are collected rather than stopping at the first one, and each is
reported with its location in the document, e.g.
``resolution.a: 9 is greater than the maximum of 8``.
"""

from __future__ import annotations

import functools
import json
from pathlib import Path
from typing import Any

import jsonschema
from jsonschema import Draft202012Validator

from ergotile.exceptions import ValidationError

# oss/sdk/python/src/ergotile/schema.py  ->  up 4 parents  ->  oss/
SCHEMA_DIR: Path = Path(__file__).resolve().parents[4] / "contracts" / "schemas"

CONFIG_SCHEMA = "experiment-config.v0.schema.json"

ROOT = "<root>"


def load_schema(name: str) -> dict[str, Any]:
    """Load a JSON schema file by name (extension optional)."""
    path = SCHEMA_DIR / name
    if not path.suffix:
        path = path.with_suffix(".json")
    with open(path) as fh:
        result: dict[str, Any] = json.load(fh)
        return result


@functools.lru_cache(maxsize=None)
def _validator(name: str) -> Draft202012Validator:
    schema = load_schema(name)
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema)


def schema_kinds() -> tuple[str, ...]:
    """Experiment kinds the config schema admits."""
    return tuple(load_schema(CONFIG_SCHEMA)["properties"]["kind"]["enum"])


def _location(error: jsonschema.ValidationError) -> str:
    return ".".join(str(part) for part in error.absolute_path) or ROOT


def config_errors(data: Any) -> list[str]:
    """Every schema violation in *data* as ``location: message``, ordered by location."""
    errors = _validator(CONFIG_SCHEMA).iter_errors(data)
    located = [(_location(error), error.message) for error in errors]
    return [f"{where}: {message}" for where, message in sorted(located)]


def validate_config(data: dict[str, Any]) -> None:
    """Validate *data* against ``experiment-config.v0.schema.json``.

    Raises
    ------
    ValidationError
        If the data does not conform to the schema; ``errors`` holds every
        located violation.
    """
    try:
        errors = config_errors(data)
    except jsonschema.SchemaError as exc:
        raise ValidationError(f"invalid schema {CONFIG_SCHEMA}: {exc.message}") from exc
    except FileNotFoundError as exc:
        raise ValidationError(f"Schema file not found: {exc}") from exc
    if errors:
        raise ValidationError("; ".join(errors), errors)
