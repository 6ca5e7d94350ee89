"""Run configuration: JSON schema, validation and defaults."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema

from .errors import ConfigError
from .schedule import STRATEGY_NAMES

_DATASET = {
    "type": "object",
    "oneOf": [
        {"required": ["synthetic"]},
        {"required": ["directory"]},
        {"required": ["cache"]},
    ],
    "properties": {
        "synthetic": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "n"],
            "properties": {
                "kind": {"enum": ["binary_blobs", "kclass_textures"]},
                "n": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "difficulty": {"type": "number", "minimum": 0, "maximum": 1},
                "classes": {"type": "integer", "minimum": 2},
                "shift": {"type": "number", "minimum": 0},
            },
        },
        "directory": {"type": "string"},
        "cache": {"type": "string"},
        "storage": {"enum": ["f16", "f32"]},
    },
    "additionalProperties": False,
}

_STAGE = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 4, "maxItems": 4}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "stagelab run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["strategy", "output_dir", "pretrain_data"],
    "properties": {
        "strategy": {"enum": list(STRATEGY_NAMES)},
        "preset": {
            "oneOf": [
                {"enum": ["nano", "resnet50"]},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["stages"],
                    "properties": {
                        "input_shape": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                        "minItems": 3, "maxItems": 3},
                        "stem_width": {"type": "integer", "minimum": 1},
                        "stem_kernel": {"type": "integer", "minimum": 1},
                        "stages": {"type": "array", "items": _STAGE, "minItems": 1},
                    },
                },
            ]
        },
        "archive": {"type": ["string", "null"]},
        "generic_data": _DATASET,
        "pretrain_data": _DATASET,
        "holdout": {"type": "number", "minimum": 0, "maximum": 0.9},
        "overrides": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epochs": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "learning_rates": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "batch_size": {"type": "integer", "minimum": 1},
            },
        },
        "class_weighting": {"type": "boolean"},
        "downstream": {
            "type": "object",
            "additionalProperties": False,
            "required": ["data"],
            "properties": {
                "model": {"enum": ["model1", "model2"]},
                "data": _DATASET,
                "external": _DATASET,
                "split": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "epochs": {"type": "integer", "minimum": 0},
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "precision": {"enum": ["f32", "f64"]},
        "output_dir": {"type": "string", "minLength": 1},
        "energy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "device_count": {"type": "integer", "minimum": 1},
                "device_power": {"type": "number", "exclusiveMinimum": 0},
                "usage_factor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "memory_gb": {"type": "number", "minimum": 0},
                "memory_power_per_gb": {"type": "number", "minimum": 0},
                "pue": {"type": "number", "minimum": 1},
                "psf": {"type": "number", "minimum": 1},
                "carbon_intensity": {"type": ["number", "null"], "minimum": 0},
            },
        },
    },
}


@dataclass
class RunConfig:
    strategy: str
    output_dir: str
    pretrain_data: dict
    preset: object = "nano"
    archive: str | None = None
    generic_data: dict | None = None
    holdout: float = 0.2
    overrides: dict = field(default_factory=dict)
    class_weighting: bool = False
    downstream: dict | None = None
    seed: int = 0
    precision: str = "f32"
    energy: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: v for k, v in vars(self).items()}


def _path(error):
    return ".".join(str(p) for p in error.absolute_path) or "<root>"


def validate(doc):
    """Check ``doc`` against :data:`SCHEMA`; raise :class:`ConfigError` with a field path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), e.path))
    if errors:
        err = errors[0]
        if err.validator == "additionalProperties":
            # name the offending key in the path
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            base = _path(err)
            key = extra[0] if extra else ""
            path = key if base == "<root>" else f"{base}.{key}"
            raise ConfigError(path, "unknown key")
        raise ConfigError(_path(err), err.message)
    return RunConfig(**doc)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    return validate(doc)
