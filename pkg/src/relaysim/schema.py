"""JSON schema for plan/config files and a validator with readable diagnostics."""

import json

import jsonschema

_complex = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_pos = {"type": "number", "exclusiveMinimum": 0}

SYSTEM_SCHEMA = {
    "type": "object",
    "required": ["constellation", "K", "prior", "csi", "noise", "relay"],
    "additionalProperties": False,
    "properties": {
        "constellation": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "K": {"type": "integer", "minimum": 1},
        "prior": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "csi": {
            "type": "object",
            "required": ["h_hat", "g_hat", "sigma_h_sq", "sigma_g_sq"],
            "additionalProperties": False,
            "properties": {
                "h_hat": {"type": "array", "items": _complex, "minItems": 1},
                "g_hat": {"type": "array", "items": _complex, "minItems": 1},
                "sigma_h_sq": {"type": "number", "minimum": 0},
                "sigma_g_sq": {"type": "number", "minimum": 0},
            },
        },
        "noise": {
            "type": "object",
            "required": ["sigma_w_sq", "sigma_v_sq"],
            "additionalProperties": False,
            "properties": {"sigma_w_sq": _pos, "sigma_v_sq": _pos},
        },
        "relay": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["linear", "tanh"]},
                "mode": {"enum": ["componentwise", "modulus_phase"]},
            },
        },
    },
}

PLAN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "config": SYSTEM_SCHEMA,
        "L_grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "snr_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "frames": {"type": "integer", "minimum": 1},
        "detectors": {
            "type": "array", "minItems": 1, "uniqueItems": True,
            "items": {"enum": ["mcmc-abc", "mcmc-av", "ses-zf", "omap"]},
        },
        "abc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pooling": {"enum": ["all", "per_symbol"]},
                "complex_mode": {"enum": ["split", "modulus"]},
                "metric": {"enum": ["mahalanobis", "scaled_euclidean", "euclidean", "city_block"]},
                "weighting": {"enum": ["sd", "hd"]},
                "epsilon": {"oneOf": [_pos, {"const": "auto"}]},
                "epsilon_quantile": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "epsilon_factor": _pos,
                "covariance_draws": {"type": "integer", "minimum": 2},
                "n_datasets": {"type": "integer", "minimum": 1},
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N": {"type": "integer", "minimum": 2},
                "burn_in": {"type": "integer", "minimum": 1},
                "tune": {"type": "boolean"},
                "target": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
                           "minItems": 2, "maxItems": 2},
                "initial_scales": {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3},
            },
        },
        "tolerance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L": {"type": "integer", "minimum": 1},
                "snr_db": {"type": "number"},
                "epsilons": {"type": "array", "items": _pos, "minItems": 1},
                "baseline_epsilon": _pos,
                "baseline_N": {"type": "integer", "minimum": 2},
                "N": {"type": "integer", "minimum": 2},
                "burn_in": {"type": "integer", "minimum": 1},
                "datasets": {"type": "integer", "minimum": 1},
                "tuning_target": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
                                  "minItems": 2, "maxItems": 2},
                "max_lag": {"type": "integer", "minimum": 1},
                "pooling": {"enum": ["all", "per_symbol"]},
                "epsilon_unit": {"oneOf": [_pos, {"const": "self-distance"}]},
            },
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    },
}


class ConfigError(ValueError):
    """A config file that cannot be parsed or fails the schema."""


def load_plan_json(path):
    """Parse and schema-check a plan file; errors name the line or field at fault."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    validate_plan(data, path)
    return data


def validate_plan(data, source="<plan>"):
    errors = sorted(jsonschema.Draft202012Validator(PLAN_SCHEMA).iter_errors(data), key=lambda e: list(e.path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.path) or "(root)"
            lines.append(f"{source}: field {where}: {e.message}")
        raise ConfigError("\n".join(lines))
