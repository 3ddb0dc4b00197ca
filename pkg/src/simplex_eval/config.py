"""Run configuration: a JSON document validated against a published schema.

Unknown keys are rejected at every level. Command-line flags override the
file through :func:`merge_overrides`.
"""

from __future__ import annotations

import copy
import json
from dataclasses import fields
from pathlib import Path

import jsonschema

from .hmc import HmcConfig

EVALUATORS = ("uniform", "mle-dirichlet", "ndod", "ndod-zero", "bnn")
MEASURE_NAMES = ("l2", "kl", "auc")

_POS_INT = {"type": "integer", "minimum": 1}
_POS_NUM = {"type": "number", "exclusiveMinimum": 0}
_SEED = {"type": ["integer", "null"], "minimum": 0}

_HMC_PROPS = {
    "leapfrog_steps": _POS_INT,
    "target_accept": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "n_chains": _POS_INT,
    "convergence_window": {"type": "integer", "minimum": 2},
    "slope_threshold": _POS_NUM,
    "reference_window": _POS_INT,
    "cross_chain_tol": _POS_NUM,
    "n_adapt": {"type": "integer", "minimum": 0},
    "adapt_interval": _POS_INT,
    "adapt_rate": _POS_NUM,
    "initial_step_size": _POS_NUM,
    "check_interval": _POS_INT,
    "max_iterations": _POS_INT,
    "max_lag": {"type": ["integer", "null"], "minimum": 1},
    "seed": _SEED,
}
assert set(_HMC_PROPS) == {f.name for f in fields(HmcConfig)}

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "simplex-eval run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "evaluator": {"enum": list(EVALUATORS)},
        "evaluators": {
            "type": "array",
            "items": {"enum": list(EVALUATORS)},
            "minItems": 1,
            "uniqueItems": True,
        },
        "bnn": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hidden_units": {"type": ["integer", "null"], "minimum": 1},
                "sigma2": _POS_NUM,
                "weight_bound": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "hmc": {"type": "object", "additionalProperties": False, "properties": _HMC_PROPS},
        "ndod": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"max_attempts": _POS_INT},
        },
        "mle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "learning_rate": _POS_NUM,
                "max_iter": _POS_INT,
                "tol": _POS_NUM,
                "precision_max": _POS_NUM,
            },
        },
        "draws": _POS_INT,
        "measures": {
            "type": "array",
            "items": {"enum": list(MEASURE_NAMES)},
            "minItems": 1,
            "uniqueItems": True,
        },
        "mass": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "seed": _SEED,
        "per_split": {"type": "boolean"},
        "bins": _POS_INT,
    },
}

DEFAULTS = {
    "evaluator": "ndod",
    "evaluators": list(EVALUATORS),
    "bnn": {"hidden_units": None, "sigma2": 0.1, "weight_bound": None},
    "hmc": {},
    "ndod": {"max_attempts": 10_000},
    "mle": {"learning_rate": 0.01, "max_iter": 10_000, "tol": 1e-6, "precision_max": 1e6},
    "draws": 14_000,
    "measures": ["l2"],
    "mass": 0.95,
    "seed": 0,
    "per_split": False,
    "bins": 40,
}


def validate_config(doc):
    jsonschema.validate(doc, RUN_CONFIG_SCHEMA)


def _deep_merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None):
    """Defaults updated by the JSON file at ``path`` (validated first)."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
        validate_config(doc)
    return _deep_merge(DEFAULTS, doc)


def merge_overrides(cfg, **flags):
    """Apply non-None command-line values on top of ``cfg``."""
    out = _deep_merge(cfg, {k: v for k, v in flags.items() if v is not None})
    validate_config(out)
    return out


def hmc_config(cfg):
    hmc = dict(cfg["hmc"])
    hmc.setdefault("seed", cfg["seed"])
    return HmcConfig(**hmc)
