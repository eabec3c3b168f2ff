"""Experiment configuration: a single JSON document validated up front."""

import hashlib
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .env import ChainSpec, PeriodicEnv
from .errors import ConfigError

_num = {"type": "number"}
_num_list = {"type": "array", "items": _num, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["environment"],
    "properties": {
        "environment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["chain", "periodic"]},
                "states": _num_list,
                "generator": {"type": "array", "items": _num_list},
                "observable": _num_list,
                "sigma": _num_list,
                "b": _num_list,
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                            "minItems": 1},
                "kappa": {"type": "number", "exclusiveMinimum": 0},
                "x0": _num,
                "T": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "cells": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "scheme": {"enum": ["euler", "timechange"]},
                "quenched": {"type": "boolean"},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eta": {"type": "number", "exclusiveMinimum": 0},
                "estimator": {"enum": ["crude", "tilted"]},
                "replicas": {"type": "integer", "minimum": 1},
                "which": {"enum": ["drift", "diffusion"]},
                "tilt": {"type": "number", "minimum": 0},
                "U": {"type": "number", "exclusiveMinimum": 0},
                "r": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "q": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "paths": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv"]}},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

SIM_DEFAULTS = {"epsilon": [0.1], "kappa": 0.1, "x0": 0.0, "T": 1.0, "dt": None,
                "cells": None, "scheme": "euler", "quenched": False}
SCAN_DEFAULTS = {"eta": 0.5, "estimator": "crude", "replicas": 1000, "which": "drift",
                 "tilt": None, "U": 10.0, "r": [1.0, 2.0, 3.0, 4.0], "q": [5.0, 10.0, 20.0]}
OUTPUT_DEFAULTS = {"paths": "results", "formats": ["csv"]}


@dataclass
class ExperimentConfig:
    environment: object
    simulation: dict
    scan: dict
    output: dict
    seed: int
    raw: dict

    @property
    def digest(self):
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def is_chain(self):
        return isinstance(self.environment, ChainSpec)


def _build_env(block):
    if block["kind"] == "chain":
        missing = [k for k in ("states", "generator", "observable") if k not in block]
        extra = [k for k in ("sigma", "b") if k in block]
        if missing or extra:
            raise ConfigError(f"chain environment: missing {missing}, not allowed {extra}")
        return ChainSpec(np.array(block["states"]), np.array(block["generator"], dtype=float),
                         np.array(block["observable"]))
    missing = [k for k in ("sigma", "b") if k not in block]
    extra = [k for k in ("states", "generator", "observable") if k in block]
    if missing or extra:
        raise ConfigError(f"periodic environment: missing {missing}, not allowed {extra}")
    return PeriodicEnv(np.array(block["sigma"]), np.array(block["b"]))


def parse_config(raw, seed=None):
    """Validate a decoded JSON document and build the environment.

    Raises :class:`ConfigError` (or a domain error such as
    ``InvalidGenerator``) before any computation happens.
    """
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    env = _build_env(raw["environment"])
    sim = {**SIM_DEFAULTS, **raw.get("simulation", {})}
    scan = {**SCAN_DEFAULTS, **raw.get("scan", {})}
    out = {**OUTPUT_DEFAULTS, **raw.get("output", {})}
    if sim["dt"] is not None and sim["dt"] > sim["T"]:
        raise ConfigError("simulation/dt: larger than T")
    return ExperimentConfig(env, sim, scan, out, int(raw.get("seed", 0) if seed is None else seed), raw)


def load_config(path, seed=None):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(raw, seed)
