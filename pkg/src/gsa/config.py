"""Problem configuration files (JSON syntax).

Layout::

    {
      "seed": 1,
      "out_dir": "results/flood",                 # optional, --out-dir wins
      "inputs": [
        {"name": "Q", "dist": {"kind": "trunc_gumbel", "loc": 1013, "scale": 558,
                               "lo": 500, "hi": 3000}},
        {"name": "Zm", "dist": {...}, "fixed": "nominal"},   # or a number
        ...
      ],
      "model": {"builtin": "flood"}
             | {"analytic": "linear", "coefficients": [...], "intercept": 0}
             | {"external": {"command": ["python3", "sim.py"], "header": true}},
      "analyses": {
        "morris":     {"r": 10, "levels": 4, "delta": null, "use_fixed": false},
        "regression": {"n": 100, "design": "lhs", "test_n": 1000},
        "sobol":      {"n": 10000, "first_order": "saltelli", "total": "jansen",
                       "second_order": false, "ci": {"method": "bootstrap", "B": 200, "level": 0.95}},
        "metamodel":  {"n": 100, "design": "lhs", "degree": 2, "interactions": true, "sobol_n": 10000},
        "report":     {"n": 10000, "design": "monte_carlo", "bins": 20, "top_fraction": 0.05}
      }
    }

Every analysis block may also carry ``"outputs": [...]`` to restrict the
outputs analysed and ``"use_fixed": false`` to sample the fixed inputs too.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import distributions as dist_mod
from .distributions import InputSpace
from .errors import GSAError, ParameterError

ANALYSES = ("morris", "regression", "sobol", "metamodel", "report")


class ConfigError(GSAError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class ProblemConfig:
    full_space: InputSpace
    fixed: dict[str, float]
    model: dict[str, Any]
    analyses: dict[str, dict[str, Any]]
    seed: int = 0
    out_dir: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def space(self) -> InputSpace:
        """The sampled inputs (fixed ones removed)."""
        return self.full_space.without(list(self.fixed))

    def block_space(self, block: str) -> tuple[InputSpace, dict[str, float]]:
        opts = self.analyses[block]
        if opts.get("use_fixed", True):
            return self.space, dict(self.fixed)
        return self.full_space, {}

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ConfigError(f"{where}.{key}" if where else key, "missing required field")
    return obj[key]


def parse_config(raw: dict) -> ProblemConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    inputs = _require(raw, "inputs", "")
    if not isinstance(inputs, list) or not inputs:
        raise ConfigError("inputs", "must be a non-empty list")
    pairs, fixed = [], {}
    for k, item in enumerate(inputs):
        where = f"inputs[{k}]"
        name = _require(item, "name", where)
        spec = _require(item, "dist", where)
        try:
            dist = dist_mod.from_dict(spec)
        except ParameterError as exc:
            fld = f"{where}.dist.kind" if "kind" in str(exc) else f"{where}.dist"
            raise ConfigError(fld, str(exc)) from None
        pairs.append((name, dist))
        if "fixed" in item:
            val = item["fixed"]
            if val == "nominal":
                fixed[name] = dist_mod.nominal_value(dist)
            elif isinstance(val, (int, float)) and not isinstance(val, bool):
                fixed[name] = float(val)
            else:
                raise ConfigError(f"{where}.fixed", "must be a number or \"nominal\"")
    try:
        full = InputSpace.from_pairs(pairs)
    except ParameterError as exc:
        raise ConfigError("inputs", str(exc)) from None
    if len(fixed) == full.d:
        raise ConfigError("inputs", "every input is fixed; nothing to sample")

    model = _require(raw, "model", "")
    kinds = [k for k in ("builtin", "analytic", "external") if k in model]
    if len(kinds) != 1:
        raise ConfigError("model", "exactly one of builtin / analytic / external is required")

    analyses = raw.get("analyses")
    if not isinstance(analyses, dict) or not analyses:
        raise ConfigError("analyses", "at least one analysis block is required")
    unknown = set(analyses) - set(ANALYSES)
    if unknown:
        raise ConfigError(f"analyses.{sorted(unknown)[0]}", f"unknown analysis; choose from {ANALYSES}")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    return ProblemConfig(full, fixed, model, analyses, seed, raw.get("out_dir"), raw)


def load_config(path) -> ProblemConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(str(path), "file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None
    return parse_config(raw)
