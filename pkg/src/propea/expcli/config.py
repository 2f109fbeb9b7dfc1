"""Experiment configuration: JSON schema, named scenarios, cell expansion."""

from __future__ import annotations

import copy
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import jsonschema

from ..diagnostics import DEFAULT_GAMMA_GRID
from ..engine import RunConfig
from ..fitness import DecompSpec, LinearSpec, onemax, royal_road
from ..operators import SelectionMode
from .. import theory


class ConfigError(ValueError):
    pass


_rule_or_number = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "string"}]}

CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "propea experiment",
    "type": "object",
    "required": ["fitness"],
    "additionalProperties": False,
    "properties": {
        "scenario": {"type": "string"},
        "fitness": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["onemax", "linear", "royalroad", "decomp"]},
                "n": {"type": "integer", "minimum": 1},
                "weights": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "r": {"type": "integer", "minimum": 1},
                "blocks": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 1}}},
                "satisfying": {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
            },
        },
        "selection": {
            "type": "object",
            "required": ["mode"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["proportionate", "scaled", "uniform", "truncation"]},
                "c": {"type": "number", "exclusiveMinimum": 1},
                "mu": {"type": "integer", "minimum": 1},
            },
        },
        "mutation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "chi": _rule_or_number,
                "c": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "lambda": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "string"}]},
        "max_evaluations": _rule_or_number,
        "max_generations": {"type": ["integer", "null"], "minimum": 1},
        "cadence": {"type": "integer", "minimum": 1},
        "gamma_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "lambda": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "chi": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
            },
        },
        "replications": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "workers": {"type": "integer", "minimum": 1},
        "rule_params": {"type": "object"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "csv": {"type": "string"},
                "json": {"type": "string"},
                "traces_dir": {"type": "string"},
            },
        },
    },
}

DEFAULTS = {
    "scenario": "custom",
    "selection": {"mode": "proportionate"},
    "mutation": {"chi": 1.0},
    "lambda": 100,
    "max_evaluations": 10 ** 6,
    "max_generations": None,
    "cadence": 10,
    "gamma_grid": list(DEFAULT_GAMMA_GRID),
    "sweep": {},
    "replications": 1,
    "base_seed": 0,
    "workers": 1,
    "rule_params": {},
    "output": {},
}


def _low_rate_chi(n, a1, p):
    return (1 - p["c"]) / (n * a1)


CHI_RULES = {"low-rate": _low_rate_chi}

LAMBDA_RULES = {
    "low-rate-desk": lambda n, a1, p: 50 * n,
    "scaled-desk": lambda n, a1, p: max(50, math.ceil(10 * math.log(n))),
    "negative": lambda n, a1, p: math.ceil(n ** (2 + p.get("lambda_exponent_delta", 0.1))),
    "low-rate": lambda n, a1, p: math.ceil(theory.low_rate_lambda_min(n, a1, p["c"])),
    "low-rate-order": lambda n, a1, p: math.ceil(p.get("c_prime", 1.0) * n ** 2 * a1 ** 2 * math.log(n * a1)),
    "scaled": lambda n, a1, p: math.ceil(theory.regime_scaled(n, p["chi"], p["scale_c"]).derived["lam_min"]),
    "decomposed": lambda n, a1, p: math.ceil(p.get("c_prime", 1.0) * n ** 2 * a1 ** 2 * p["r"] * math.log(n * a1)),
}

BUDGET_RULES = {
    "low-rate-desk": lambda n, lam: 50 * n ** 2 * lam * math.log(lam),
    "scaled-desk": lambda n, lam: 100 * (n * lam * math.log(lam) + n ** 2),
}


def scenario(name: str, desk_scale: bool = True) -> dict:
    """Built-in experiment mirroring one regime.

    ``desk_scale`` swaps the regime's population-size requirement, which is
    far too conservative to simulate, for fixed practical values.
    """
    if name == "negative-standard-rate":
        cfg = {"fitness": {"kind": "onemax"}, "selection": {"mode": "proportionate"},
               "mutation": {"chi": 1.0}, "lambda": 1000 if desk_scale else "negative",
               "max_evaluations": 10 ** 7, "sweep": {"n": [100]}, "replications": 10, "cadence": 10}
    elif name == "positive-low-rate":
        cfg = {"fitness": {"kind": "onemax"}, "selection": {"mode": "proportionate"},
               "mutation": {"chi": "low-rate", "c": 0.5},
               "lambda": "low-rate-desk" if desk_scale else "low-rate",
               "max_evaluations": "low-rate-desk", "sweep": {"n": [10, 20, 40]},
               "replications": 20, "cadence": 50}
    elif name == "positive-scaled":
        cfg = {"fitness": {"kind": "onemax"}, "selection": {"mode": "scaled", "c": 8.0},
               "mutation": {"chi": 1.0}, "lambda": "scaled-desk" if desk_scale else "scaled",
               "max_evaluations": "scaled-desk", "sweep": {"n": [50, 100, 200]},
               "replications": 20, "cadence": 10}
    elif name == "royalroad-low-rate":
        cfg = {"fitness": {"kind": "royalroad", "r": 2}, "selection": {"mode": "proportionate"},
               "mutation": {"chi": "low-rate", "c": 0.5}, "lambda": 2000 if desk_scale else "decomposed",
               "max_evaluations": 10 ** 8, "sweep": {"n": [20]}, "replications": 20, "cadence": 50}
    else:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    cfg["scenario"] = name
    return cfg


SCENARIOS = ("negative-standard-rate", "positive-low-rate", "positive-scaled", "royalroad-low-rate")


@dataclass
class Cell:
    index: int
    n: int
    lam: int
    chi: float
    c: Optional[float]
    selection: str
    max_evaluations: int
    run_config: RunConfig = field(repr=False)

    def params(self) -> dict:
        return {"n": self.n, "lambda": self.lam, "chi": self.chi, "c": self.c, "selection": self.selection}


@dataclass
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ConfigError(f"invalid config: {e.message}") from None
        merged = copy.deepcopy(DEFAULTS)
        merged.update(copy.deepcopy(d))
        cfg = cls(merged)
        cfg.cells()  # every cell must yield a valid RunConfig
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def replications(self) -> int:
        return self.raw["replications"]

    @property
    def base_seed(self) -> int:
        return self.raw["base_seed"]

    def _fitness(self, n: Optional[int]):
        f = self.raw["fitness"]
        kind = f["kind"]
        n = n if n is not None else f.get("n")
        if kind == "linear":
            spec = LinearSpec.from_raw(f["weights"])
            if n is not None and n != spec.n:
                raise ConfigError(f"linear weights have length {spec.n}, but n={n}")
            return spec
        if kind == "decomp":
            blocks = [[p - 1 for p in b] for b in f["blocks"]]
            n = n if n is not None else sum(len(b) for b in blocks)
            return DecompSpec.build(n, blocks, f["satisfying"], f.get("weights"))
        if n is None:
            raise ConfigError(f"fitness kind {kind!r} needs n (in fitness or sweep)")
        if kind == "onemax":
            return onemax(n)
        if "r" not in f:
            raise ConfigError("royalroad needs block length r")
        return royal_road(n, f["r"], f.get("weights"))

    def _selection(self) -> SelectionMode:
        s = self.raw["selection"]
        return SelectionMode(s["mode"], c=s.get("c"), mu=s.get("mu"))

    def _rule_params(self, chi=None) -> dict:
        p = dict(self.raw["rule_params"])
        mut = self.raw["mutation"]
        if "c" in mut:
            p.setdefault("c", mut["c"])
        sel = self.raw["selection"]
        if sel.get("c") is not None:
            p.setdefault("scale_c", sel["c"])
        if "r" in self.raw["fitness"]:
            p.setdefault("r", self.raw["fitness"]["r"])
        if chi is not None:
            p.setdefault("chi", chi)
        return p

    def cells(self) -> List[Cell]:
        sweep = self.raw["sweep"]
        ns = sweep.get("n", [None])
        lams = sweep.get("lambda", [self.raw["lambda"]])
        chis = sweep.get("chi", [self.raw["mutation"].get("chi", 1.0)])
        sel = self._selection()
        out = []
        for idx, (n, lam, chi) in enumerate(itertools.product(ns, lams, chis)):
            spec = self._fitness(n)
            n_eff = spec.n
            a1 = spec.max_weight
            p = self._rule_params()
            c_label = None
            if isinstance(chi, str):
                if chi not in CHI_RULES:
                    raise ConfigError(f"unknown chi rule {chi!r}")
                if "c" not in p:
                    raise ConfigError("chi rule 'low-rate' needs mutation.c")
                chi = CHI_RULES[chi](n_eff, a1, p)
                c_label = p["c"]
            p["chi"] = chi
            if isinstance(lam, str):
                if lam not in LAMBDA_RULES:
                    raise ConfigError(f"unknown lambda rule {lam!r}")
                try:
                    lam = int(LAMBDA_RULES[lam](n_eff, a1, p))
                except KeyError as e:
                    raise ConfigError(f"lambda rule needs parameter {e}") from None
            budget = self.raw["max_evaluations"]
            if isinstance(budget, str):
                if budget not in BUDGET_RULES:
                    raise ConfigError(f"unknown budget rule {budget!r}")
                budget = BUDGET_RULES[budget](n_eff, lam)
            budget = int(math.ceil(budget))
            if sel.c is not None:
                c_label = sel.c
            try:
                rc = RunConfig(fitness=spec, selection=sel, chi=float(chi), lam=int(lam),
                               max_evaluations=budget, max_generations=self.raw["max_generations"],
                               cadence=self.raw["cadence"], gammas=tuple(self.raw["gamma_grid"]))
            except ValueError as e:
                raise ConfigError(str(e)) from None
            out.append(Cell(idx, n_eff, int(lam), float(chi), c_label, sel.label(), budget, rc))
        return out


def apply_overrides(d: dict, **flags) -> dict:
    """Merge CLI flag values (None = not given) into a raw config dict."""
    d = copy.deepcopy(d)
    if flags.get("n") is not None:
        d.setdefault("sweep", {})["n"] = flags["n"]
    if flags.get("lam") is not None:
        d.setdefault("sweep", {})["lambda"] = flags["lam"]
    if flags.get("chi") is not None:
        d.setdefault("sweep", {})["chi"] = flags["chi"]
    for key in ("replications", "base_seed", "workers", "cadence", "max_evaluations", "max_generations"):
        if flags.get(key) is not None:
            d[key] = flags[key]
    if flags.get("selection") is not None:
        d["selection"] = {"mode": flags["selection"]}
        if flags.get("scale_c") is not None:
            d["selection"]["c"] = flags["scale_c"]
        if flags.get("mu") is not None:
            d["selection"]["mu"] = flags["mu"]
    out = d.setdefault("output", {})
    for key in ("csv", "json", "traces_dir"):
        if flags.get(key) is not None:
            out[key] = str(Path(flags[key]))
    return d
