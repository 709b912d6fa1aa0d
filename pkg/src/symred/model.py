"""Model configuration: JSON schema, validation and the assembled model object."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import jsonschema

from .builtins import BUILTIN_HAMILTONIANS
from .errors import ConfigError, SymredError
from .groups import FiniteMatrixGroup, GroupSpec, MatrixLieAlgebra, Torus, momentum_map
from .poly import Poly, coordinate_names
from .symplin import SymplecticSpace

_number = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]}
_matrix = {"type": "array", "items": {"type": "array", "items": _number}}

TASK_TYPES = ["invariants", "strata", "simulate", "verify", "slice"]

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["space", "group", "tasks"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "space": {
            "type": "object",
            "required": ["dim"],
            "additionalProperties": False,
            "properties": {"dim": {"type": "integer", "minimum": 2, "multipleOf": 2}},
        },
        "group": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "generators"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "finite"},
                        "generators": {"type": "array", "minItems": 1, "items": _matrix},
                        "order_bound": {"type": "integer", "minimum": 1},
                    },
                },
                {
                    "type": "object",
                    "required": ["type", "weights"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "torus"},
                        "weights": {"type": "array", "minItems": 1, "items": {"type": "array", "items": {"type": "integer"}}},
                    },
                },
                {
                    "type": "object",
                    "required": ["type", "basis"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "lie_algebra"},
                        "basis": {"type": "array", "minItems": 1, "items": _matrix},
                        "structure_constants": {"type": "array"},
                    },
                },
            ]
        },
        "hamiltonian": {"type": "string"},
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type"],
                "properties": {"type": {"enum": TASK_TYPES}},
            },
        },
        "seed": {"type": "integer"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
        "output_dir": {"type": "string"},
        "expect": {"type": "object"},
    },
}

SAMPLED_TASKS = {"strata", "simulate", "verify", "slice"}


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from None
    d = cfg["space"]["dim"]
    g = cfg["group"]
    if g["type"] == "finite":
        for M in g["generators"]:
            if len(M) != d or any(len(r) != d for r in M):
                raise ConfigError(f"group generators must be {d}x{d}")
    elif g["type"] == "torus":
        if len({len(r) for r in g["weights"]}) != 1 or 2 * len(g["weights"][0]) != d:
            raise ConfigError(f"torus weights must have {d // 2} columns")
    else:
        for M in g["basis"]:
            if len(M) != d or any(len(r) != d for r in M):
                raise ConfigError(f"Lie algebra basis matrices must be {d}x{d}")
    if any(t["type"] in SAMPLED_TASKS for t in cfg["tasks"]) and "seed" not in cfg:
        raise ConfigError("a seed is required for sampled tasks")
    for t in cfg["tasks"]:
        if t["type"] == "simulate":
            if "v0" in t and len(t["v0"]) != d:
                raise ConfigError(f"simulate.v0 must have {d} entries")
            if "hamiltonian" not in cfg:
                raise ConfigError("simulate needs a hamiltonian")


def _exact(M):
    return tuple(tuple(Fraction(x) if not isinstance(x, float) else Fraction(x).limit_denominator(10**12) for x in r) for r in M)


def build_group(g: dict) -> GroupSpec:
    if g["type"] == "finite":
        return FiniteMatrixGroup(tuple(_exact(M) for M in g["generators"]), g.get("order_bound", 1024))
    if g["type"] == "torus":
        return Torus(tuple(tuple(r) for r in g["weights"]))
    return MatrixLieAlgebra(tuple(_exact(M) for M in g["basis"]), g.get("structure_constants"))


def parse_hamiltonian(text: str, n: int) -> Poly:
    if text.startswith("builtin:"):
        name = text.split(":", 1)[1]
        if name not in BUILTIN_HAMILTONIANS:
            raise ConfigError(f"unknown builtin hamiltonian {name!r}")
        text = BUILTIN_HAMILTONIANS[name](n)
    try:
        return Poly.from_text(text, coordinate_names(n))
    except ValueError as exc:
        raise ConfigError(f"cannot parse hamiltonian: {exc}") from None


@dataclass(eq=False)
class Model:
    config: dict
    spec: GroupSpec
    space: SymplecticSpace
    hamiltonian: Poly | None
    seed: int
    tolerance_scale: float = 1.0
    cache: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.config.get("name", "model")

    @property
    def expect(self) -> dict:
        return self.config.get("expect", {})

    def tol(self, key: str, default: float) -> float:
        return float(self.config.get("tolerances", {}).get(key, default)) * self.tolerance_scale

    @cached_property
    def F(self):
        return momentum_map(self.spec, self.space)

    @cached_property
    def hilbert(self):
        from .invariants import invariant_generators

        return invariant_generators(self.spec)

    @cached_property
    def poisson(self):
        from .invariants import reduced_structure_matrix

        return reduced_structure_matrix(self.hilbert)

    @cached_property
    def strata(self):
        from .strata import enumerate_strata

        return enumerate_strata(self.spec, self.space, self.F, seed=self.seed)


def load_model(cfg: dict, seed: int | None = None, tolerance_scale: float = 1.0) -> Model:
    validate_config(cfg)
    try:
        spec = build_group(cfg["group"])
    except SymredError as exc:
        raise ConfigError(f"invalid group: {exc}") from None
    d = cfg["space"]["dim"]
    if spec.dim != d:
        raise ConfigError(f"group acts on R^{spec.dim} but the space has dimension {d}")
    h = parse_hamiltonian(cfg["hamiltonian"], d // 2) if "hamiltonian" in cfg else None
    return Model(cfg, spec, SymplecticSpace.standard(d // 2), h, cfg.get("seed", 0) if seed is None else seed, tolerance_scale)
