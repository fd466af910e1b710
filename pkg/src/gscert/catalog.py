"""Problem specifications and the built-in catalog of worked cases."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field as dc_field, replace
from typing import Optional

from .errors import InputError
from .expr import ParsedFunction, parse
from .field import VectorField
from .flow import IntegratorConfig


@dataclass(frozen=True)
class ProblemSpec:
    dimension: int
    field_components: tuple
    scalar_function: str = "0"
    radius: float = 1.0
    constant_c: Optional[float] = None
    seed: int = 42
    # value of f at the origin for removable singularities such as exp(-1/x1^2)
    f_origin_value: Optional[float] = None
    integrator: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "field_components", tuple(self.field_components))
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise InputError(f"dimension must be a positive integer, got {self.dimension!r}")
        if not self.radius > 0:
            raise InputError(f"radius must be positive, got {self.radius!r}")
        unknown = set(self.integrator) - set(IntegratorConfig.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown integrator settings: {sorted(unknown)}")

    def field(self) -> VectorField:
        return VectorField.parse(list(self.field_components), self.dimension)

    def function(self) -> ParsedFunction:
        return parse(self.scalar_function, self.dimension, self.f_origin_value)

    def validate(self) -> "ProblemSpec":
        self.field()
        self.function()
        return self

    def integrator_config(self, **overrides) -> IntegratorConfig:
        values = {"escape_radius": self.radius}
        values.update(self.integrator)
        values.update(overrides)
        return IntegratorConfig(**values)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["field_components"] = list(self.field_components)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise InputError(f"unknown problem spec keys: {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"invalid problem spec: {exc}") from None

    @classmethod
    def load(cls, path) -> "ProblemSpec":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read problem spec {path}: {exc}") from None
        return cls.from_dict(data)

    def with_changes(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    spec: ProblemSpec
    expected_conclusion: str
    note: str


def _entry(name, dim, field, f, expected, note, radius=1.0, c=None, origin=None):
    spec = ProblemSpec(dim, tuple(field), f, radius, c, 42, origin)
    return CatalogEntry(name, spec, expected, note)


_ENTRIES = [
    _entry("paper-example-n2-zero-f", 2, ["x1", "x2"], "0", "MustVanish",
           "h(x) = x in the plane with the zero function; Jh = I, <h(x),x> = |x|^2"),
    _entry("paper-example-n3-zero-f", 3, ["x1", "x2", "x3"], "0", "MustVanish",
           "h(x) = x in R^3 with the zero function"),
    _entry("nonlinear-source-2d", 2, ["x1 + x2^2", "x2 - x1*x2"], "0", "MustVanish",
           "nonlinear source with Jh(0) = I and <h(x),x> = |x|^2"),
    _entry("flat-bump-1d", 1, ["x1"], "exp(-1/(x1^2))", "HypothesisFailed(constant)",
           "flat, nonzero; x f'/f = 2/x^2 has no finite bound", radius=0.5, origin=0.0),
    _entry("flat-bump-2d", 2, ["x1", "x2"], "exp(-1/(x1^2 + x2^2))", "HypothesisFailed(constant)",
           "radial flat function; h.f / f = 2/|x|^2", radius=0.5, origin=0.0),
    _entry("flat-bump-1d-large-c", 1, ["x1"], "exp(-1/(x1^2))", "HypothesisFailed(constant)",
           "c = 1e6 covers every resolvable sample, but the per-radius sup grows like 2/r^2",
           radius=0.5, c=1e6, origin=0.0),
    _entry("power-2c-1d", 1, ["x1"], "x1^2", "HypothesisFailed(flatness)",
           "x f' = 2 f holds with c = 2, but x^2 is not flat"),
    _entry("power-sum-1d", 1, ["x1"], "x1^2 + x1^4", "HypothesisFailed(flatness)",
           "x f'/f = (2 + 4x^2)/(1 + x^2) is bounded; f is not flat"),
    _entry("rotation-2d", 2, ["x2", "-x1"], "x1^2 + x2^2", "HypothesisFailed(spectrum)",
           "eigenvalues +i, -i: not hyperbolic"),
    _entry("linear-sink-2d", 2, ["-x1", "-x2"], "x1^2 + x2^2", "HypothesisFailed(spectrum)",
           "the origin is a sink, not a source"),
    _entry("shear-source-2d", 2, ["x1 + 4*x2", "x2"], "x1^2 + x2^2",
           "HypothesisFailed(inner_product)",
           "eigenvalues 1, 1 but <h(x),x> = x1^2 + 4 x1 x2 + x2^2 is negative along x1 = -x2"),
]

CATALOG = {e.name: e for e in sorted(_ENTRIES, key=lambda e: e.name)}


def get(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise InputError(f"unknown catalog entry {name!r}") from None


def names() -> list:
    return sorted(CATALOG)
