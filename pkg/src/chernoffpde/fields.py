"""Coefficient data of the parabolic problem and its advisory validators.

The problem is

    u_t = sum_j a_j(x)^2 u_{x_j x_j} + <b(x), grad u> + c(x) u,   u(0, .) = u0

with every coefficient bounded and uniformly continuous.  Uniform
continuity is assumed, not checked: no finite sample can certify it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import expr as _expr
from .grid import GridSpec

logger = logging.getLogger(__name__)

__all__ = [
    "PRESETS",
    "ScalarField",
    "CoefficientSet",
    "ValidationReport",
    "make_preset",
    "validate_coefficients",
    "estimate_bound",
]


@dataclass(frozen=True)
class ScalarField:
    """Point-evaluable real function on R^d with an optional declared sup bound."""

    expr: _expr.Expr
    declared_bound: Optional[float] = None

    def __post_init__(self):
        if self.declared_bound is not None and not self.declared_bound >= 0:
            raise ValueError("declared_bound must be nonnegative")

    @classmethod
    def parse(cls, text: str, d: int, declared_bound: Optional[float] = None) -> "ScalarField":
        return cls(_expr.parse(text, d), declared_bound)

    @classmethod
    def const(cls, value: float, d: int) -> "ScalarField":
        value = float(value)
        return cls(_expr.Expr(_expr.Num(value) if value >= 0 else _expr.Neg(_expr.Num(-value)), d, repr(value)), abs(value))

    @property
    def d(self) -> int:
        return self.expr.d

    @property
    def constant(self) -> Optional[float]:
        """The value if the field is a literal constant, else ``None``."""
        root = self.expr.root
        if isinstance(root, _expr.Num):
            return root.value
        if isinstance(root, _expr.Neg) and isinstance(root.operand, _expr.Num):
            return -root.operand.value
        return None

    def __call__(self, points) -> np.ndarray:
        return self.expr(points)

    def __str__(self) -> str:
        return str(self.expr)


@dataclass(frozen=True)
class CoefficientSet:
    d: int
    a: Tuple[ScalarField, ...]
    b: Tuple[ScalarField, ...]
    c: ScalarField

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(self.a))
        object.__setattr__(self, "b", tuple(self.b))
        if len(self.a) != self.d or len(self.b) != self.d:
            raise ValueError(f"need {self.d} diffusion and drift components")
        for f in (*self.a, *self.b, self.c):
            if f.d != self.d:
                raise ValueError("all fields must share the problem dimension")

    @classmethod
    def from_strings(cls, a: Sequence[str], b: Sequence[str], c: str, bounds: Optional[Mapping] = None) -> "CoefficientSet":
        d = len(a)
        bounds = dict(bounds or {})
        return cls(
            d,
            tuple(ScalarField.parse(s, d, bounds.get(f"a{j + 1}")) for j, s in enumerate(a)),
            tuple(ScalarField.parse(s, d, bounds.get(f"b{j + 1}")) for j, s in enumerate(b)),
            ScalarField.parse(c, d, bounds.get("c")),
        )

    def replace(self, **fields) -> "CoefficientSet":
        kw = {"d": self.d, "a": self.a, "b": self.b, "c": self.c}
        kw.update(fields)
        return CoefficientSet(**kw)

    def diffusion(self, points) -> np.ndarray:
        """``a_j`` at each point, shape ``(m, d)``."""
        return np.stack([f(points) for f in self.a], axis=1)

    def drift(self, points) -> np.ndarray:
        return np.stack([f(points) for f in self.b], axis=1)

    def reaction(self, points) -> np.ndarray:
        return self.c(points)

    def c_norm(self, sample: Optional[GridSpec] = None) -> float:
        """Sup norm of ``c``: declared bound if present, else estimated on ``sample``."""
        if self.c.declared_bound is not None:
            return self.c.declared_bound
        if sample is None:
            raise ValueError("c has no declared bound; a sample grid is required")
        return estimate_bound(self.c, sample)

    def is_constant(self) -> bool:
        return all(f.constant is not None for f in (*self.a, *self.b, self.c))

    def describe(self) -> Dict[str, str]:
        out = {f"a{j + 1}": str(f) for j, f in enumerate(self.a)}
        out.update({f"b{j + 1}": str(f) for j, f in enumerate(self.b)})
        out["c"] = str(self.c)
        return out


def _r(v: float) -> str:
    return f"({float(v)!r})"


def _constant(p, d):
    return CoefficientSet(
        d,
        tuple(ScalarField.const(p["a"], d) for _ in range(d)),
        tuple(ScalarField.const(p["b"], d) for _ in range(d)),
        ScalarField.const(p["c"], d),
    )


def _variable_diffusion(p, d):
    amp, base = float(p["amp"]), float(p["base"])
    a = tuple(
        ScalarField.parse(f"{_r(base)} + {_r(amp)}*tanh(x{j + 1})", d, abs(base) + abs(amp)) for j in range(d)
    )
    return CoefficientSet(d, a, tuple(ScalarField.const(p.get("b", 0.0), d) for _ in range(d)),
                          ScalarField.const(p.get("c", 0.0), d))


def _drift_well(p, d):
    a, strength = float(p["a"]), float(p["strength"])
    b = tuple(ScalarField.parse(f"-{_r(strength)}*tanh(x{j + 1})", d, abs(strength)) for j in range(d))
    return CoefficientSet(d, tuple(ScalarField.const(a, d) for _ in range(d)), b,
                          ScalarField.const(p.get("c", 0.0), d))


def _reaction_only(p, d):
    zero = ScalarField.const(0.0, d)
    return CoefficientSet(d, (zero,) * d, (zero,) * d, ScalarField.const(p["c"], d))


def _degenerate_diffusion(p, d):
    amp = float(p["amp"])
    a = tuple(ScalarField.parse(f"{_r(amp)}*tanh(x{j + 1})", d, abs(amp)) for j in range(d))
    return CoefficientSet(d, a, tuple(ScalarField.const(p.get("b", 0.0), d) for _ in range(d)),
                          ScalarField.const(p.get("c", 0.0), d))


# name -> (builder, required params, optional params)
PRESETS = {
    "constant": (_constant, ("a", "b", "c"), ()),
    "variable_diffusion": (_variable_diffusion, ("amp", "base"), ("b", "c")),
    "drift_well": (_drift_well, ("a", "strength"), ("c",)),
    "reaction_only": (_reaction_only, ("c",), ()),
    "degenerate_diffusion": (_degenerate_diffusion, ("amp",), ("b", "c")),
}


def make_preset(name: str, params: Mapping[str, float], d: int) -> CoefficientSet:
    """Build one of the named coefficient families.

    ``constant``: a_j = a, b_j = b, c = c.
    ``variable_diffusion``: a_j = base + amp*tanh(x_j); optional constant b, c.
    ``drift_well``: a_j = a, b_j = -strength*tanh(x_j); optional constant c.
    ``reaction_only``: a = b = 0, constant c.
    ``degenerate_diffusion``: a_j = amp*tanh(x_j), which vanishes on x_j = 0.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if d < 1:
        raise ValueError("dimension must be positive")
    builder, required, optional = PRESETS[name]
    missing = [k for k in required if k not in params]
    if missing:
        raise KeyError(f"preset {name!r} is missing parameter(s) {missing}")
    unknown = sorted(set(params) - set(required) - set(optional))
    if unknown:
        raise KeyError(f"preset {name!r} does not take parameter(s) {unknown}")
    return builder({k: float(v) for k, v in params.items()}, d)


def estimate_bound(f: ScalarField, sample: GridSpec) -> float:
    """Max of ``|f|`` over the sample nodes."""
    return float(np.max(np.abs(f(sample.points()))))


@dataclass
class ValidationReport:
    ellipticity_kappa: float
    c_nonpositive: bool
    bound_estimates: Dict[str, float]
    sample_spec: GridSpec
    warnings: List[str] = field(default_factory=list)

    @property
    def elliptic(self) -> bool:
        return self.ellipticity_kappa > 0


def validate_coefficients(coeffs: CoefficientSet, sample: GridSpec) -> ValidationReport:
    """Sampled check of the contraction-semigroup sufficient conditions.

    Advisory only: a finite sample cannot prove a uniform lower bound on
    ``a_j^2`` nor the sign of ``c`` everywhere.  Degenerate diffusion is
    reported, not rejected; the solver itself does not need ellipticity.
    """
    pts = sample.points()
    a = coeffs.diffusion(pts)
    c = coeffs.reaction(pts)
    kappa = float(np.min(a**2))
    c_nonpositive = bool(np.max(c) <= 0)

    warnings = []
    bounds = {}
    names = coeffs.describe()
    boundary = _boundary_mask(sample)
    for name, f in zip(names, (*coeffs.a, *coeffs.b, coeffs.c)):
        vals = np.abs(f(pts))
        bounds[name] = float(np.max(vals))
        if f.declared_bound is not None and bounds[name] > f.declared_bound:
            warnings.append(f"{name}: sampled sup {bounds[name]!r} exceeds declared bound {f.declared_bound!r}")
        if f.declared_bound is None and np.any(~boundary) and np.max(vals[boundary]) > np.max(vals[~boundary]) * (1 + 1e-9) + 1e-300:
            warnings.append(f"{name}: largest on the sample boundary; may be unbounded on R^d")
    if kappa <= 0:
        warnings.append("ellipticity fails on the sample (kappa = 0); solving is still permitted")
    if not c_nonpositive:
        warnings.append("c > 0 somewhere on the sample; contraction bound does not apply")
    for w in warnings:
        logger.info(w)
    return ValidationReport(kappa, c_nonpositive, bounds, sample, warnings)


def _boundary_mask(spec: GridSpec) -> np.ndarray:
    idx = spec.indices()
    return np.any((idx == 0) | (idx == np.array(spec.nodes) - 1), axis=1)
