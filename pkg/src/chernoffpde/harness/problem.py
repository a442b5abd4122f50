"""TOML problem files.

See ``docs/problem_format.md`` for the field-by-field schema.  Unknown keys
are errors.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .. import expr as _expr
from ..chernoff import DEFAULT_BUDGET, TestFunction
from ..fields import CoefficientSet, ScalarField, make_preset
from ..grid import EXTENSIONS, GridSpec
from ..reference import GaussianProfile

__all__ = ["ProblemError", "ProblemSpec", "OracleSettings", "load_problem", "parse_problem"]


class ProblemError(ValueError):
    """Invalid or unreadable problem definition."""


@dataclass(frozen=True)
class OracleSettings:
    closed_form: bool = False
    exact_tree: bool = False
    monte_carlo: bool = False
    paths: int = 100_000
    steps: int = 200
    seed: int = 0
    points: Tuple[Tuple[float, ...], ...] = ()

    @property
    def selected(self) -> Optional[str]:
        for name in ("closed_form", "exact_tree", "monte_carlo"):
            if getattr(self, name):
                return name
        return None


@dataclass(frozen=True)
class TangencySettings:
    test_function: str = "gaussian_bump"
    params: dict = field(default_factory=dict)
    t: Tuple[float, ...] = (1e-4, 1e-3, 1e-2)

    def build(self, d: int) -> TestFunction:
        return TestFunction.preset(self.test_function, d, **self.params)


@dataclass(frozen=True)
class ProblemSpec:
    d: int
    coeffs: CoefficientSet
    u0: Callable
    u0_bound: Optional[float]
    grid: GridSpec
    t: float
    n_list: Tuple[int, ...]
    extension: str = "clamp"
    mode: str = "grid"
    budget: int = DEFAULT_BUDGET
    inner_fraction: float = 0.5
    oracles: OracleSettings = OracleSettings()
    tangency: TangencySettings = TangencySettings()
    out_dir: str = "out"
    u0_profile: Optional[GaussianProfile] = None
    source: str = ""

    def with_grid(self, grid: GridSpec) -> "ProblemSpec":
        return replace(self, grid=grid)

    def with_seed(self, seed: int) -> "ProblemSpec":
        return replace(self, oracles=replace(self.oracles, seed=int(seed)))

    def with_n(self, n_list) -> "ProblemSpec":
        return replace(self, n_list=tuple(int(n) for n in n_list))


_TOP = {"dimension", "coefficients", "initial", "grid", "run", "oracles", "tangency", "output"}
_SECTIONS = {
    "coefficients": {"preset", "params", "a", "b", "c", "bounds"},
    "initial": {"gaussian", "expr", "bound"},
    "grid": {"lo", "hi", "nodes", "extension"},
    "run": {"t", "n", "mode", "budget", "inner_fraction"},
    "oracles": {"closed_form", "exact_tree", "monte_carlo", "paths", "steps", "seed", "points"},
    "tangency": {"test_function", "params", "t"},
    "output": {"dir"},
}


def _check_keys(table, allowed, where):
    if not isinstance(table, dict):
        raise ProblemError(f"{where} must be a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ProblemError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _per_axis(value, d, name, cast=float):
    vals = value if isinstance(value, list) else [value] * d
    if len(vals) != d:
        raise ProblemError(f"{name} needs {d} entries")
    return tuple(cast(v) for v in vals)


def _field_list(value, d, name, bounds):
    exprs = value if isinstance(value, list) else [value] * d
    if len(exprs) != d:
        raise ProblemError(f"coefficients.{name} needs {d} expressions")
    return tuple(
        ScalarField.parse(str(e), d, bounds.get(f"{name}{j + 1}", bounds.get(name)))
        for j, e in enumerate(exprs)
    )


def _coefficients(sec, d):
    _check_keys(sec, _SECTIONS["coefficients"], "[coefficients]")
    bounds = {k: float(v) for k, v in sec.get("bounds", {}).items()}
    if "preset" in sec:
        coeffs = make_preset(sec["preset"], sec.get("params", {}), d)
    else:
        if "params" in sec:
            raise ProblemError("coefficients.params requires a preset")
        missing = [k for k in ("a", "b", "c") if k not in sec]
        if missing:
            raise ProblemError(f"coefficients need a preset or expressions for {missing}")
        coeffs = None
    fields = {}
    if "a" in sec:
        fields["a"] = _field_list(sec["a"], d, "a", bounds)
    if "b" in sec:
        fields["b"] = _field_list(sec["b"], d, "b", bounds)
    if "c" in sec:
        fields["c"] = ScalarField.parse(str(sec["c"]), d, bounds.get("c"))
    if coeffs is None:
        return CoefficientSet(d, **fields)
    return coeffs.replace(**fields)


def _initial(sec, d):
    _check_keys(sec, _SECTIONS["initial"], "[initial]")
    if ("gaussian" in sec) == ("expr" in sec):
        raise ProblemError("[initial] needs exactly one of gaussian or expr")
    if "gaussian" in sec:
        g = sec["gaussian"]
        _check_keys(g, {"center", "sigma", "amplitude"}, "initial.gaussian")
        profile = GaussianProfile(_per_axis(g.get("center", 0.0), d, "initial.gaussian.center"),
                                  float(g.get("sigma", 1.0)), float(g.get("amplitude", 1.0)))
        return profile, abs(profile.amplitude), profile
    f = ScalarField.parse(str(sec["expr"]), d, sec.get("bound"))
    return f, f.declared_bound, None


def parse_problem(data: dict, source: str = "") -> ProblemSpec:
    try:
        return _parse(data, source)
    except ProblemError:
        raise
    except (_expr.ExprError, KeyError, ValueError, TypeError) as exc:
        raise ProblemError(str(exc)) from exc


def _parse(data, source):
    _check_keys(data, _TOP, "problem file")
    for name in ("dimension", "coefficients", "initial", "grid", "run"):
        if name not in data:
            raise ProblemError(f"missing required {'key' if name == 'dimension' else 'section'} {name!r}")
    d = int(data["dimension"])
    if d < 1:
        raise ProblemError("dimension must be positive")
    coeffs = _coefficients(data["coefficients"], d)
    u0, u0_bound, profile = _initial(data["initial"], d)

    g = data["grid"]
    _check_keys(g, _SECTIONS["grid"], "[grid]")
    extension = g.get("extension", "clamp")
    if extension not in EXTENSIONS:
        raise ProblemError(f"grid.extension must be one of {EXTENSIONS}")
    grid = GridSpec(_per_axis(g["lo"], d, "grid.lo"), _per_axis(g["hi"], d, "grid.hi"),
                    _per_axis(g["nodes"], d, "grid.nodes", int))

    r = data["run"]
    _check_keys(r, _SECTIONS["run"], "[run]")
    n_list = tuple(int(n) for n in (r["n"] if isinstance(r["n"], list) else [r["n"]]))
    if not n_list or any(n < 1 for n in n_list) or list(n_list) != sorted(set(n_list)):
        raise ProblemError("run.n must be a nonempty strictly ascending list of positive integers")
    t = float(r["t"])
    if not t >= 0:
        raise ProblemError("run.t must be nonnegative")
    mode = r.get("mode", "grid")
    if mode not in ("grid", "exact"):
        raise ProblemError("run.mode must be 'grid' or 'exact'")

    o = data.get("oracles", {})
    _check_keys(o, _SECTIONS["oracles"], "[oracles]")
    oracles = OracleSettings(
        closed_form=bool(o.get("closed_form", False)),
        exact_tree=bool(o.get("exact_tree", False)),
        monte_carlo=bool(o.get("monte_carlo", False)),
        paths=int(o.get("paths", 100_000)),
        steps=int(o.get("steps", 200)),
        seed=int(o.get("seed", 0)),
        points=tuple(_per_axis(p, d, "oracles.points") for p in o.get("points", [[0.0] * d])),
    )

    ts = data.get("tangency", {})
    _check_keys(ts, _SECTIONS["tangency"], "[tangency]")
    tangency = TangencySettings(ts.get("test_function", "gaussian_bump"), dict(ts.get("params", {})),
                                tuple(float(v) for v in ts.get("t", (1e-4, 1e-3, 1e-2))))
    tangency.build(d)  # fail early on a bad test function

    out = data.get("output", {})
    _check_keys(out, _SECTIONS["output"], "[output]")
    return ProblemSpec(
        d=d, coeffs=coeffs, u0=u0, u0_bound=u0_bound, grid=grid, t=t, n_list=n_list,
        extension=extension, mode=mode, budget=int(r.get("budget", DEFAULT_BUDGET)),
        inner_fraction=float(r.get("inner_fraction", 0.5)), oracles=oracles, tangency=tangency,
        out_dir=str(out.get("dir", "out")), u0_profile=profile, source=source,
    )


def load_problem(path) -> ProblemSpec:
    path = Path(path)
    if not path.is_file():
        raise ProblemError(f"problem file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ProblemError(f"{path}: {exc}") from exc
    return parse_problem(data, str(path))
