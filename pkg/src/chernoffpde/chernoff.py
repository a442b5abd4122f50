"""Translation-operator Chernoff function and its iterates.

For a step ``t >= 0`` the operator is

    (S(t) f)(x) = 1/(4d) * sum_j [ f(x + 2 sqrt(d) a_j(x) sqrt(t) e_j)
                                  + f(x - 2 sqrt(d) a_j(x) sqrt(t) e_j) ]
                  + 1/2 f(x + 2 t b(x)) + t c(x) f(x)

and ``(S(t/n))^n u0`` approximates the solution ``u(t, .)`` of
``u_t = H u`` with

    H phi = sum_j a_j^2 phi_{x_j x_j} + <b, grad phi> + c phi.

Everything is evaluated in increment form, ``f(x) + sum_k w_k (f(p_k) - f(x))
+ t c(x) f(x)``, which is algebraically the formula above (the translation
weights sum to one) and keeps constants and ``t = 0`` exact in floating
point.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._parallel import chunked_map
from .fields import CoefficientSet, ScalarField
from .grid import GridFunction, GridSpec, _locate, sample

__all__ = [
    "ChernoffConfig",
    "NonFiniteError",
    "BudgetExceededError",
    "TestFunction",
    "apply_S",
    "apply_S_points",
    "apply_S_grid",
    "iterate",
    "solve",
    "apply_H",
    "tangency_residual",
    "displacement_bound",
]

DEFAULT_BUDGET = 10**7


class NonFiniteError(ArithmeticError):
    def __init__(self, step: int):
        super().__init__(f"non-finite value produced at step {step}")
        self.step = step


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChernoffConfig:
    t: float
    n: int
    gridspec: GridSpec
    mode: str = "grid"
    budget: int = DEFAULT_BUDGET
    extension: str = "clamp"

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t >= 0):
            raise ValueError("t must be finite and nonnegative")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.mode not in ("grid", "exact"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def exact_work(self) -> int:
        return (2 * self.gridspec.d + 2) ** self.n


def _translation_points(tau, coeffs, X):
    """Displaced points for every row of ``X``: list of ``(weight, points)``."""
    m, d = X.shape
    root = math.sqrt(tau)
    disp = 2.0 * math.sqrt(d) * coeffs.diffusion(X) * root
    terms = []
    for j in range(d):
        plus, minus = X.copy(), X.copy()
        plus[:, j] += disp[:, j]
        minus[:, j] -= disp[:, j]
        terms.append((plus, minus))
    drift = X + 2.0 * tau * coeffs.drift(X)
    return terms, drift


def _combine(fx, diffusion_vals, drift_val, tau, c, d):
    """Increment ``S f - f`` from function values at the displaced points."""
    acc = np.zeros_like(fx)
    for fp, fm in diffusion_vals:
        acc = acc + ((fp - fx) + (fm - fx))
    return acc / (4 * d) + 0.5 * (drift_val - fx) + tau * c * fx


def _increment_points(t, f, coeffs, X):
    X = np.asarray(X, dtype=float).reshape(-1, coeffs.d)
    m, d = X.shape
    terms, drift = _translation_points(t, coeffs, X)
    allpts = np.concatenate([X, *[p for pair in terms for p in pair], drift])
    vals = np.asarray(f(allpts), dtype=float).reshape(-1)
    fx = vals[:m]
    pairs = [(vals[(1 + 2 * j) * m:(2 + 2 * j) * m], vals[(2 + 2 * j) * m:(3 + 2 * j) * m]) for j in range(d)]
    fb = vals[(1 + 2 * d) * m:]
    return fx, _combine(fx, pairs, fb, t, coeffs.reaction(X), d)


def apply_S_points(t: float, f: Callable, coeffs: CoefficientSet, X) -> np.ndarray:
    """``(S(t) f)`` at each row of ``X`` using exact point evaluation of ``f``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    X = np.asarray(X, dtype=float).reshape(-1, coeffs.d)
    if t == 0:
        return np.asarray(f(X), dtype=float).reshape(-1)
    fx, inc = _increment_points(t, f, coeffs, X)
    return fx + inc


def apply_S(t: float, f: Callable, coeffs: CoefficientSet, x) -> float:
    """``(S(t) f)(x)`` for a single point ``x``."""
    return float(apply_S_points(t, f, coeffs, np.asarray(x, dtype=float).reshape(1, -1))[0])


class _Stencil:
    """Precomputed interpolation data of ``S(tau)`` on a fixed grid.

    Coefficients do not depend on time, so every composed step reuses the
    same corner indices and fractions.
    """

    def __init__(self, tau, coeffs, spec, extension):
        self.tau, self.d, self.spec = tau, spec.d, spec
        X = spec.points()
        terms, drift = _translation_points(tau, coeffs, X)
        self.c = coeffs.reaction(X)
        self.diffusion = [(self._prepare(p, extension), self._prepare(m, extension)) for p, m in terms]
        self.drift = self._prepare(drift, extension)
        self.max_displacement = max(
            [float(np.max(np.abs(p - X))) for pair in terms for p in pair] + [float(np.max(np.abs(drift - X)))]
        )

    def _prepare(self, P, extension):
        spec = self.spec
        i0, frac, outside = _locate(spec, P, extension)
        upper = np.minimum(i0 + 1, np.array(spec.nodes) - 1)
        corners = []
        for bits in np.ndindex(*(2,) * self.d):
            idx = tuple(np.where(bits[ax], upper[:, ax], i0[:, ax]) for ax in range(self.d))
            corners.append(np.ravel_multi_index(idx, spec.shape))
        return np.stack(corners), frac, outside if np.any(outside) else None

    def _interp(self, flat, term, lo, hi):
        corners, frac, outside = term
        vals = flat[corners[:, lo:hi]].reshape((2,) * self.d + (hi - lo,))
        for ax in reversed(range(self.d)):
            a, b = vals[..., 0, :], vals[..., 1, :]
            vals = a + frac[lo:hi, ax] * (b - a)
        if outside is not None:
            vals = np.where(outside[lo:hi], 0.0, vals)
        return vals

    def apply(self, flat, threads=None):
        def chunk(lo, hi):
            fx = flat[lo:hi]
            pairs = [(self._interp(flat, p, lo, hi), self._interp(flat, m, lo, hi)) for p, m in self.diffusion]
            fb = self._interp(flat, self.drift, lo, hi)
            return fx + _combine(fx, pairs, fb, self.tau, self.c[lo:hi], self.d)

        return chunked_map(chunk, flat.size, threads)


def apply_S_grid(t: float, gf: GridFunction, coeffs: CoefficientSet, threads=None) -> GridFunction:
    """One application of ``S(t)`` at every node; off-node reads interpolate ``gf``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if coeffs.d != gf.spec.d:
        raise ValueError("dimension mismatch between coefficients and grid")
    if t == 0:
        return gf.with_values(gf.values.copy())
    stencil = _Stencil(t, coeffs, gf.spec, gf.extension)
    return gf.with_values(stencil.apply(gf.flat(), threads))


def _field_bound(f: ScalarField, spec: GridSpec) -> float:
    if f.declared_bound is not None:
        return f.declared_bound
    return float(np.max(np.abs(f(spec.points()))))


def displacement_bound(tau: float, coeffs: CoefficientSet, spec: GridSpec) -> float:
    """Per-step bound ``2 sqrt(d) max_j |a_j| sqrt(tau) + 2 tau |b|``."""
    a = max(_field_bound(f, spec) for f in coeffs.a)
    b = math.sqrt(sum(_field_bound(f, spec) ** 2 for f in coeffs.b))
    return 2 * math.sqrt(coeffs.d) * a * math.sqrt(tau) + 2 * tau * b


def iterate(cfg: ChernoffConfig, u0: Callable, coeffs: CoefficientSet, threads=None) -> GridFunction:
    """``(S(t/n))^n u0`` on the grid of ``cfg``.

    The result's metadata records the per-step displacement bound, the
    cumulative wandering radius, the step count and the wall time.
    """
    if cfg.mode != "grid":
        raise ValueError("iterate requires grid mode; use solve() for exact mode")
    start = time.perf_counter()
    gf = sample(u0, cfg.gridspec, cfg.extension, threads)
    tau = cfg.t / cfg.n
    flat = gf.flat()
    if tau > 0:
        stencil = _Stencil(tau, coeffs, cfg.gridspec, cfg.extension)
        for step in range(1, cfg.n + 1):
            flat = stencil.apply(flat, threads)
            if not np.all(np.isfinite(flat)):
                raise NonFiniteError(step)
    step_bound = displacement_bound(tau, coeffs, cfg.gridspec)
    return gf.with_values(
        flat,
        t=cfg.t,
        n=cfg.n,
        step_displacement_bound=step_bound,
        wandering_radius=cfg.n * step_bound,
        wall_time_s=round(time.perf_counter() - start, 6),
    )


def solve(cfg: ChernoffConfig, u0: Callable, coeffs: CoefficientSet, threads=None) -> GridFunction:
    """Grid iterate, or the exact composition evaluated at every node."""
    if cfg.mode == "grid":
        return iterate(cfg, u0, coeffs, threads)
    from .measure import evaluate_exact

    if cfg.exact_work > cfg.budget:
        raise BudgetExceededError(f"(2d+2)^n = {cfg.exact_work} exceeds budget {cfg.budget}")
    pts = cfg.gridspec.points()
    values = [evaluate_exact(x, cfg.t, cfg.n, coeffs, u0, budget=cfg.budget) for x in pts]
    return GridFunction(cfg.gridspec, np.array(values), cfg.extension, {"t": cfg.t, "n": cfg.n, "mode": "exact"})


@dataclass(frozen=True)
class TestFunction:
    """Smooth bounded test function with value, gradient and diagonal Hessian.

    All callables take an ``(m, d)`` array; derivatives return ``(m, d)``.
    """

    name: str
    d: int
    value: Callable
    grad: Callable
    hess_diag: Callable
    params: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __call__(self, X):
        return self.value(np.asarray(X, dtype=float).reshape(-1, self.d))

    @classmethod
    def gaussian_bump(cls, d: int, center=None, width: float = 1.0) -> "TestFunction":
        c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        w2 = float(width) ** 2

        def value(X):
            return np.exp(-np.sum((X - c) ** 2, axis=1) / (2 * w2))

        def grad(X):
            return -(X - c) / w2 * value(X)[:, None]

        def hess(X):
            return ((X - c) ** 2 / w2**2 - 1 / w2) * value(X)[:, None]

        return cls("gaussian_bump", d, value, grad, hess, {"center": c.tolist(), "width": width})

    @classmethod
    def cosine(cls, d: int, wavevector=None, phase: float = 0.0) -> "TestFunction":
        k = np.ones(d) if wavevector is None else np.asarray(wavevector, dtype=float)

        def value(X):
            return np.cos(X @ k + phase)

        def grad(X):
            return -np.sin(X @ k + phase)[:, None] * k

        def hess(X):
            return -np.cos(X @ k + phase)[:, None] * k**2

        return cls("cosine", d, value, grad, hess, {"wavevector": k.tolist(), "phase": phase})

    @classmethod
    def polynomial(cls, d: int, coefficients: Sequence[float]) -> "TestFunction":
        """Separable ``sum_j p(x_j)`` with ``p(s) = sum_i coefficients[i] s^i``, degree <= 4."""
        coef = np.asarray(coefficients, dtype=float)
        if coef.size > 5:
            raise ValueError("polynomial degree must be at most 4")
        p = np.polynomial.Polynomial(coef)
        dp, ddp = p.deriv(1), p.deriv(2)
        return cls(
            "polynomial",
            d,
            lambda X: np.sum(p(X), axis=1),
            lambda X: dp(X),
            lambda X: ddp(X),
            {"coefficients": coef.tolist()},
        )

    @classmethod
    def from_callable(cls, f: Callable, d: int, name: str = "expression") -> "TestFunction":
        """Derivatives by central differences, step ``max(|x_j|, 1) * eps^(1/3)``
        for the gradient and ``eps^(1/4)`` for the second derivative."""
        eps = np.finfo(float).eps

        def shifted(X, j, h):
            E = np.zeros_like(X)
            E[:, j] = h
            return f(X + E), f(X - E)

        def grad(X):
            out = np.empty_like(X)
            for j in range(d):
                h = np.maximum(np.abs(X[:, j]), 1.0) * eps ** (1 / 3)
                fp, fm = shifted(X, j, h)
                out[:, j] = (fp - fm) / (2 * h)
            return out

        def hess(X):
            out = np.empty_like(X)
            f0 = f(X)
            for j in range(d):
                h = np.maximum(np.abs(X[:, j]), 1.0) * eps ** (1 / 4)
                fp, fm = shifted(X, j, h)
                out[:, j] = (fp - 2 * f0 + fm) / h**2
            return out

        return cls(name, d, lambda X: np.asarray(f(X), dtype=float), grad, hess)

    @classmethod
    def preset(cls, name: str, d: int, **params) -> "TestFunction":
        builders = {"gaussian_bump": cls.gaussian_bump, "cosine": cls.cosine, "polynomial": cls.polynomial}
        if name not in builders:
            raise KeyError(f"unknown test function {name!r}")
        return builders[name](d, **params)


def apply_H(phi: TestFunction, coeffs: CoefficientSet, x):
    """``H phi`` at a point (returns float) or at each row of an ``(m, d)`` array."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = X.reshape(-1, coeffs.d)
    A = coeffs.diffusion(X)
    out = (
        np.sum(A**2 * phi.hess_diag(X), axis=1)
        + np.sum(coeffs.drift(X) * phi.grad(X), axis=1)
        + coeffs.reaction(X) * phi.value(X)
    )
    return float(out[0]) if single else out


def tangency_residual(phi: TestFunction, coeffs: CoefficientSet, gridspec: GridSpec, t: float) -> float:
    """``max_nodes |S(t) phi - phi - t H phi| / t`` with exact evaluation of ``phi``.

    The max over finitely many nodes is a lower bound of the sup norm.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    X = gridspec.points()
    _, inc = _increment_points(t, phi.value, coeffs, X)
    return float(np.max(np.abs(inc - t * apply_H(phi, coeffs, X))) / t)
