"""The one-step kernel as a finite point-mass measure, composed exactly.

One step at ``x`` puts weight ``1/(4d)`` on ``x +- 2 sqrt(d) a_j(x) sqrt(tau) e_j``,
``1/2`` on ``x + 2 tau b(x)`` and ``tau c(x)`` on ``x`` itself; pairing it
with ``f`` gives ``(S(tau) f)(x)``.  Composition proceeds one step at a
time from the starting point outward, each atom ``(w, p)`` replaced by ``w``
times the step measure at ``p``, so pairing the ``n``-step measure with
``u0`` gives ``((S(t/n))^n u0)(x)`` with no grid and no interpolation.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .chernoff import DEFAULT_BUDGET, BudgetExceededError
from .fields import CoefficientSet

__all__ = ["PointMassMeasure", "step_measure", "propagate", "pair", "evaluate_exact"]


@dataclass(frozen=True)
class PointMassMeasure:
    """Weighted atoms, merged on bitwise-equal points and sorted lexicographically."""

    weights: np.ndarray
    points: np.ndarray
    atom_counts: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        p = np.asarray(self.points, dtype=float)
        p = p.reshape(w.size, -1)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(p))):
            raise ValueError("atom weights and points must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "points", p)

    @classmethod
    def unit(cls, x) -> "PointMassMeasure":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return cls(np.ones(1), x)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.weights.size

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights.tolist())

    def atoms(self):
        return list(zip(self.weights.tolist(), map(tuple, self.points.tolist())))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(["weight"] + [f"x{j + 1}" for j in range(self.d)]) + "\n")
        for w, p in zip(self.weights, self.points):
            buf.write(",".join([repr(float(w)), *map(repr, p.tolist())]) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _merge(weights, points, prune_eps=0.0):
    # bitwise point identity: group on the raw 64-bit patterns
    keys = np.ascontiguousarray(points).view(np.uint64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    merged = np.bincount(inverse, weights=weights, minlength=first.size)
    pts = points[first]
    keep = (merged != 0) & (np.abs(merged) >= prune_eps)
    merged, pts = merged[keep], pts[keep]
    order = np.lexsort(pts.T[::-1])
    return merged[order], pts[order]


def _children(weights, points, tau, coeffs):
    m, d = points.shape
    root = math.sqrt(tau)
    disp = 2.0 * math.sqrt(d) * coeffs.diffusion(points) * root
    w_diff = weights / (4 * d)
    ws, ps = [], []
    for j in range(d):
        plus, minus = points.copy(), points.copy()
        plus[:, j] += disp[:, j]
        minus[:, j] -= disp[:, j]
        ws += [w_diff, w_diff]
        ps += [plus, minus]
    ws.append(0.5 * weights)
    ps.append(points + 2.0 * tau * coeffs.drift(points))
    ws.append(weights * (tau * coeffs.reaction(points)))
    ps.append(points)
    return np.concatenate(ws), np.concatenate(ps)


def step_measure(x, tau: float, coeffs: CoefficientSet) -> PointMassMeasure:
    """Measure whose pairing with ``f`` is ``(S(tau) f)(x)``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    start = PointMassMeasure.unit(x)
    w, p = _children(start.weights, start.points, tau, coeffs)
    w, p = _merge(w, p)
    return PointMassMeasure(w, p, (len(w),))


def propagate(x, t: float, n: int, coeffs: CoefficientSet, prune_eps: float = 0.0,
              budget: int = DEFAULT_BUDGET) -> PointMassMeasure:
    """``n``-fold composition of step measures of size ``t/n`` started at ``x``.

    Atoms whose merged weight is below ``prune_eps`` in magnitude are
    dropped after each step; ``prune_eps = 0`` keeps the composition exact.
    Raises :class:`BudgetExceededError` before an expansion would produce
    more than ``budget`` atoms.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    tau = t / n
    m = PointMassMeasure.unit(x)
    w, p = m.weights, m.points
    branching = 2 * m.d + 2
    counts = []
    for step in range(1, n + 1):
        if w.size * branching > budget:
            raise BudgetExceededError(
                f"step {step}: {w.size} atoms x {branching} branches exceeds budget {budget} "
                f"(atom counts so far: {counts})"
            )
        w, p = _children(w, p, tau, coeffs)
        w, p = _merge(w, p, prune_eps)
        counts.append(w.size)
    return PointMassMeasure(w, p, tuple(counts))


def pair(m: PointMassMeasure, f: Callable) -> float:
    """``sum_i w_i f(p_i)``, summed exactly over the sorted atoms."""
    if len(m) == 0:
        return 0.0
    vals = np.asarray(f(m.points), dtype=float).reshape(-1)
    return math.fsum((m.weights * vals).tolist())


def evaluate_exact(x, t: float, n: int, coeffs: CoefficientSet, u0: Callable,
                   budget: int = DEFAULT_BUDGET) -> float:
    """``((S(t/n))^n u0)(x)`` by exact measure composition."""
    return pair(propagate(x, t, n, coeffs, 0.0, budget), u0)
