"""Independent reference solutions.

Constant coefficients have the closed form

    u(t, x) = e^{c t} (G_t * u0)(x + b t),

with ``G_t`` the product of 1D Gaussians of variance ``2 a_j^2 t``: a
translate ``v(t, x) = w(t, x + b t)`` of a heat solution ``w_t = sum_j
a_j^2 w_jj`` satisfies ``v_t = w_t + <b, grad w>``, and the factor ``e^{ct}``
adds the reaction term.

Variable coefficients are checked by Feynman-Kac Monte Carlo: the diffusion
``dX_j = b_j(X) ds + sqrt(2) a_j(X) dW_j`` has generator ``sum_j a_j^2 d_jj +
<b, grad>`` (the ``sqrt(2)`` makes ``(sqrt(2) a_j)^2 / 2 = a_j^2``), and
``u(t, x) = E[exp(int_0^t c(X_s) ds) u0(X_t)]`` with ``X_0 = x``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from ._parallel import resolve_threads
from .fields import CoefficientSet

__all__ = [
    "GaussianProfile",
    "McEstimate",
    "exact_const",
    "exact_const_quadrature",
    "evolve_profile",
    "feynman_kac",
    "path_block_generator",
    "PATH_BLOCK",
]

# Paths are simulated in fixed blocks; block k always draws from the same
# counter range, whatever the number of workers.
PATH_BLOCK = 4096


@dataclass(frozen=True)
class GaussianProfile:
    """``amplitude * exp(-|x - center|^2 / (2 sigma^2))``."""

    center: tuple
    sigma: float
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def d(self) -> int:
        return len(self.center)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.d)
        r2 = np.sum((X - np.array(self.center)) ** 2, axis=1)
        return self.amplitude * np.exp(-r2 / (2 * self.sigma**2))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    paths: int
    steps: int
    seed: int


def _axis_params(x, a, b, d=None):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size if d is None else d
    a = np.broadcast_to(np.asarray(a, dtype=float), (d,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (d,))
    return x, a, b


def exact_const(t: float, x, a, b, c: float, u0: GaussianProfile) -> float:
    """Closed-form solution for constant coefficients and Gaussian initial data."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x, a, b = _axis_params(x, a, b, u0.d)
    var = u0.sigma**2 + 2 * a**2 * t
    shift = x + b * t - np.array(u0.center)
    return float(
        u0.amplitude * math.exp(c * t) * np.prod(u0.sigma / np.sqrt(var)) * math.exp(-np.sum(shift**2 / (2 * var)))
    )


def evolve_profile(profile: GaussianProfile, t: float, a: float, b, c: float) -> GaussianProfile:
    """The Gaussian profile reached at time ``t`` (isotropic diffusion ``a``)."""
    d = profile.d
    b = np.broadcast_to(np.asarray(b, dtype=float), (d,))
    var = profile.sigma**2 + 2 * a**2 * t
    sigma = math.sqrt(var)
    amplitude = profile.amplitude * math.exp(c * t) * (profile.sigma / sigma) ** d
    return GaussianProfile(tuple(np.array(profile.center) - b * t), sigma, amplitude)


def exact_const_quadrature(t: float, x, a, b, c: float, u0: Callable, tol: float = 1e-10) -> float:
    """Constant-coefficient solution for general ``u0`` by adaptive quadrature.

    Integrates ``u0(x + b t + sqrt(2 t) a z)`` against the standard normal
    density, one nested 1D adaptive rule per diffusing axis.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    x, a, b = _axis_params(x, a, b)
    y = x + b * t
    scale = np.sqrt(2 * t) * a
    axes = [j for j in range(x.size) if scale[j] != 0]
    growth = math.exp(c * t)
    if not axes:
        return growth * float(np.asarray(u0(y.reshape(1, -1))).reshape(-1)[0])
    norm = (2 * math.pi) ** (-len(axes) / 2)

    def integrand(*z):
        p = y.copy()
        p[axes] += scale[axes] * np.array(z)
        val = float(np.asarray(u0(p.reshape(1, -1))).reshape(-1)[0])
        return val * norm * math.exp(-0.5 * sum(v * v for v in z))

    opts = {"epsabs": tol, "epsrel": tol, "limit": 200}
    value, _ = integrate.nquad(integrand, [(-np.inf, np.inf)] * len(axes), opts=[opts] * len(axes))
    return growth * value


def path_block_generator(seed: int, block: int) -> np.random.Generator:
    """Philox4x64-10 stream for one block of paths.

    Key = ``seed``; the counter's most significant word = ``block``, so
    blocks occupy disjoint counter ranges.  Normals come from numpy's
    ziggurat sampler on top of this bit generator.
    """
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, block]))


def _tree_sum(values: np.ndarray) -> float:
    """Pairwise sum in index order: adjacent pairs, level by level."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def _simulate_block(t, x, coeffs, u0, count, steps, seed, block):
    rng = path_block_generator(seed, block)
    d = coeffs.d
    dt = t / steps
    sq = math.sqrt(2.0 * dt)
    X = np.tile(np.asarray(x, dtype=float).reshape(1, d), (count, 1))
    logw = np.zeros(count)
    for _ in range(steps):
        Z = rng.standard_normal((count, d))
        logw += coeffs.reaction(X) * dt
        X = X + coeffs.drift(X) * dt + sq * coeffs.diffusion(X) * Z
    return np.exp(logw) * np.asarray(u0(X), dtype=float).reshape(-1)


def feynman_kac(t: float, x, coeffs: CoefficientSet, u0: Callable, paths: int, steps: int, seed: int,
                threads=None) -> McEstimate:
    """Euler-Maruyama Feynman-Kac estimate of ``u(t, x)``.

    The reaction integral uses the left-point rule on the same substeps.
    Bit-identical for fixed inputs and seed, whatever ``threads`` is.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if paths < 2 or steps < 1:
        raise ValueError("need at least 2 paths and 1 step")
    blocks = [(k, min(PATH_BLOCK, paths - k * PATH_BLOCK)) for k in range(-(-paths // PATH_BLOCK))]
    run = lambda kb: _simulate_block(t, x, coeffs, u0, kb[1], steps, seed, kb[0])
    workers = min(resolve_threads(threads), len(blocks))
    if workers == 1:
        parts = [run(kb) for kb in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    values = np.concatenate(parts)
    # shifting by the first sample keeps a constant sample exactly constant
    ref = values[0]
    dev = values - ref
    mean_dev = _tree_sum(dev) / paths
    mean = ref + mean_dev
    var = _tree_sum((dev - mean_dev) ** 2) / (paths - 1)
    return McEstimate(float(mean), math.sqrt(var / paths), paths, steps, seed)
