"""scikit-learn style wrappers.

``ChernoffPropagator`` is a linear transformer on grid samples: each row of
``X`` holds initial values at the grid nodes and ``transform`` returns the
values after ``n`` steps of size ``t/n``.  The two regressors predict the
solution at arbitrary points with the exact measure composition and with
Feynman-Kac Monte Carlo.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .chernoff import DEFAULT_BUDGET, _Stencil, displacement_bound
from .fields import CoefficientSet
from .grid import EXTENSIONS, GridSpec
from .measure import evaluate_exact
from .reference import feynman_kac

__all__ = ["ChernoffPropagator", "ExactChernoffRegressor", "FeynmanKacRegressor"]


def _check_problem(coefficients, t, n=None):
    if not isinstance(coefficients, CoefficientSet):
        raise TypeError("coefficients must be a CoefficientSet")
    if not (np.isfinite(t) and t >= 0):
        raise ValueError("t must be finite and nonnegative")
    if n is not None and (int(n) != n or n < 1):
        raise ValueError("n must be a positive integer")


class ChernoffPropagator(TransformerMixin, BaseEstimator):
    """Apply ``(S(t/n))^n`` to grid samples.

    Parameters
    ----------
    coefficients : CoefficientSet
    grid : GridSpec
    t : float
        Final time.
    n : int
        Number of composed steps.
    extension : {"clamp", "zero", "periodic"}
    n_jobs : int or None
        Worker threads; results do not depend on it.
    """

    def __init__(self, coefficients=None, grid=None, t=1.0, n=16, extension="clamp", n_jobs=None):
        self.coefficients = coefficients
        self.grid = grid
        self.t = t
        self.n = n
        self.extension = extension
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        _check_problem(self.coefficients, self.t, self.n)
        if not isinstance(self.grid, GridSpec):
            raise TypeError("grid must be a GridSpec")
        if self.grid.d != self.coefficients.d:
            raise ValueError("grid and coefficients disagree on the dimension")
        if self.extension not in EXTENSIONS:
            raise ValueError(f"extension must be one of {EXTENSIONS}")
        if X is not None:
            check_array(X)
        tau = self.t / self.n
        self.n_features_in_ = self.grid.size
        self.stencil_ = _Stencil(tau, self.coefficients, self.grid, self.extension) if tau > 0 else None
        self.step_displacement_bound_ = displacement_bound(tau, self.coefficients, self.grid)
        self.wandering_radius_ = self.n * self.step_displacement_bound_
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} grid values per row, got {X.shape[1]}")
        if self.stencil_ is None:
            return X.copy()
        out = np.empty_like(X)
        for i, row in enumerate(X):
            flat = row
            for _ in range(self.n):
                flat = self.stencil_.apply(flat, self.n_jobs)
            out[i] = flat
        return out


class ExactChernoffRegressor(RegressorMixin, BaseEstimator):
    """``((S(t/n))^n u0)(x)`` at query points by exact measure composition."""

    def __init__(self, coefficients=None, initial=None, t=1.0, n=4, budget=DEFAULT_BUDGET):
        self.coefficients = coefficients
        self.initial = initial
        self.t = t
        self.n = n
        self.budget = budget

    def fit(self, X=None, y=None):
        _check_problem(self.coefficients, self.t, self.n)
        if not callable(self.initial):
            raise TypeError("initial must be callable on (m, d) arrays")
        self.n_features_in_ = self.coefficients.d
        return self

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        return np.array([evaluate_exact(x, self.t, self.n, self.coefficients, self.initial, self.budget) for x in X])


class FeynmanKacRegressor(RegressorMixin, BaseEstimator):
    """Monte Carlo estimate of ``u(t, x)`` at query points."""

    def __init__(self, coefficients=None, initial=None, t=1.0, paths=10_000, steps=100, random_state=0, n_jobs=None):
        self.coefficients = coefficients
        self.initial = initial
        self.t = t
        self.paths = paths
        self.steps = steps
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        _check_problem(self.coefficients, self.t)
        if not callable(self.initial):
            raise TypeError("initial must be callable on (m, d) arrays")
        if not isinstance(self.random_state, (int, np.integer)):
            raise TypeError("random_state must be an integer seed")
        self.n_features_in_ = self.coefficients.d
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        est = [
            feynman_kac(self.t, x, self.coefficients, self.initial, self.paths, self.steps, int(self.random_state), self.n_jobs)
            for x in X
        ]
        mean = np.array([e.mean for e in est])
        if return_std:
            return mean, np.array([e.stderr for e in est])
        return mean
