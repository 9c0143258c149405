"""Cubic B-spline least squares with a ridge penalty on the coefficients.

As in ordinary ridge regression the intercept is left unpenalised: columns
and targets are centred before the penalised solve, so adding a constant to
the input shifts the fit by exactly that constant.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline


class NumericalFailure(RuntimeError):
    pass


def knot_vector(lo: float, hi: float, n_knots: int, degree: int = 3) -> np.ndarray:
    """Clamped knot vector with ``n_knots`` uniform interior knots."""
    interior = np.linspace(lo, hi, n_knots + 2)[1:-1]
    return np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])


def design_matrix(x, n_knots: int = 25, degree: int = 3, lo=None, hi=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    lo = x.min() if lo is None else lo
    hi = x.max() if hi is None else hi
    t = knot_vector(lo, hi, n_knots, degree)
    return BSpline.design_matrix(x, t, degree).toarray()


def _solve(B, y, lam):
    gram = B.T @ B + lam * np.eye(B.shape[1])
    try:
        coef = np.linalg.solve(gram, B.T @ y)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(coef)) or np.linalg.cond(gram) > 1e14:
        return None
    return coef


def fit_spline_smooth(grid, values, n_knots: int = 25, ridge_lambda: float = 1e-3) -> np.ndarray:
    """Penalised least-squares spline fit of ``values``; returns fitted values on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.shape != values.shape or grid.ndim != 1:
        raise ValueError("grid and values must be 1-d arrays of equal length")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    B = design_matrix(grid, n_knots)
    b_mean = B.mean(axis=0)
    y_mean = float(values.mean())
    Bc = B - b_mean
    coef = _solve(Bc, values - y_mean, ridge_lambda)
    if coef is None:
        coef = _solve(Bc, values - y_mean, max(10.0 * ridge_lambda, 1e-6))
    if coef is None:
        raise NumericalFailure("spline normal equations are singular")
    return Bc @ coef + y_mean
