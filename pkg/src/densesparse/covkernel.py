"""Covariance, lagged cross-covariance and long-run kernel estimators.

Every kernel is a bivariate local linear smoother of an empirical product
matrix, fitted on one side of the diagonal only so that a kink of the true
kernel along ``t = s`` does not bias the fit.  Fields on the other half follow
from symmetry (lag 0) or from ``Gamma(t, s; b) = Gamma(s, t; -b)`` (lags).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from densesparse.exceptions import DegenerateVariance, GridMismatch, LagTooLarge
from densesparse.mean_diff import CurveMatrix, trapezoid_weights
from densesparse.weights import smooth_upper

__all__ = [
    "KernelField",
    "CorrelationField",
    "VARIANCE_FLOOR",
    "lag_products",
    "lag_bandwidths",
    "bartlett_weights",
    "cov_kernel",
    "lagged_kernel",
    "long_run_kernel",
    "pooled_variance",
    "project_center",
    "correlation",
    "variance_floor",
]

#: Relative floor below which a diagonal variance counts as degenerate.
VARIANCE_FLOOR = 1e-10


@dataclass(frozen=True)
class KernelField:
    """A bivariate kernel tabulated on ``eval_grid x eval_grid``.

    ``values[a, b]`` is the kernel at ``(eval_grid[a], eval_grid[b])``.
    ``lag`` is ``None`` for long-run and derived fields.
    """

    eval_grid: np.ndarray
    values: np.ndarray
    lag: int | None = 0
    bandwidths: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.eval_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (g.size, g.size):
            raise ValueError("kernel values must be G x G for a grid of G points")
        if not np.all(np.isfinite(v)):
            raise ValueError("kernel field has non-finite values")

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.values).copy()

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.values - self.values.T)) <= tol)

    def to_frame(self) -> pd.DataFrame:
        """Long format with columns ``t, s, value``."""
        g = np.asarray(self.eval_grid)
        tt, ss = np.meshgrid(g, g, indexing="ij")
        return pd.DataFrame({"t": tt.ravel(), "s": ss.ravel(), "value": self.values.ravel()})

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True)
class CorrelationField(KernelField):
    pass


def _check_grids(a: KernelField, b: KernelField):
    ga, gb = np.asarray(a.eval_grid), np.asarray(b.eval_grid)
    if ga.shape != gb.shape or not np.array_equal(ga, gb):
        raise GridMismatch("kernel fields live on different grids")


def lag_products(values, b: int, rows=None) -> np.ndarray:
    """Empirical lag-``b`` product matrix ``M[j, l] ~ E[Z_i(t_j) Z_{i+b}(t_l)]``.

    ``M = (sum_i Y_i Y_{i+b}^T - N_b Ybar Ybar^T) / (n - 1)`` where the sum
    runs over index pairs ``(i, i+b)`` with both indices in ``rows`` (all
    curves by default), ``N_b`` is the number of such pairs, ``n`` the number
    of rows and ``Ybar`` their column means.  Negative ``b`` gives the
    transpose of lag ``|b|``.
    """
    y = np.asarray(values, dtype=float)
    n_all = y.shape[0]
    rows = np.arange(n_all) if rows is None else np.sort(np.asarray(rows, dtype=int))
    lag = abs(int(b))
    member = np.zeros(n_all + lag, dtype=bool)
    member[rows] = True
    first = rows[member[rows + lag]]
    if first.size < 2 or rows.size < 2:
        raise LagTooLarge(f"lag {b} leaves {first.size} curve pair(s); need at least 2")
    ybar = y[rows].mean(axis=0)
    m = (y[first].T @ y[first + lag] - first.size * np.outer(ybar, ybar)) / (rows.size - 1)
    return m if b >= 0 else m.T


def lag_bandwidths(h0: float, m: int, factor: float = 1.1) -> tuple:
    """Bandwidth ladder ``h_b = factor * h_{b-1}`` for lags ``0..m``."""
    return tuple(float(h0 * factor**b) for b in range(m + 1))


def bartlett_weights(m: int) -> np.ndarray:
    """Bartlett taper ``1 - b/(m+1)`` for ``b = 1..m``."""
    return 1.0 - np.arange(1, m + 1) / (m + 1)


def cov_kernel(sample: CurveMatrix, h0: float, eval_grid, rows=None) -> KernelField:
    """Lag-0 covariance kernel from strictly off-diagonal design pairs."""
    g = np.asarray(eval_grid, dtype=float)
    if (sample.n if rows is None else len(rows)) < 2:
        raise LagTooLarge("need at least 2 curves for a covariance estimate")
    m = lag_products(sample.values, 0, rows)
    upper = smooth_upper(m, sample.grid, h0, g, strict=True)
    vals = np.where(np.isnan(upper), upper.T, upper)
    return KernelField(g, vals, 0, (float(h0),))


def _lag_field(m: np.ndarray, grid, h: float, g: np.ndarray) -> np.ndarray:
    upper = smooth_upper(m, grid, h, g, strict=False)       # Gamma(t, s; b), t <= s
    mirror = smooth_upper(m.T, grid, h, g, strict=False)    # Gamma(t, s; -b), t <= s
    vals = np.where(np.isnan(upper), mirror.T, upper)
    diag = 0.5 * (np.diag(upper) + np.diag(mirror))
    np.fill_diagonal(vals, diag)
    return vals


def lagged_kernel(sample: CurveMatrix, b: int, h_b: float, eval_grid, rows=None) -> KernelField:
    """Cross-covariance kernel ``Gamma(t, s; b) = E[Z_i(t) Z_{i+b}(s)]`` for ``b != 0``.

    On the diagonal the estimates obtained from the ``b`` and ``-b`` half
    planes are averaged.
    """
    if b == 0:
        raise ValueError("use cov_kernel for lag 0")
    g = np.asarray(eval_grid, dtype=float)
    m = lag_products(sample.values, b, rows)
    return KernelField(g, _lag_field(m, sample.grid, h_b, g), int(b), (float(h_b),))


def long_run_kernel(sample: CurveMatrix, m: int, bandwidths, eval_grid, rows=None) -> KernelField:
    """Bartlett-weighted long-run kernel up to lag ``m``.

    ``bandwidths`` is either a sequence ``(h_0, ..., h_m)`` or a scalar
    ``h_0``, in which case lags use :func:`lag_bandwidths`.
    """
    n_eff = sample.n if rows is None else len(rows)
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m >= n_eff - 1:
        raise LagTooLarge(f"m={m} needs more than {m + 1} curves, got {n_eff}")
    hs = lag_bandwidths(bandwidths, m) if np.ndim(bandwidths) == 0 else tuple(map(float, bandwidths))
    if len(hs) != m + 1:
        raise ValueError(f"expected {m + 1} bandwidths, got {len(hs)}")
    base = cov_kernel(sample, hs[0], eval_grid, rows)
    vals = base.values.copy()
    for b, wb in zip(range(1, m + 1), bartlett_weights(m)):
        fb = _lag_field(lag_products(sample.values, b, rows), sample.grid, hs[b], base.eval_grid)
        vals += wb * (fb + fb.T)
    return KernelField(base.eval_grid, vals, None, hs, {"m": m})


def pooled_variance(gamma_s: KernelField, gamma_d: KernelField, ratio: float) -> KernelField:
    """``gamma_s + ratio * gamma_d``."""
    if ratio < 0:
        raise ValueError("ratio must be nonnegative")
    _check_grids(gamma_s, gamma_d)
    return KernelField(gamma_s.eval_grid, gamma_s.values + ratio * gamma_d.values, None,
                       gamma_s.bandwidths + gamma_d.bandwidths, {"ratio": ratio})


def project_center(f: KernelField) -> KernelField:
    """Covariance of ``X - int X`` given the covariance ``f`` of ``X``.

    ``(P f)(t, s) = f(t, s) - int f(t, y) dy - int f(y, s) dy + int int f``,
    with all integrals by the trapezoid rule on the field's grid.
    """
    g = np.asarray(f.eval_grid)
    if g.size < 3:
        raise ValueError("projection needs at least 3 grid points")
    q = trapezoid_weights(g) / (g[-1] - g[0])
    v = f.values
    rows = v @ q
    cols = q @ v
    total = q @ v @ q
    return KernelField(g, v - rows[:, None] - cols[None, :] + total, None, f.bandwidths,
                       {**f.meta, "projected": True})


def variance_floor(diag) -> float:
    return VARIANCE_FLOOR * max(float(np.max(diag)), 0.0)


def correlation(f: KernelField) -> CorrelationField:
    """Correlation ``f(t, s) / sqrt(f(t, t) f(s, s))``."""
    d = f.diagonal
    if np.max(d) <= 0 or np.any(d <= variance_floor(d)):
        raise DegenerateVariance("kernel diagonal is not strictly positive")
    sd = np.sqrt(d)
    vals = f.values / np.outer(sd, sd)
    np.fill_diagonal(vals, 1.0)
    return CorrelationField(f.eval_grid, vals, f.lag, f.bandwidths, dict(f.meta))
