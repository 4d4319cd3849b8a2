"""Mean and mean-difference estimators for a dense and a sparse sample.

The dense mean is a local polynomial smoother of the dense column means.  The
difference ``delta = mu_sparse - mu_dense`` is estimated by smoothing the
sparse column means *after* subtracting the dense fit evaluated at the sparse
design points, which lets ``delta`` use a larger bandwidth than either mean.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from densesparse.exceptions import GridMismatch, NegativeVariance
from densesparse.weights import DesignGrid, weight_matrix

__all__ = [
    "CurveMatrix",
    "CurveEstimate",
    "DifferenceEstimate",
    "DifferenceFit",
    "ScalarCI",
    "make_eval_grid",
    "trapezoid_weights",
    "dense_mean",
    "dense_mean_fn",
    "naive_difference",
    "residual_difference",
    "sparse_mean",
    "center",
    "integral_ci",
    "fit_difference",
]


def make_eval_grid(size: int = 101) -> np.ndarray:
    """Uniform evaluation grid with ``size`` points on ``[0, 1]``."""
    if size < 3:
        raise ValueError("evaluation grid needs at least 3 points")
    return np.linspace(0.0, 1.0, size)


def trapezoid_weights(x) -> np.ndarray:
    """Weights ``q`` with ``q @ f(x)`` the trapezoid rule over ``[x[0], x[-1]]``."""
    x = np.asarray(x, dtype=float)
    dx = np.diff(x)
    q = np.zeros_like(x)
    q[:-1] += dx / 2
    q[1:] += dx / 2
    return q


@dataclass(frozen=True)
class CurveMatrix:
    """Synchronously sampled curves: one row per curve, one column per design point."""

    values: np.ndarray
    grid: DesignGrid
    label: str = "sparse"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("curve values must be a 2-d array (curves x points)")
        grid = self.grid if isinstance(self.grid, DesignGrid) else DesignGrid(self.grid)
        if v.shape[1] != grid.p:
            raise ValueError(
                f"{v.shape[1]} columns but {grid.p} design points"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values contain missing or non-finite entries")
        if self.label not in ("dense", "sparse"):
            raise ValueError("label must be 'dense' or 'sparse'")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "grid", grid)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column_means(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def subset(self, rows) -> "CurveMatrix":
        return CurveMatrix(self.values[np.asarray(rows)], self.grid, self.label)


@dataclass(frozen=True)
class CurveEstimate:
    """A function estimate tabulated on an evaluation grid."""

    eval_grid: np.ndarray
    values: np.ndarray
    bandwidths: dict = field(default_factory=dict)
    degrees: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.eval_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.shape != v.shape or x.ndim != 1:
            raise ValueError("eval_grid and values must be 1-d of equal length")
        if not np.all(np.isfinite(v)):
            raise ValueError("estimate has non-finite values")

    def __call__(self, t):
        """Linear interpolation; prefer refitting at exact points where it matters."""
        return np.interp(t, self.eval_grid, self.values)

    def integral(self) -> float:
        return float(trapezoid_weights(self.eval_grid) @ self.values)

    def sup_error(self, truth) -> float:
        """``max_t |estimate(t) - truth(t)|`` over the evaluation grid."""
        target = truth(self.eval_grid) if callable(truth) else np.asarray(truth)
        return float(np.max(np.abs(self.values - target)))


@dataclass(frozen=True)
class DifferenceEstimate(CurveEstimate):
    """Residual-based difference estimate; keeps the sparse residual means."""

    residuals: np.ndarray = None


@dataclass(frozen=True)
class ScalarCI:
    estimate: float
    lower: float
    upper: float
    level: float
    variance_used: float

    def __post_init__(self):
        if not self.lower <= self.estimate <= self.upper:
            raise ValueError("confidence interval does not contain its estimate")

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def as_dict(self) -> dict:
        return {
            "estimate": float(self.estimate),
            "lower": float(self.lower),
            "upper": float(self.upper),
            "level": float(self.level),
            "variance": float(self.variance_used),
        }


def _same_grid(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or not np.array_equal(a, b):
        raise GridMismatch("estimates are tabulated on different grids")


def dense_mean(dense: CurveMatrix, h: float, d: int, eval_grid) -> CurveEstimate:
    """Smooth the dense column means with degree-``d`` local polynomial weights."""
    x = np.asarray(eval_grid, dtype=float)
    w = weight_matrix(x, dense.grid, h, d)
    return CurveEstimate(x, w @ dense.column_means(), {"dense": h}, {"dense": d})


def dense_mean_fn(dense: CurveMatrix, h: float, d: int) -> Callable[[np.ndarray], np.ndarray]:
    """Callable evaluating the dense mean estimate exactly at arbitrary points."""
    ybar = dense.column_means()

    def fn(t):
        return weight_matrix(np.atleast_1d(t), dense.grid, h, d) @ ybar

    fn.bandwidth = h
    fn.degree = d
    return fn


def naive_difference(sparse: CurveMatrix, dense: CurveMatrix, h: float, h_dense: float,
                     d: int, d_dense: int, eval_grid) -> CurveEstimate:
    """Difference of two separately smoothed means."""
    x = np.asarray(eval_grid, dtype=float)
    mu_s = weight_matrix(x, sparse.grid, h, d) @ sparse.column_means()
    mu_d = dense_mean(dense, h_dense, d_dense, x).values
    return CurveEstimate(x, mu_s - mu_d, {"sparse": h, "dense": h_dense},
                         {"sparse": d, "dense": d_dense})


def residual_difference(sparse: CurveMatrix, dense_mean_fn, h: float, d: int,
                        eval_grid) -> DifferenceEstimate:
    """Smooth the sparse residual means ``Ybar_j - mu_dense(t_j)``.

    ``dense_mean_fn`` is either a callable returning the dense estimate at
    given points, or a :class:`CurveEstimate` tabulated exactly on the sparse
    design points.
    """
    t_s = sparse.grid.points
    if isinstance(dense_mean_fn, CurveEstimate):
        _same_grid(dense_mean_fn.eval_grid, t_s)
        at_sparse = dense_mean_fn.values
        bw = dense_mean_fn.bandwidths.get("dense")
    else:
        at_sparse = np.asarray(dense_mean_fn(t_s), dtype=float)
        bw = getattr(dense_mean_fn, "bandwidth", None)
    resid = sparse.column_means() - at_sparse
    x = np.asarray(eval_grid, dtype=float)
    w = weight_matrix(x, sparse.grid, h, d)
    return DifferenceEstimate(x, w @ resid, {"sparse": h, "dense": bw}, {"sparse": d},
                              residuals=resid)


def sparse_mean(delta_hat: CurveEstimate, dense_mean: CurveEstimate) -> CurveEstimate:
    """Reconstruct the sparse mean as ``delta_hat + dense_mean``."""
    _same_grid(delta_hat.eval_grid, dense_mean.eval_grid)
    bw = {**dense_mean.bandwidths, **delta_hat.bandwidths}
    return CurveEstimate(delta_hat.eval_grid, delta_hat.values + dense_mean.values, bw,
                         {**dense_mean.degrees, **delta_hat.degrees})


def center(delta_hat: CurveEstimate) -> CurveEstimate:
    """Subtract the trapezoid-rule average over the evaluation grid."""
    x = np.asarray(delta_hat.eval_grid)
    if x.size < 3:
        raise ValueError("centering needs at least 3 grid points")
    span = x[-1] - x[0]
    avg = trapezoid_weights(x) @ delta_hat.values / span
    return CurveEstimate(x, delta_hat.values - avg, delta_hat.bandwidths, delta_hat.degrees)


def integral_ci(delta_hat: CurveEstimate, pooled_variance_surface, n: int,
                level: float = 0.95) -> ScalarCI:
    """Normal confidence interval for the integral of the difference.

    The variance of ``sqrt(n) * integral`` is the double integral of the pooled
    (long-run) kernel surface.  ``level`` is the confidence level, e.g. 0.95.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    x = np.asarray(delta_hat.eval_grid)
    surface = getattr(pooled_variance_surface, "values", pooled_variance_surface)
    surface = np.asarray(surface, dtype=float)
    grid = getattr(pooled_variance_surface, "eval_grid", x)
    _same_grid(grid, x)
    q = trapezoid_weights(x)
    var = float(q @ surface @ q)
    if var < -1e-8:
        raise NegativeVariance(f"integrated variance surface is negative ({var:.3g})")
    var = max(var, 0.0)
    est = float(q @ delta_hat.values)
    half = stats.norm.ppf(0.5 + level / 2) * np.sqrt(var / n)
    return ScalarCI(est, float(est - half), float(est + half), level, var)


@dataclass(frozen=True)
class DifferenceFit:
    """Everything the residual-based fit produces, including its weight matrices."""

    eval_grid: np.ndarray
    dense_mean: CurveEstimate
    delta: DifferenceEstimate
    sparse_mean: CurveEstimate
    centered: CurveEstimate
    w_sparse: np.ndarray = field(repr=False)           # (G, p)   sparse weights at eval grid
    w_dense_sparse: np.ndarray = field(repr=False)     # (p, p~)  dense weights at sparse points
    h: float = None
    h_dense: float = None
    d: int = 2
    d_dense: int = 2


def fit_difference(sparse: CurveMatrix, dense: CurveMatrix, h: float, h_dense: float,
                   d: int = 2, d_dense: int = 2, eval_grid=None) -> DifferenceFit:
    """Dense mean, residual-based difference, reconstructed sparse mean and centering."""
    x = make_eval_grid() if eval_grid is None else np.asarray(eval_grid, dtype=float)
    w_s = weight_matrix(x, sparse.grid, h, d)
    w_ds = weight_matrix(sparse.grid.points, dense.grid, h_dense, d_dense)
    mu_d = dense_mean(dense, h_dense, d_dense, x)
    resid = sparse.column_means() - w_ds @ dense.column_means()
    delta = DifferenceEstimate(x, w_s @ resid, {"sparse": h, "dense": h_dense},
                               {"sparse": d, "dense": d_dense}, residuals=resid)
    return DifferenceFit(
        eval_grid=x,
        dense_mean=mu_d,
        delta=delta,
        sparse_mean=sparse_mean(delta, mu_d),
        centered=center(delta),
        w_sparse=w_s,
        w_dense_sparse=w_ds,
        h=h,
        h_dense=h_dense,
        d=d,
        d_dense=d_dense,
    )
