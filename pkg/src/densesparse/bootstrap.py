"""Multiplier bootstrap for sup-norm quantiles, uniform bands and the constant test.

For serially dependent curves the multipliers are tapered moving averages of
Gaussian base draws, ``xi_i = sum_b kappa(b; n) W_{i+b}``, so that
multipliers of nearby curves are correlated over a window of ``l(n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from densesparse.covkernel import KernelField, project_center, variance_floor
from densesparse.exceptions import DegenerateVariance
from densesparse.mean_diff import CurveEstimate, CurveMatrix, DifferenceFit, trapezoid_weights

__all__ = [
    "MULTIPLIER_KINDS",
    "MultiplierConfig",
    "ResidualProcesses",
    "BandResult",
    "block_length",
    "taper_q",
    "taper",
    "base_variance",
    "make_multipliers",
    "residual_processes",
    "studentizing_variance",
    "bootstrap_statistic",
    "bootstrap_replicates",
    "sup_quantile",
    "build_band",
]

MULTIPLIER_KINDS = ("kappa1", "kappa2", "iid_gaussian", "rademacher")

#: How the base draws are scaled.  ``"sd"`` draws ``W ~ N(0, 1/q(n))``, i.e.
#: standard deviation ``1/sqrt(q(n))``; ``"variance"`` draws
#: ``W ~ N(0, 1/sqrt(q(n)))``.  See :func:`base_variance`.
BASE_SCALE = "sd"


def block_length(n: int) -> int:
    """``l(n) = floor(2 n^(1/3))``, at least 1."""
    ln = math.floor(2 * n ** (1 / 3) + 1e-12)
    return max(ln, 1)


def taper_q(n: int) -> float:
    """``q(n) = 1 / (2 l(n) - 1)``."""
    return 1.0 / (2 * block_length(n) - 1)


def taper(kind: str, n: int) -> np.ndarray:
    """Taper ``kappa(b; n)`` for ``b = -(l-1), ..., l-1``."""
    ln = block_length(n)
    b = np.arange(-(ln - 1), ln)
    if kind == "kappa1":
        return np.full(b.size, 1.0 / (2 * ln - 1))
    if kind == "kappa2":
        return np.maximum(0.0, (1 - np.abs(b) / ln) / ln)
    raise ValueError(f"no taper for multiplier kind {kind!r}")


def base_variance(n: int, scale: str | None = None) -> float:
    """Variance of the Gaussian base draws ``W_i``."""
    scale = BASE_SCALE if scale is None else scale
    if scale == "sd":
        return 1.0 / taper_q(n)
    if scale == "variance":
        return 1.0 / math.sqrt(taper_q(n))
    raise ValueError(f"unknown base scale {scale!r}")


@dataclass(frozen=True)
class MultiplierConfig:
    kind: str = "kappa1"
    seed: int = 0
    base_scale: str = BASE_SCALE

    def __post_init__(self):
        if self.kind not in MULTIPLIER_KINDS:
            raise ValueError(f"kind must be one of {MULTIPLIER_KINDS}")


def _stream(seed: int, replicate: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), replicate, stream]))


def make_multipliers(n: int, config: MultiplierConfig, replicate: int, stream: int = 0) -> np.ndarray:
    """Multipliers ``xi_1..xi_n`` for one bootstrap replicate.

    The random stream is a pure function of ``(config.seed, replicate,
    stream)``; use different ``stream`` values for the two samples.
    """
    if n < 2:
        raise ValueError("need at least two multipliers")
    rng = _stream(config.seed, replicate, stream)
    if config.kind == "iid_gaussian":
        return rng.standard_normal(n)
    if config.kind == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=n)
    k = taper(config.kind, n)
    w = rng.standard_normal(n + k.size - 1) * math.sqrt(base_variance(n, config.base_scale))
    return np.convolve(w, k, mode="valid")


@dataclass(frozen=True)
class ResidualProcesses:
    """Smoothed residual processes on the evaluation grid.

    ``sparse`` is ``n x G``; ``dense`` is ``n_dense x G`` (dense curves
    smoothed at the sparse design points and then again with sparse weights).
    """

    eval_grid: np.ndarray
    sparse: np.ndarray
    dense: np.ndarray
    offset: np.ndarray = field(default=None, repr=False)


def residual_processes(sparse: CurveMatrix, dense: CurveMatrix, fit: DifferenceFit,
                       demean: bool = True) -> ResidualProcesses:
    """Per-curve residual processes entering the bootstrap numerator.

    ``X_i(t) = sum_j w_j(t) (Y_ij - mu_sparse(t))`` and
    ``X_k(t) = sum_j w_j(t) sum_l w_l(t_j) (Y_kl - mu_dense(t))``.  Both share
    the cross-curve mean ``sum_j w_j(t) mu_dense(t_j) - mu_dense(t)``, a pure
    smoothing-bias term; with ``demean`` it is removed so that each matrix
    has column means zero (the processes then equal the smoothed, centered
    curves).  The removed offset is kept in ``offset``.
    """
    w_s = fit.w_sparse
    xs = sparse.values @ w_s.T - fit.sparse_mean.values[None, :]
    w_sd = w_s @ fit.w_dense_sparse  # (G, p~)
    xd = dense.values @ w_sd.T - fit.dense_mean.values[None, :]
    offset = None
    if demean:
        offset = xs.mean(axis=0)
        xs = xs - offset
        xd = xd - xd.mean(axis=0)
    return ResidualProcesses(fit.eval_grid, xs, xd, offset)


def studentizing_variance(pooled: KernelField, centered: bool) -> np.ndarray:
    """Diagonal of the pooled kernel, projected first when ``centered``."""
    f = project_center(pooled) if centered else pooled
    return f.diagonal


def _check_variance(var: np.ndarray, reference=None):
    ref = var if reference is None else reference
    floor = variance_floor(ref)
    if np.max(ref) <= 0 or np.any(var <= floor):
        raise DegenerateVariance("studentizing variance is not strictly positive on the grid")


def bootstrap_statistic(res: ResidualProcesses, variance, ratio: float, xi, eta,
                        centered: bool = True) -> np.ndarray:
    """Bootstrap process(es) on the evaluation grid.

    ``xi`` and ``eta`` are multiplier vectors (or ``R x n`` / ``R x n_dense``
    matrices for ``R`` replicates at once).  The numerator is
    ``sum_i X_i xi_i + ratio * sum_k X_k eta_k`` (processes centered by their
    integrals when ``centered``) and the denominator ``sqrt(n - 1) *
    sqrt(variance)``.
    """
    var = np.asarray(variance, dtype=float)
    _check_variance(var)
    xs, xd = res.sparse, res.dense
    if centered:
        q = trapezoid_weights(res.eval_grid) / (res.eval_grid[-1] - res.eval_grid[0])
        xs = xs - (xs @ q)[:, None]
        xd = xd - (xd @ q)[:, None]
    n = xs.shape[0]
    num = np.asarray(xi, dtype=float) @ xs + ratio * (np.asarray(eta, dtype=float) @ xd)
    return num / (math.sqrt(n - 1) * np.sqrt(var))


def bootstrap_replicates(res: ResidualProcesses, variance, ratio: float, config: MultiplierConfig,
                         n_boot: int = 1000, centered: bool = True, first: int = 0) -> np.ndarray:
    """Sup-norms ``max_t |B_r(t)|`` for replicates ``first .. first + n_boot - 1``."""
    n, nd = res.sparse.shape[0], res.dense.shape[0]
    reps = range(first, first + n_boot)
    xi = np.stack([make_multipliers(n, config, r, 0) for r in reps])
    eta = np.stack([make_multipliers(nd, config, r, 1) for r in reps])
    stat = bootstrap_statistic(res, variance, ratio, xi, eta, centered)
    return np.max(np.abs(stat), axis=1)


def sup_quantile(replicates, alpha: float) -> float:
    """Order-statistic quantile: the ``ceil((1 - alpha) N)``-th smallest sup-norm.

    ``replicates`` holds either sup-norms (1-d) or whole bootstrap curves
    (``N x G``), in which case their sup-norms are taken first.
    """
    r = np.asarray(replicates, dtype=float)
    if r.ndim == 2:
        r = np.max(np.abs(r), axis=1)
    if r.size < 1:
        raise ValueError("no replicates")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    k = math.ceil((1 - alpha) * r.size - 1e-9)
    k = min(max(k, 1), r.size)
    return float(np.sort(r)[k - 1])


@dataclass(frozen=True)
class BandResult:
    eval_grid: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    quantile: float
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    centered: bool
    reject_constant: bool | None
    n: int = None
    meta: dict = field(default_factory=dict)

    def covers(self, truth) -> bool:
        truth = np.asarray(truth, dtype=float)
        return bool(np.all((self.lower <= truth) & (truth <= self.upper)))

    def sup_statistic(self) -> float:
        """``max_t |estimate(t)| sqrt(n - 1) / se(t)``, the test statistic for zero."""
        return float(np.max(np.abs(self.estimate) * math.sqrt(self.n - 1) / self.se))


def build_band(estimate, variance, quantile: float, n: int, alpha: float = 0.05,
               centered: bool = True, meta: dict | None = None) -> BandResult:
    """Uniform band ``estimate +- quantile * sqrt(variance) / sqrt(n - 1)``.

    For a centered band ``reject_constant`` is true when the zero function
    leaves the band somewhere on the grid; it is ``None`` for uncentered bands.
    """
    if quantile < 0:
        raise ValueError("quantile must be nonnegative")
    x = np.asarray(estimate.eval_grid if isinstance(estimate, CurveEstimate) else meta["eval_grid"])
    est = np.asarray(estimate.values if isinstance(estimate, CurveEstimate) else estimate, dtype=float)
    var = np.asarray(variance, dtype=float)
    _check_variance(var)
    se = np.sqrt(var)
    half = quantile * se / math.sqrt(n - 1)
    lower, upper = est - half, est + half
    reject = bool(np.any((lower > 0) | (upper < 0))) if centered else None
    return BandResult(x, est, se, float(quantile), lower, upper, alpha, centered, reject, n,
                      dict(meta or {}))
