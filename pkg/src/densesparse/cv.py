"""hv-block K-fold cross-validation for all bandwidths.

Test sets are contiguous blocks of curves; the training set drops the test
block plus ``g`` curves on either side.  Every criterion is the mean over
folds of a sup-norm prediction error on the design grid, and the selected
bandwidth minimises it (ties go to the larger bandwidth).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from densesparse.covkernel import _lag_field, lag_products
from densesparse.exceptions import (
    DegenerateFold,
    InsufficientSupport,
    LagTooLarge,
    SingularDesign,
)
from densesparse.mean_diff import CurveMatrix
from densesparse.weights import smooth_upper, weight_matrix

__all__ = [
    "FoldPlan",
    "CVResult",
    "make_folds",
    "default_candidates",
    "cv_mean_bandwidth",
    "cv_delta_bandwidth",
    "cv_kernel_bandwidth",
    "pool_cv",
]


@dataclass(frozen=True)
class FoldPlan:
    """Test and training index sets (0-based curve indices) for each fold."""

    n: int
    K: int
    g: int
    test: tuple
    train: tuple

    def __iter__(self):
        return iter(zip(self.test, self.train))


def make_folds(n: int, K: int = 5, g: int = 5) -> FoldPlan:
    """Contiguous test blocks of length ``floor(n/K)`` with gap-trimmed training sets.

    Indices beyond ``K * floor(n/K)`` are never tested but remain available
    for training.
    """
    if K < 2:
        raise ValueError("need at least two folds")
    if g < 0:
        raise ValueError("gap must be nonnegative")
    size = n // K
    if size < 1:
        raise DegenerateFold(f"n={n} is too small for K={K} folds")
    tests, trains = [], []
    for r in range(K):
        lo, hi = r * size, (r + 1) * size
        test = np.arange(lo, hi)
        keep = np.ones(n, dtype=bool)
        keep[max(lo - g, 0):min(hi + g, n)] = False
        train = np.flatnonzero(keep)
        if train.size == 0:
            raise DegenerateFold(f"fold {r + 1} has an empty training set (n={n}, K={K}, g={g})")
        test.setflags(write=False)
        train.setflags(write=False)
        tests.append(test)
        trains.append(train)
    return FoldPlan(n, K, g, tuple(tests), tuple(trains))


def default_candidates(p: int, size: int = 20, upper: float = 1.0) -> np.ndarray:
    """Equispaced bandwidths from ``max(2/p, 0.05)`` to ``upper``."""
    return np.linspace(min(max(2.0 / p, 0.05), upper), upper, size)


@dataclass(frozen=True)
class CVResult:
    candidates: np.ndarray
    scores: np.ndarray                  # mean over folds; NaN for failed candidates
    fold_scores: np.ndarray             # (W, K)
    selected: float
    failed: dict = field(default_factory=dict)
    name: str = ""

    def trace(self) -> pd.DataFrame:
        """Long table with columns ``candidate, fold, score``."""
        w, k = self.fold_scores.shape
        return pd.DataFrame({
            "candidate": np.repeat(self.candidates, k),
            "fold": np.tile(np.arange(1, k + 1), w),
            "score": self.fold_scores.ravel(),
        })


def _select(candidates, fold_scores, failed, name) -> CVResult:
    cand = np.asarray(candidates, dtype=float)
    scores = fold_scores.mean(axis=1)
    ok = np.isfinite(scores)
    if not ok.any():
        raise InsufficientSupport(f"{name}: every candidate bandwidth failed ({failed})")
    best = np.min(scores[ok])
    ties = ok & np.isclose(scores, best, rtol=1e-9, atol=1e-12)
    selected = float(np.max(cand[ties]))
    return CVResult(cand, scores, fold_scores, selected, failed, name)


def _run(candidates, folds: FoldPlan, score_fn, name, check=None) -> CVResult:
    cand = np.asarray(candidates, dtype=float)
    fold_scores = np.full((cand.size, folds.K), np.nan)
    failed = {}
    for w, h in enumerate(cand):
        try:
            if check is not None:
                check(h)
            fold_scores[w] = score_fn(h)
        except (InsufficientSupport, SingularDesign) as exc:
            failed[float(h)] = str(exc)
    return _select(cand, fold_scores, failed, name)


def _univariate_check(grid, eval_grid, d):
    if eval_grid is None:
        return None
    return lambda h: weight_matrix(eval_grid, grid, h, d)


def _bivariate_check(grid, eval_grid):
    if eval_grid is None:
        return None
    x = np.asarray(eval_grid, dtype=float)
    zero = np.zeros((grid.p, grid.p))
    return lambda h: smooth_upper(zero, grid, h, x, strict=True)


def cv_mean_bandwidth(dense: CurveMatrix, candidates, d: int, folds: FoldPlan,
                      eval_grid=None) -> CVResult:
    """Bandwidth of the dense mean smoother.

    With ``eval_grid`` given, candidates whose weights cannot be formed at
    those points (or at the sparse design points, see
    :func:`cv_delta_bandwidth`) are skipped like any other failing candidate.
    """
    t = dense.grid.points
    y = dense.values
    test_means = [y[te].mean(axis=0) for te in folds.test]
    train_means = [y[tr].mean(axis=0) for tr in folds.train]

    def score(h):
        w = weight_matrix(t, dense.grid, h, d)
        return [np.max(np.abs(te - w @ tr)) for te, tr in zip(test_means, train_means)]

    return _run(candidates, folds, score, "dense mean", _univariate_check(dense.grid, eval_grid, d))


def cv_delta_bandwidth(sparse: CurveMatrix, dense: CurveMatrix, h_dense: float, candidates,
                       d: int, d_dense: int, folds: FoldPlan, eval_grid=None) -> CVResult:
    """Bandwidth of the residual-based difference; the dense fit uses all dense curves."""
    t = sparse.grid.points
    mu_d = weight_matrix(t, dense.grid, h_dense, d_dense) @ dense.column_means()
    y = sparse.values
    test_res = [y[te].mean(axis=0) - mu_d for te in folds.test]
    train_res = [y[tr].mean(axis=0) - mu_d for tr in folds.train]

    def score(h):
        w = weight_matrix(t, sparse.grid, h, d)
        return [np.max(np.abs(te - w @ tr)) for te, tr in zip(test_res, train_res)]

    return _run(candidates, folds, score, "difference", _univariate_check(sparse.grid, eval_grid, d))


def cv_kernel_bandwidth(residuals: CurveMatrix, b: int, candidates, folds: FoldPlan,
                        eval_grid=None) -> CVResult:
    """Bandwidth of the lag-``b`` kernel estimator (``b >= 0``).

    ``residuals`` are observations minus the fitted mean at the design points.
    The test target is the empirical lag-``b`` product matrix of the test
    block; the prediction is the kernel estimate from the training curves at
    the design lattice.  For ``b = 0`` the error runs over pairs ``j < l``;
    for ``b >= 1`` over ``j <= l`` after adding each matrix to its transpose.
    """
    b = abs(int(b))
    grid = residuals.grid
    t = grid.points
    z = residuals.values
    try:
        tests = [lag_products(z, b, te) for te in folds.test]
        trains = [lag_products(z, b, tr) for tr in folds.train]
    except LagTooLarge as exc:
        raise DegenerateFold(f"fold too short for lag {b}: {exc}") from exc
    if b == 0:
        cells = np.triu(np.ones((t.size, t.size), dtype=bool), k=1)
    else:
        cells = np.triu(np.ones((t.size, t.size), dtype=bool), k=0)

    def score(h):
        out = []
        for zt, mt in zip(tests, trains):
            if b == 0:
                pred = smooth_upper(mt, grid, h, t, strict=True)
                err = pred - zt
            else:
                f = _lag_field(mt, grid, h, t)
                err = (f + f.T) - (zt + zt.T)
            out.append(np.max(np.abs(err[cells])))
        return out

    return _run(candidates, folds, score, f"kernel lag {b}", _bivariate_check(grid, eval_grid))


def pool_cv(results) -> CVResult:
    """Sum fold scores of several CV runs over the same candidates and reselect.

    Used when bandwidths are shared across groups (e.g. months of a season).
    """
    results = list(results)
    if not results:
        raise ValueError("nothing to pool")
    cand = results[0].candidates
    for r in results[1:]:
        if r.candidates.shape != cand.shape or not np.allclose(r.candidates, cand):
            raise ValueError("pooled CV runs must share their candidate grid")
        if r.fold_scores.shape != results[0].fold_scores.shape:
            raise ValueError("pooled CV runs must share their fold count")
    total = np.sum([r.fold_scores for r in results], axis=0)
    failed = {}
    for r in results:
        failed.update(r.failed)
    return _select(cand, total, failed, results[0].name)
