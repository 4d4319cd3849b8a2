"""Ornstein-Uhlenbeck simulation design with serially correlated curves.

Each curve is a stationary OU process on ``[0, 1]``.  The Brownian motions
driving consecutive curves are correlated, ``Cov(B_i(t), B_{i+b}(s)) =
rho^b min(t, s)``, while the starting values are independent across curves.
This gives the lagged kernels

    Gamma(t, s; b) = sigma^2 / (2 theta) * (rho^|b| (exp(-theta|t-s|) - exp(-theta(t+s)))
                                            + 1{b = 0} exp(-theta(t+s)))

Simulation is exact on the grid: the OU transition over each grid step is
Gaussian, and the step innovations follow an AR(1) recursion across curves.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from densesparse.covkernel import bartlett_weights
from densesparse.mean_diff import CurveMatrix, make_eval_grid, trapezoid_weights
from densesparse.weights import DesignGrid

__all__ = [
    "OUParams",
    "ScenarioSpec",
    "Scenario",
    "mu_sparse",
    "delta_null",
    "delta_alternative",
    "simulate_sample",
    "simulate_cholesky",
    "analytic_kernel",
    "analytic_longrun",
    "build_scenario",
]


@dataclass(frozen=True)
class OUParams:
    theta: float = 1.0
    sigma: float = 4.0
    rho: float = 0.5
    noise_sd: float = 0.1

    def __post_init__(self):
        if self.theta <= 0 or self.sigma <= 0:
            raise ValueError("theta and sigma must be positive")
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")

    @property
    def stationary_variance(self) -> float:
        return self.sigma**2 / (2 * self.theta)


def mu_sparse(t):
    """``3 sin(1.5 pi (2t - 1)) exp(-2 |2t - 1|)``."""
    x = 2 * np.asarray(t, dtype=float) - 1
    return 3 * np.sin(1.5 * np.pi * x) * np.exp(-2 * np.abs(x))


def delta_null(t):
    return np.full_like(np.asarray(t, dtype=float), 2.0)


def delta_alternative(t):
    """``2 - sin(pi (2t - 1)) exp(-2 |2t - 1|)``."""
    x = 2 * np.asarray(t, dtype=float) - 1
    return 2 - np.sin(np.pi * x) * np.exp(-2 * np.abs(x))


_DELTAS = {"null": delta_null, "alternative": delta_alternative}


def analytic_kernel(params: OUParams, t, s, b: int = 0):
    """Closed-form lag-``b`` kernel ``E[Z_i(t) Z_{i+b}(s)]``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    th = params.theta
    near = np.exp(-th * np.abs(t - s))
    start = np.exp(-th * (t + s))
    out = params.rho ** abs(b) * (near - start)
    if b == 0:
        out = out + start
    return params.stationary_variance * out


def analytic_longrun(params: OUParams, t, s, m: int | None = None, bartlett: bool = True):
    """Long-run kernel ``sum_b Gamma(t, s; b)``.

    ``m=None`` sums all lags (geometric series).  A finite ``m`` truncates at
    lag ``m``; with ``bartlett`` the lags carry the weights ``1 - b/(m+1)``
    used by the estimator.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    rho = params.rho
    if m is None:
        factor = 1 + 2 * rho / (1 - rho)
    else:
        w = bartlett_weights(m) if bartlett else np.ones(m)
        factor = 1 + 2 * float(np.sum(w * rho ** np.arange(1, m + 1)))
    th = params.theta
    near = np.exp(-th * np.abs(t - s))
    start = np.exp(-th * (t + s))
    return params.stationary_variance * (factor * (near - start) + start)


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def simulate_sample(params: OUParams, n: int, grid, mean_fn: Callable | None = None,
                    seed=None, label: str = "sparse") -> CurveMatrix:
    """Draw ``n`` consecutive curves observed on ``grid`` with additive noise."""
    grid = grid if isinstance(grid, DesignGrid) else DesignGrid(grid)
    rng = _as_rng(seed)
    t = grid.points
    th, rho = params.theta, params.rho
    steps = np.diff(np.concatenate([[0.0], t]))
    decay = np.exp(-th * steps)
    step_sd = np.sqrt(params.stationary_variance * (1 - decay**2))

    z0 = rng.standard_normal(n) * np.sqrt(params.stationary_variance)
    fresh = rng.standard_normal((n, t.size))
    c = np.sqrt(1 - rho**2)
    fresh[0] /= c
    innov = lfilter([c], [1.0, -rho], fresh, axis=0) * step_sd

    z = np.empty((n, t.size))
    prev = z0
    for j in range(t.size):
        prev = decay[j] * prev + innov[:, j]
        z[:, j] = prev
    if mean_fn is not None:
        z += mean_fn(t)[None, :]
    if params.noise_sd > 0:
        z += params.noise_sd * rng.standard_normal((n, t.size))
    return CurveMatrix(z, grid, label)


def simulate_cholesky(params: OUParams, n: int, grid, seed=None, jitter: float = 1e-10):
    """Reference sampler: factorize the full ``(n p) x (n p)`` covariance.

    Only meant for small ``n * p``; returns the noiseless, zero-mean process
    values as an ``(n, p)`` array.
    """
    from densesparse.exceptions import NonPositiveDefinite

    grid = grid if isinstance(grid, DesignGrid) else DesignGrid(grid)
    t = grid.points
    p = t.size
    cov = np.empty((n * p, n * p))
    for i in range(n):
        for k in range(n):
            cov[i * p:(i + 1) * p, k * p:(k + 1) * p] = analytic_kernel(
                params, t[:, None], t[None, :], k - i
            )
    cov[np.diag_indices_from(cov)] += jitter
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefinite(str(exc)) from exc
    rng = _as_rng(seed)
    return (chol @ rng.standard_normal(n * p)).reshape(n, p)


@dataclass(frozen=True)
class ScenarioSpec:
    """Sample sizes and mean design of one simulation cell."""

    n: int
    p: int
    n_dense: int
    p_dense: int
    kind: str = "null"

    def __post_init__(self):
        if self.kind not in _DELTAS:
            raise ValueError(f"kind must be one of {sorted(_DELTAS)}")
        if min(self.n, self.p, self.n_dense, self.p_dense) < 2:
            raise ValueError("sample and grid sizes must be at least 2")
        if not 0 < self.ratio <= 1:
            raise ValueError("n / n_dense must lie in (0, 1]")

    @property
    def ratio(self) -> float:
        return self.n / self.n_dense

    @property
    def delta(self) -> Callable:
        return _DELTAS[self.kind]

    def mu_sparse(self, t):
        return mu_sparse(t)

    def mu_dense(self, t):
        return mu_sparse(t) - self.delta(t)


@dataclass(frozen=True)
class Scenario:
    spec: ScenarioSpec
    params: OUParams
    sparse: CurveMatrix
    dense: CurveMatrix
    eval_grid: np.ndarray
    truth: dict = field(repr=False)


def build_scenario(spec: ScenarioSpec, params: OUParams | None = None, seed=None,
                   eval_grid=None) -> Scenario:
    """Simulate independent sparse and dense samples on midpoint grids."""
    params = OUParams() if params is None else params
    x = make_eval_grid() if eval_grid is None else np.asarray(eval_grid, dtype=float)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seed_s, seed_d = ss.spawn(2)
    sparse = simulate_sample(params, spec.n, DesignGrid.midpoints(spec.p), spec.mu_sparse,
                             np.random.default_rng(seed_s), "sparse")
    dense = simulate_sample(params, spec.n_dense, DesignGrid.midpoints(spec.p_dense),
                            spec.mu_dense, np.random.default_rng(seed_d), "dense")
    delta = spec.delta(x)
    centered = delta - trapezoid_weights(x) @ delta / (x[-1] - x[0])
    truth = {
        "delta": delta,
        "centered": centered,
        "mu_sparse": spec.mu_sparse(x),
        "mu_dense": spec.mu_dense(x),
        "integral": float(trapezoid_weights(x) @ delta),
    }
    return Scenario(spec, params, sparse, dense, x, truth)
