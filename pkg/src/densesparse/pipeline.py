"""End-to-end analysis of one (sparse, dense) pair and Monte-Carlo studies.

``analyze`` runs bandwidth selection, the residual-based fit, long-run
kernels for both samples, the multiplier bootstrap and returns uniform bands
for the difference and its centered version together with the integral CI.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from densesparse.bootstrap import (
    MULTIPLIER_KINDS,
    BandResult,
    MultiplierConfig,
    bootstrap_replicates,
    build_band,
    residual_processes,
    studentizing_variance,
    sup_quantile,
)
from densesparse.covkernel import KernelField, lag_bandwidths, long_run_kernel, pooled_variance
from densesparse.cv import (
    cv_delta_bandwidth,
    cv_kernel_bandwidth,
    cv_mean_bandwidth,
    default_candidates,
    make_folds,
)
from densesparse.dgp import OUParams, ScenarioSpec, build_scenario
from densesparse.mean_diff import (
    CurveMatrix,
    DifferenceFit,
    ScalarCI,
    fit_difference,
    integral_ci,
    make_eval_grid,
)

__all__ = [
    "RunConfig",
    "Bandwidths",
    "AnalysisResult",
    "select_bandwidths",
    "analyze",
    "cv_results",
    "run_montecarlo",
    "scenario_specs",
    "MC_COLUMNS",
]


@dataclass(frozen=True)
class RunConfig:
    """Settings of one analysis run.

    Fixed bandwidths are used when ``bandwidth_mode="fixed"``; any of them
    left as ``None`` is then an error.  ``kernel_h`` and ``kernel_h_dense``
    are either a lag-0 bandwidth (later lags follow the ladder
    ``h_b = lag_factor * h_{b-1}``) or a full sequence ``(h_0, ..., h_m)``.
    In CV mode only the lag-0 kernel bandwidth is cross-validated.

    ``regime="sparse_only"`` drops the dense sample from the variance and the
    bootstrap numerator, the limit for ``n`` much smaller than ``n_dense``.
    """

    bandwidth_mode: str = "cv"
    h: float | None = None
    h_dense: float | None = None
    kernel_h: float | tuple | None = None
    kernel_h_dense: float | tuple | None = None
    d: int = 2
    d_dense: int = 2
    alpha: float = 0.05
    n_boot: int = 1000
    multiplier: str = "kappa1"
    m: int = 3
    m_dense: int = 3
    K: int = 5
    g: int = 5
    grid_size: int = 101
    lag_factor: float = 1.1
    seed: int = 0
    candidates: tuple | None = None
    regime: str = "pooled"
    group_column: str = "group"
    cv_groups: dict | None = None

    def __post_init__(self):
        if self.bandwidth_mode not in ("fixed", "cv"):
            raise ValueError("bandwidth_mode must be 'fixed' or 'cv'")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_boot < 100:
            raise ValueError("n_boot must be at least 100")
        if self.grid_size < 3:
            raise ValueError("grid_size must be at least 3")
        if self.regime not in ("pooled", "sparse_only"):
            raise ValueError("regime must be 'pooled' or 'sparse_only'")
        if self.multiplier not in MULTIPLIER_KINDS:
            raise ValueError(f"multiplier must be one of {MULTIPLIER_KINDS}")
        if min(self.m, self.m_dense) < 0:
            raise ValueError("lag counts must be nonnegative")
        if self.bandwidth_mode == "fixed":
            missing = [k for k in ("h", "h_dense", "kernel_h", "kernel_h_dense")
                       if getattr(self, k) is None]
            if missing:
                raise ValueError(f"fixed bandwidth mode needs {', '.join(missing)}")
        for k in ("kernel_h", "kernel_h_dense", "candidates"):
            v = getattr(self, k)
            if isinstance(v, list):
                object.__setattr__(self, k, tuple(v))

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


@dataclass(frozen=True)
class Bandwidths:
    h: float
    h_dense: float
    kernel: tuple
    kernel_dense: tuple
    cv: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "h_dense": self.h_dense,
            "kernel": list(self.kernel),
            "kernel_dense": list(self.kernel_dense),
        }


@dataclass(frozen=True)
class AnalysisResult:
    fit: DifferenceFit
    bandwidths: Bandwidths
    kernel_sparse: KernelField
    kernel_dense: KernelField
    pooled: KernelField
    band: BandResult
    centered_band: BandResult
    integral: ScalarCI
    ratio: float
    config: RunConfig

    @property
    def reject_constant(self) -> bool:
        return bool(self.centered_band.reject_constant)

    def summary(self) -> dict:
        return {
            "n": self.band.n,
            "ratio": self.ratio,
            "quantile": self.band.quantile,
            "quantile_centered": self.centered_band.quantile,
            "reject_constant": self.reject_constant,
            "integral": self.integral.as_dict(),
            "bandwidths": self.bandwidths.as_dict(),
            "lags": {"m": self.config.m, "m_dense": self.config.m_dense},
            "config": self.config.as_dict(),
        }


def _ladder(h, m, factor):
    if np.ndim(h) == 0:
        return lag_bandwidths(float(h), m, factor)
    hs = tuple(map(float, h))
    if len(hs) != m + 1:
        raise ValueError(f"expected {m + 1} kernel bandwidths, got {len(hs)}")
    return hs


def _candidates(config: RunConfig, p: int):
    return np.asarray(config.candidates, dtype=float) if config.candidates else default_candidates(p)


def cv_results(sparse: CurveMatrix, dense: CurveMatrix, config: RunConfig,
               kernels: bool = True) -> dict:
    """All four CV runs; the difference uses the selected dense bandwidth.

    Candidates that cannot be evaluated on the evaluation grid (or, for the
    dense mean, at the sparse design points) are skipped.  ``kernels=False``
    stops after the two mean bandwidths.
    """
    x = make_eval_grid(config.grid_size)
    folds_s = make_folds(sparse.n, config.K, config.g)
    folds_d = make_folds(dense.n, config.K, config.g)
    dense_targets = np.union1d(x, sparse.grid.points)
    out = {"dense_mean": cv_mean_bandwidth(dense, _candidates(config, dense.p), config.d_dense,
                                           folds_d, dense_targets)}
    out["difference"] = cv_delta_bandwidth(sparse, dense, out["dense_mean"].selected,
                                           _candidates(config, sparse.p), config.d, config.d_dense,
                                           folds_s, x)
    if not kernels:
        return out
    out["kernel_sparse"] = cv_kernel_bandwidth(sparse, 0, _candidates(config, sparse.p), folds_s, x)
    out["kernel_dense"] = cv_kernel_bandwidth(dense, 0, _candidates(config, dense.p), folds_d, x)
    return out


def select_bandwidths(sparse: CurveMatrix, dense: CurveMatrix, config: RunConfig,
                      cv: dict | None = None) -> Bandwidths:
    """Resolve every bandwidth, either from the config or by CV.

    A precomputed ``cv`` mapping (as returned by :func:`cv_results`, possibly
    pooled over groups) skips the CV runs.
    """
    if config.bandwidth_mode == "fixed":
        return Bandwidths(float(config.h), float(config.h_dense),
                          _ladder(config.kernel_h, config.m, config.lag_factor),
                          _ladder(config.kernel_h_dense, config.m_dense, config.lag_factor))
    cv = cv_results(sparse, dense, config) if cv is None else cv
    return Bandwidths(
        cv["difference"].selected,
        cv["dense_mean"].selected,
        _ladder(cv["kernel_sparse"].selected, config.m, config.lag_factor),
        _ladder(cv["kernel_dense"].selected, config.m_dense, config.lag_factor),
        cv,
    )


def analyze(sparse: CurveMatrix, dense: CurveMatrix, config: RunConfig | None = None,
            bandwidths: Bandwidths | None = None) -> AnalysisResult:
    """Bands for ``delta`` and its centered version, the constant test and the integral CI."""
    config = RunConfig() if config is None else config
    bw = select_bandwidths(sparse, dense, config) if bandwidths is None else bandwidths
    x = make_eval_grid(config.grid_size)
    ratio = sparse.n / dense.n if config.regime == "pooled" else 0.0

    fit = fit_difference(sparse, dense, bw.h, bw.h_dense, config.d, config.d_dense, x)
    gs = long_run_kernel(sparse, config.m, bw.kernel, x)
    gd = long_run_kernel(dense, config.m_dense, bw.kernel_dense, x)
    pooled = pooled_variance(gs, gd, ratio)
    res = residual_processes(sparse, dense, fit)
    mult = MultiplierConfig(config.multiplier, config.seed)

    bands = {}
    for centered in (False, True):
        var = studentizing_variance(pooled, centered)
        reps = bootstrap_replicates(res, var, ratio, mult, config.n_boot, centered)
        qt = sup_quantile(reps, config.alpha)
        est = fit.centered if centered else fit.delta
        bands[centered] = build_band(est, var, qt, sparse.n, config.alpha, centered)

    ci = integral_ci(fit.delta, pooled, sparse.n, 1 - config.alpha)
    return AnalysisResult(fit, bw, gs, gd, pooled, bands[False], bands[True], ci, ratio, config)


MC_COLUMNS = [
    "n", "p", "n_dense", "p_dense", "scenario", "reps", "coverage", "coverage_uncentered",
    "rejection_rate", "integral_coverage", "mean_sup_error", "mean_h", "mean_h_dense",
    "mean_kernel_h", "mean_kernel_h_dense", "failures",
]


def run_montecarlo(specs, reps: int, config: RunConfig, seed: int,
                   params: OUParams | None = None) -> pd.DataFrame:
    """Coverage and rejection rates over ``reps`` simulated data sets per spec.

    Replicate ``r`` of spec ``k`` uses data seed ``SeedSequence([seed, k, r])``
    and bootstrap seed derived from the same triple, so each row is
    reproducible on its own.  Coverage refers to the centered band (truth
    ``Delta``); ``coverage_uncentered`` to the band for ``delta``.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    params = OUParams() if params is None else params
    rows = []
    for k, spec in enumerate(specs):
        cov, cov_u, rej, icov, err, hs, hds, khs, khds = ([] for _ in range(9))
        failures = 0
        for r in range(reps):
            ss = np.random.SeedSequence([int(seed), k, r])
            sc = build_scenario(spec, params, ss, make_eval_grid(config.grid_size))
            boot_seed = int(ss.generate_state(1)[0])
            try:
                out = analyze(sc.sparse, sc.dense, config.replace(seed=boot_seed))
            except (ValueError, ArithmeticError):
                failures += 1
                continue
            cov.append(out.centered_band.covers(sc.truth["centered"]))
            cov_u.append(out.band.covers(sc.truth["delta"]))
            rej.append(out.reject_constant)
            icov.append(out.integral.covers(sc.truth["integral"]))
            err.append(out.fit.delta.sup_error(sc.truth["delta"]))
            hs.append(out.bandwidths.h)
            hds.append(out.bandwidths.h_dense)
            khs.append(out.bandwidths.kernel[0])
            khds.append(out.bandwidths.kernel_dense[0])
        mean = (lambda v: float(np.mean(v)) if v else float("nan"))
        rows.append({
            "n": spec.n, "p": spec.p, "n_dense": spec.n_dense, "p_dense": spec.p_dense,
            "scenario": spec.kind, "reps": reps - failures,
            "coverage": mean(cov), "coverage_uncentered": mean(cov_u),
            "rejection_rate": mean(rej), "integral_coverage": mean(icov),
            "mean_sup_error": mean(err), "mean_h": mean(hs), "mean_h_dense": mean(hds),
            "mean_kernel_h": mean(khs), "mean_kernel_h_dense": mean(khds),
            "failures": failures,
        })
    return pd.DataFrame(rows, columns=MC_COLUMNS)


def scenario_specs(ns, p, n_dense, p_dense, kinds=("null",)) -> list:
    """Cartesian product helper; ``n_dense`` may be a callable of ``n``."""
    out = []
    for kind in kinds:
        for n in ns:
            nd = n_dense(n) if callable(n_dense) else n_dense
            out.append(ScenarioSpec(int(n), int(p), int(nd), int(p_dense), kind))
    return out
