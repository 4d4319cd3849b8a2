"""Two-sample inference for functional data observed on a dense and a sparse grid.

The difference of the two mean functions is estimated from the sparse
residuals after subtracting the smoothed dense mean.  Uniform confidence
bands and a test for a constant difference come from a dependent multiplier
bootstrap studentized by long-run covariance kernels.
"""
from densesparse.bootstrap import BandResult, MultiplierConfig
from densesparse.covkernel import KernelField, cov_kernel, long_run_kernel
from densesparse.dataio import GroupedDataset, ingest
from densesparse.dgp import OUParams, ScenarioSpec, build_scenario
from densesparse.exceptions import DenseSparseError
from densesparse.mean_diff import (
    CurveEstimate,
    CurveMatrix,
    fit_difference,
    make_eval_grid,
    naive_difference,
)
from densesparse.pipeline import AnalysisResult, RunConfig, analyze, run_montecarlo
from densesparse.weights import DesignGrid, local_poly_weights

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult",
    "BandResult",
    "CurveEstimate",
    "CurveMatrix",
    "DenseSparseError",
    "DesignGrid",
    "GroupedDataset",
    "KernelField",
    "MultiplierConfig",
    "OUParams",
    "RunConfig",
    "ScenarioSpec",
    "analyze",
    "build_scenario",
    "cov_kernel",
    "fit_difference",
    "ingest",
    "local_poly_weights",
    "long_run_kernel",
    "make_eval_grid",
    "naive_difference",
    "run_montecarlo",
]
