import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from densesparse.covkernel import (
    KernelField,
    bartlett_weights,
    correlation,
    cov_kernel,
    lag_bandwidths,
    lag_products,
    lagged_kernel,
    long_run_kernel,
    pooled_variance,
    project_center,
)
from densesparse.dgp import OUParams, analytic_kernel, simulate_sample
from densesparse.exceptions import DegenerateVariance, GridMismatch, LagTooLarge
from densesparse.mean_diff import CurveMatrix, make_eval_grid
from densesparse.weights import DesignGrid

X = make_eval_grid(21)
FINE = make_eval_grid(101)


def brute_lag_products(y, b):
    n, p = y.shape
    ybar = y.mean(axis=0)
    m = np.zeros((p, p))
    for i in range(n - b):
        m += np.outer(y[i], y[i + b]) - np.outer(ybar, ybar)
    return m / (n - 1)


def test_lag_products_oracle(rng):
    y = rng.normal(size=(9, 5))
    for b in (0, 1, 3):
        np.testing.assert_allclose(lag_products(y, b), brute_lag_products(y, b), atol=1e-12)
    np.testing.assert_allclose(lag_products(y, -2), lag_products(y, 2).T)
    np.testing.assert_allclose(lag_products(y, 0), np.cov(y, rowvar=False), atol=1e-12)


def test_lag_products_on_rows(rng):
    y = rng.normal(size=(12, 4))
    rows = [0, 1, 2, 7, 8, 9, 10]
    # pairs must be consecutive inside the row set: (0,1),(1,2),(7,8),(8,9),(9,10)
    sub = y[rows]
    ybar = sub.mean(axis=0)
    pairs = [(0, 1), (1, 2), (7, 8), (8, 9), (9, 10)]
    ref = sum(np.outer(y[i], y[k]) for i, k in pairs) - len(pairs) * np.outer(ybar, ybar)
    np.testing.assert_allclose(lag_products(y, 1, rows), ref / (len(rows) - 1), atol=1e-12)
    with pytest.raises(LagTooLarge):
        lag_products(y, 5, [0, 1, 2, 3])


def test_curve_constant_data_gives_sample_variance():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    sample = CurveMatrix(np.tile(a[:, None], (1, 30)), DesignGrid.midpoints(30))
    f = cov_kernel(sample, 0.3, X)
    np.testing.assert_allclose(f.values, 5 / 3, atol=1e-10)
    same = CurveMatrix(np.tile(np.linspace(0, 1, 30), (2, 1)), DesignGrid.midpoints(30))
    np.testing.assert_allclose(cov_kernel(same, 0.3, X).values, 0, atol=1e-12)


def test_too_few_curves():
    with pytest.raises(LagTooLarge):
        cov_kernel(CurveMatrix(np.zeros((1, 10)), DesignGrid.midpoints(10)), 0.3, X)
    s = CurveMatrix(np.random.default_rng(0).normal(size=(3, 10)), DesignGrid.midpoints(10))
    with pytest.raises(LagTooLarge):
        lagged_kernel(s, 2, 0.4, X)
    with pytest.raises(LagTooLarge):
        long_run_kernel(s, 2, 0.4, X)


@given(seed=st.integers(0, 2**32 - 1), h=st.floats(0.15, 0.8))
def test_lag0_and_longrun_are_symmetric(seed, h):
    r = np.random.default_rng(seed)
    s = CurveMatrix(r.normal(size=(15, 20)), DesignGrid.midpoints(20))
    assert cov_kernel(s, h, X).is_symmetric(1e-10)
    assert long_run_kernel(s, 2, h, X).is_symmetric(1e-10)


def test_longrun_m0_is_cov_kernel(rng):
    s = CurveMatrix(rng.normal(size=(20, 25)), DesignGrid.midpoints(25))
    assert np.array_equal(long_run_kernel(s, 0, 0.3, X).values, cov_kernel(s, 0.3, X).values)


def test_longrun_weighted_sum(rng):
    s = CurveMatrix(rng.normal(size=(30, 25)), DesignGrid.midpoints(25))
    hs = (0.3, 0.33, 0.36, 0.4)
    ref = cov_kernel(s, hs[0], X).values.copy()
    for b, w in zip((1, 2, 3), (0.75, 0.5, 0.25)):
        f = lagged_kernel(s, b, hs[b], X).values
        ref += w * (f + f.T)
    np.testing.assert_allclose(long_run_kernel(s, 3, hs, X).values, ref, atol=1e-12)
    with pytest.raises(ValueError):
        long_run_kernel(s, 3, (0.3, 0.3), X)


def test_bartlett_and_ladder():
    np.testing.assert_allclose(bartlett_weights(3), [0.75, 0.5, 0.25])
    np.testing.assert_allclose(lag_bandwidths(0.5, 2), [0.5, 0.55, 0.605])


def test_lagged_kernel_negative_lag_transposes(rng):
    s = CurveMatrix(rng.normal(size=(25, 20)), DesignGrid.midpoints(20))
    a = lagged_kernel(s, 2, 0.35, X).values
    b = lagged_kernel(s, -2, 0.35, X).values
    np.testing.assert_allclose(a, b.T, atol=1e-12)
    with pytest.raises(ValueError):
        lagged_kernel(s, 0, 0.35, X)


# Monte-Carlo oracles against the closed-form OU kernels; SE of one cell is
# about 0.25 with 2000 curves, tolerances are 4 SE at a fixed seed.

@pytest.fixture(scope="module")
def ou_indep():
    return simulate_sample(OUParams(rho=0.0, noise_sd=0.0), 2000, DesignGrid.midpoints(50), seed=11)


@pytest.fixture(scope="module")
def ou_dep():
    return simulate_sample(OUParams(noise_sd=0.0), 2000, DesignGrid.midpoints(50), seed=12)


def test_lag0_value_against_closed_form(ou_indep):
    g = np.array([0.3, 0.7])
    got = cov_kernel(ou_indep, 0.1, g).values[0, 1]
    assert got == pytest.approx(8 * np.exp(-0.4), abs=1.0)


def test_lag1_independent_curves_is_flat(ou_indep):
    f = lagged_kernel(ou_indep, 1, 0.15, X)
    assert np.max(np.abs(f.values)) < 1.0


def test_lag1_values(ou_dep):
    g = np.array([0.0, 0.5])
    f = lagged_kernel(ou_dep, 1, 0.1, g).values
    assert f[0, 0] == pytest.approx(0.0, abs=1.0)
    assert f[1, 1] == pytest.approx(8 * 0.5 * (1 - np.exp(-1)), abs=1.0)
    assert 8 * 0.5 * (1 - np.exp(-1)) == pytest.approx(analytic_kernel(OUParams(), 0.5, 0.5, 1))


def test_longrun_diagonal_exceeds_lag0(ou_dep):
    lag0 = cov_kernel(ou_dep, 0.2, X).diagonal
    lr = long_run_kernel(ou_dep, 3, 0.2, X).diagonal
    assert np.all(lr[1:] > lag0[1:])


def test_error_shrinks_with_n():
    par = OUParams(noise_sd=0.0)
    truth = analytic_kernel(par, X[:, None], X[None, :], 0)
    errs = {}
    for n in (500, 2000):
        e = []
        for seed in range(3):
            s = simulate_sample(par, n, DesignGrid.midpoints(50), seed=seed)
            e.append(np.max(np.abs(cov_kernel(s, 0.15, X).values - truth)))
        errs[n] = np.median(e)
    assert errs[2000] < 3 * errs[500]
    assert errs[2000] < errs[500]


def test_pooled_variance():
    a = KernelField(X, np.ones((21, 21)))
    b = KernelField(X, np.full((21, 21), 2.0))
    np.testing.assert_array_equal(pooled_variance(a, b, 0).values, a.values)
    np.testing.assert_array_equal(pooled_variance(a, b, 1).values, 3.0)
    np.testing.assert_allclose(pooled_variance(a, b, 5 / 6).values, 1 + 10 / 6)
    with pytest.raises(GridMismatch):
        pooled_variance(a, KernelField(X[:5], np.ones((5, 5))), 1)
    with pytest.raises(ValueError):
        pooled_variance(a, b, -1)


def test_projection_examples():
    t, s = np.meshgrid(FINE, FINE, indexing="ij")
    np.testing.assert_allclose(project_center(KernelField(FINE, np.full((101, 101), 3.0))).values,
                               0, atol=1e-12)
    np.testing.assert_allclose(project_center(KernelField(FINE, t + s)).values, 0, atol=1e-8)
    np.testing.assert_allclose(project_center(KernelField(FINE, t * s)).values,
                               (t - 0.5) * (s - 0.5), atol=1e-6)


@given(seed=st.integers(0, 2**32 - 1))
def test_projection_idempotent_and_annihilates_separable(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(2, 21))
    sep = KernelField(X, a[:, None] + b[None, :])
    assert np.max(np.abs(project_center(sep).values)) < 1e-6
    m = r.normal(size=(21, 21))
    f = KernelField(X, m + m.T)
    once = project_center(f)
    np.testing.assert_allclose(project_center(once).values, once.values, atol=1e-8)


def test_correlation():
    g = np.exp(X)
    f = KernelField(X, np.outer(g, g))
    np.testing.assert_allclose(correlation(f).values, 1.0, atol=1e-12)
    m = np.full((21, 21), 0.5)
    np.fill_diagonal(m, 2.0)
    np.testing.assert_allclose(correlation(KernelField(X, m)).values[0, 1], 0.25)
    par = OUParams()
    k = analytic_kernel(par, FINE[:, None], FINE[None, :], 0)
    c = correlation(KernelField(FINE, k)).values
    np.testing.assert_allclose(c, np.exp(-np.abs(FINE[:, None] - FINE[None, :])), atol=1e-12)
    with pytest.raises(DegenerateVariance):
        correlation(KernelField(X, np.zeros((21, 21))))


def test_kernel_field_frame(tmp_path):
    f = KernelField(X[:3], np.arange(9.0).reshape(3, 3))
    df = f.to_frame()
    assert list(df.columns) == ["t", "s", "value"]
    assert df.iloc[1].tolist() == [0.0, 0.05, 1.0]
    f.to_csv(tmp_path / "k.csv")
    assert (tmp_path / "k.csv").read_text().startswith("t,s,value\n")
    with pytest.raises(ValueError):
        KernelField(X, np.full((21, 21), np.nan))
