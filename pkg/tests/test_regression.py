import warnings

import numpy as np
import pytest

from switchback.design import AssignmentDesign, ExposureSpec, draw_assignment, lag_weights, normalize
from switchback.dgp import ARPOModel, simulate
from switchback.exceptions import DataError, DesignError, SingularDesignError
from switchback.regression import (
    IllConditionedWarning,
    RegressionSpec,
    build_design,
    estimate,
    ols_no_intercept,
    rescale,
    wls_lag0,
)

from conftest import all_paths


def test_build_design_layouts():
    a, b, c = 2.0, 3.0, 5.0
    np.testing.assert_array_equal(build_design([a, b, c], 1).X, [[b, a], [c, b]])
    np.testing.assert_array_equal(build_design([a, b, c], 1, "interaction").X, [[b, a, b * a], [c, b, c * b]])
    np.testing.assert_array_equal(build_design([a, b, c], 1, "marginal", lag=1).X, [[a], [b]])


def test_ols_exact_cases(rng):
    assert ols_no_intercept(np.array([[1.0], [2.0]]), np.array([2.0, 4.0])).coef == pytest.approx([2.0])
    np.testing.assert_allclose(ols_no_intercept(np.eye(2), np.array([3.0, 7.0])).coef, [3.0, 7.0])
    X = rng.standard_normal((8, 3))
    y = rng.standard_normal(8)
    brute = np.linalg.inv(X.T @ X) @ X.T @ y
    fit = ols_no_intercept(X, y)
    np.testing.assert_allclose(fit.coef, brute, atol=1e-9)
    np.testing.assert_allclose(fit.gram_inverse, np.linalg.inv(X.T @ X), atol=1e-9)


def test_ols_orthogonality(rng):
    for _ in range(20):
        X = rng.standard_normal((50, 4)) * rng.uniform(0.1, 10, 4)
        y = rng.standard_normal(50)
        coef = ols_no_intercept(X, y).coef
        assert np.linalg.norm(X.T @ (y - X @ coef)) <= 1e-8 * np.linalg.norm(X.T @ y)


def test_ols_singular_names_column():
    X = np.column_stack([np.arange(5.0), np.ones(5), 2 * np.arange(5.0)])
    with pytest.raises(SingularDesignError, match="column") as info:
        ols_no_intercept(X, np.ones(5))
    assert info.value.column in (0, 2)


def test_ols_condition_warning():
    X = np.column_stack([np.ones(6), np.ones(6) + 1e-5 * np.arange(6)])
    with pytest.warns(IllConditionedWarning):
        ols_no_intercept(X, np.arange(6.0))


def test_rescale():
    assert rescale([0.125], [0.25]) == pytest.approx([0.5])
    np.testing.assert_array_equal(rescale([0.3, -1.0], [1.0, 1.0]), [0.3, -1.0])
    np.testing.assert_allclose(rescale([0.1, 0.01], [0.25, 0.0625]), [0.4, 0.16])
    with pytest.raises(DesignError):
        rescale([1.0], [0.0])


def test_estimate_noiseless_recovery():
    T = 40
    d = AssignmentDesign.binary(0.5, T=T)
    z = draw_assignment(d, 5)
    zt = normalize(z, d)
    y = 2 * lag_weights(d, 3)[0] * zt
    res = estimate(y, z, d, RegressionSpec(3))
    np.testing.assert_allclose(res.tau_hat, [2, 0, 0, 0], atol=1e-9)
    assert res.n == T - 3 and res.residuals.shape == (T - 3,)


def test_estimate_interaction_and_exposure_noiseless(rng):
    T = 60
    p = rng.uniform(0.3, 0.7, T)
    d = AssignmentDesign.binary(p)
    z = draw_assignment(d, 9)
    zt = normalize(z, d)
    X = build_design(zt, 2, "interaction").X
    coef = np.array([1.0, -0.5, 0.2, 0.3, 0.1])
    y = np.r_[np.zeros(2), X @ coef]
    res = estimate(y, z, d, RegressionSpec(2, "interaction"))
    np.testing.assert_allclose(res.tau_tilde, coef, atol=1e-9)
    ex = estimate(y, z, d, RegressionSpec(2, "exposure", exposure=ExposureSpec.identity(2)))
    full = estimate(y, z, d, RegressionSpec(2))
    np.testing.assert_allclose(ex.tau_hat, full.tau_hat, atol=1e-10)


def test_estimate_ar1_large_T():
    T = 10_000
    d = AssignmentDesign.binary(0.5, T=T)
    model = ARPOModel([0.5], 0.5, 0.0, np.random.default_rng(1).standard_normal(T))
    z = draw_assignment(d, 2)
    res = estimate(simulate(model, z), z, d, RegressionSpec(5))
    truth = 0.5 * 0.5 ** np.arange(6)
    # replication sd of tau_hat_k is about 2.3/sqrt(T) here
    assert np.all(np.abs(res.tau_hat - truth) < 5 * 2.5 / np.sqrt(T))


def test_estimate_input_errors():
    d = AssignmentDesign.binary(0.5, T=5)
    with pytest.raises(DataError):
        estimate(np.ones(4), np.ones(5), d, RegressionSpec(1))
    with pytest.raises(DataError):
        estimate(np.r_[np.ones(4), np.nan], np.ones(5), d, RegressionSpec(1))
    with pytest.raises(DesignError):
        RegressionSpec(2, "marginal", lag=3)
    with pytest.raises(DesignError):
        estimate(np.ones(5), [0, 1, 2, 0, 1], d, RegressionSpec(1))


def test_wls_lag0():
    d = AssignmentDesign.binary([0.5, 0.5])
    assert wls_lag0([1.0, 0.0], [1.0, 0.0], d) == pytest.approx(1.0)
    assert wls_lag0([0.0, 0.0], [1.0, 0.0], d) == 0.0


def test_wls_equals_marginal_under_constant_p(rng):
    for i in range(20):
        T = int(rng.integers(5, 60))
        d = AssignmentDesign.binary(rng.uniform(0.1, 0.9), T=T)
        z = draw_assignment(d, i)
        if z.min() == z.max():
            continue
        y = rng.standard_normal(T)
        marg = estimate(y, z, d, RegressionSpec(0, "marginal", lag=0)).tau_hat[0]
        assert wls_lag0(y, z, d) == pytest.approx(marg, abs=1e-10)


def test_gram_convergence():
    # (T-K)^{-1} X'X approaches W^{-1}
    d_med = []
    for T in (200, 2000, 20000):
        d = AssignmentDesign.binary(0.5, T=T)
        errs = []
        for i in range(200):
            X = build_design(normalize(draw_assignment(d, 4, T, i), d), 2).X
            errs.append(np.linalg.norm(X.T @ X / (T - 2) - np.diag(1 / lag_weights(d, 2))))
        d_med.append(np.median(errs))
    assert d_med[0] > d_med[1] > d_med[2]


def test_location_shift_leaves_design_average_unchanged():
    # adding c to y moves tau_tilde by c (X'X)^{-1} X'1, and X'1 averages to zero
    # over the design, so the population normal equations do not move
    p = np.array([0.3, 0.6, 0.5, 0.4, 0.7, 0.5, 0.45, 0.55])
    d = AssignmentDesign.binary(p)
    paths, probs = all_paths(p)
    shift = np.zeros(2)
    for z, w in zip(paths, probs):
        X = build_design(normalize(z, d), 1).X
        shift += w * (X.T @ np.ones(X.shape[0]))
    np.testing.assert_allclose(shift, 0.0, atol=1e-10)
    z = paths[77]
    y = np.linspace(-1, 1, p.size)
    a = estimate(y, z, d, RegressionSpec(1))
    b = estimate(y + 3.0, z, d, RegressionSpec(1))
    X = a.design.X
    np.testing.assert_allclose(b.tau_tilde - a.tau_tilde, 3.0 * a.gram_inverse @ X.T @ np.ones(X.shape[0]),
                               atol=1e-10)


def test_marginal_and_full_agree_in_expectation_under_orthogonal_truth():
    p = np.full(8, 0.5)
    d = AssignmentDesign.binary(p)
    paths, probs = all_paths(p)
    K, k = 2, 1
    full = marg = 0.0
    for z, w in zip(paths, probs):
        zt = normalize(z, d)
        y = np.r_[np.zeros(K), 0.7 * zt[K - k:8 - k]]
        try:
            estimate(y, z, d, RegressionSpec(K))
        except SingularDesignError:
            continue
        full += w * estimate(y, z, d, RegressionSpec(K)).tau_tilde[k]
        marg += w * estimate(y, z, d, RegressionSpec(K, "marginal", lag=k)).tau_tilde[0]
    assert full == pytest.approx(marg, abs=1e-10)
