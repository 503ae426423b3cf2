import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchback.design import (
    AssignmentDesign,
    ExposureSpec,
    Sampler,
    draw_assignment,
    draw_assignments,
    exposure_moments,
    exposure_transform,
    generalized_weights,
    interaction_weights,
    lag_weights,
    normalize,
)
from switchback.exceptions import DesignError

from conftest import all_paths


def test_normalize_symmetric_p():
    d = AssignmentDesign.binary(0.5, T=1)
    assert normalize([1.0], d)[0] == 2.0


def test_normalize_skewed_p():
    d = AssignmentDesign.binary(0.8, T=1)
    assert normalize([0.0], d)[0] == pytest.approx(-5.0, abs=1e-12)


def test_normalize_continuous_unit_variance():
    d = AssignmentDesign.continuous(means=[0.0], variances=[1.0])
    assert normalize([1.5], d)[0] == 1.5


def test_normalize_round_trip(rng):
    p = rng.uniform(0.05, 0.95, 50)
    d = AssignmentDesign.binary(p)
    z = (rng.random(50) < p).astype(float)
    back = normalize(z, d) * d.variances + d.means
    np.testing.assert_allclose(back, z, rtol=1e-12, atol=1e-12)


def test_lag_weights_constant():
    d = AssignmentDesign.binary(0.5, T=20)
    np.testing.assert_array_equal(lag_weights(d, 4), np.full(5, 0.25))


def test_lag_weights_hand_example():
    d = AssignmentDesign.binary([0.5, 0.8, 0.5])
    w = lag_weights(d, 1)
    assert w[0] == pytest.approx(2 / (1 / 0.16 + 1 / 0.25), abs=1e-10)
    assert w[1] == pytest.approx(0.1951219512, abs=1e-10)


def test_interaction_weights():
    assert interaction_weights(AssignmentDesign.binary(0.5, T=10), 3) == pytest.approx([0.0625] * 3)
    assert interaction_weights(AssignmentDesign.binary([0.5, 0.8, 0.5]), 1)[0] == pytest.approx(0.04)
    assert interaction_weights(AssignmentDesign.binary(0.2, T=6), 2) == pytest.approx([0.0256] * 2)


def test_generalized_weights():
    d = AssignmentDesign.binary(0.5, T=12)
    np.testing.assert_array_equal(generalized_weights(d, np.ones(10), 2), lag_weights(d, 2))
    assert generalized_weights(d, np.full(10, 2.0), 2) == pytest.approx([0.0625] * 3)
    h = np.r_[np.ones(5), np.zeros(5)]
    # only the first half contributes: (1/10 * 5 * 4)^-1
    assert generalized_weights(d, h, 2) == pytest.approx([0.5] * 3)


def test_generalized_weights_time_varying_matches_hand():
    p = np.array([0.3, 0.5, 0.6, 0.4, 0.7])
    d = AssignmentDesign.binary(p)
    h = np.array([1.0, 2.0, 0.5])
    v = p * (1 - p)
    expected = [1 / np.mean(h**2 / v[2 - k:5 - k]) for k in range(3)]
    np.testing.assert_allclose(generalized_weights(d, h, 2), expected, rtol=1e-14)


def test_overlap_rejected():
    with pytest.raises(DesignError, match="overlap"):
        AssignmentDesign.binary([0.5, 1.0])
    with pytest.raises(DesignError):
        AssignmentDesign.binary(0.005, T=3)
    AssignmentDesign.binary(0.005, T=3, epsilon=0.001)


def test_continuous_variance_floor_and_sampler_moments():
    with pytest.raises(DesignError, match="floor"):
        AssignmentDesign.continuous(means=[0.0], variances=[1e-9])
    with pytest.raises(DesignError, match="moments"):
        AssignmentDesign.continuous(means=[0.0], variances=[2.0], samplers=[Sampler("normal", (0.0, 1.0))])


def test_draw_deterministic():
    d = AssignmentDesign.binary(0.3, T=200)
    np.testing.assert_array_equal(draw_assignment(d, 7, 3), draw_assignment(d, 7, 3))
    assert not np.array_equal(draw_assignment(d, 7, 3), draw_assignment(d, 7, 4))
    stack = draw_assignments(d, 7, [3, 4])
    np.testing.assert_array_equal(stack[1], draw_assignment(d, 7, 4))


def test_draw_mean_band():
    d = AssignmentDesign.binary(0.5, T=100_000)
    assert 0.494 <= draw_assignment(d, 1).mean() <= 0.506


def test_normalized_draws_are_centered():
    p = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    d = AssignmentDesign.binary(p)
    N = 100_000
    zt = normalize(draw_assignments(d, 3, np.arange(N)), d)
    bound = 4 * np.sqrt(1 / d.variances / N)
    assert np.all(np.abs(zt.mean(axis=0)) <= bound)


@pytest.mark.parametrize("sampler", [Sampler("uniform", (-1.0, 2.0)), Sampler("normal", (0.5, 2.0)),
                                     Sampler("two_point", (0.0, 3.0, 0.25))])
def test_continuous_samplers_match_declared_moments(sampler):
    d = AssignmentDesign.continuous(samplers=sampler, T=200_000)
    z = draw_assignment(d, 11)
    assert z.mean() == pytest.approx(sampler.mean, abs=5 * np.sqrt(sampler.variance / z.size))
    assert z.var() == pytest.approx(sampler.variance, rel=0.02)


def test_exposure_identity_reduces_to_lags(rng):
    p = rng.uniform(0.2, 0.8, 15)
    d = AssignmentDesign.binary(p)
    z = (rng.random(15) < p).astype(float)
    K = 3
    gt, w = exposure_transform(z, d, ExposureSpec.identity(K))
    zt = normalize(z, d)
    lagged = np.stack([zt[K - k:15 - k] for k in range(K + 1)], axis=1)
    np.testing.assert_allclose(gt, lagged, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(w, lag_weights(d, K), rtol=1e-12)


@pytest.mark.parametrize("f, mean", [(lambda b: b[0] & b[1], 0.25), (lambda b: b[0] | b[1], 0.75)])
def test_exposure_and_or_moments(f, mean):
    d = AssignmentDesign.binary(0.5, T=8)
    spec = ExposureSpec.from_function([0, 2], [lambda b: b[0], f])
    means, var = exposure_moments(d, spec)
    np.testing.assert_allclose(means[:, 1], mean)
    np.testing.assert_allclose(var[:, 1], 0.1875)
    _, w = exposure_transform(np.zeros(8), d, spec)
    assert w[1] == pytest.approx(0.1875)


def test_exposure_moments_match_enumeration(rng):
    T = 7
    p = rng.uniform(0.2, 0.8, T)
    d = AssignmentDesign.binary(p)
    spec = ExposureSpec.from_function([1, 4], [lambda b: b[0] ^ b[1], lambda b: int(sum(b) >= 2)])
    means, _ = exposure_moments(d, spec)
    paths, probs = all_paths(p)
    # enumerate by direct evaluation of the block functions on full paths
    for i, t in enumerate(range(spec.K + 1, T + 1)):
        g0 = np.logical_xor(paths[:, t - 1], paths[:, t - 2]).astype(float)
        g1 = (paths[:, t - 3] + paths[:, t - 4] + paths[:, t - 5] >= 2).astype(float)
        assert means[i, 0] == pytest.approx(probs @ g0, abs=1e-12)
        assert means[i, 1] == pytest.approx(probs @ g1, abs=1e-12)


def test_exposure_width_cap():
    with pytest.raises(DesignError, match="cap"):
        ExposureSpec.from_function([20], [lambda b: b[0]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=4, max_size=30), st.integers(0, 3))
def test_lag_weights_bounded_by_variances(p, K):
    d = AssignmentDesign.binary(p)
    if K >= d.T:
        return
    w = lag_weights(d, K)
    # a harmonic mean lies between the extremes
    assert np.all(w >= d.variances.min() - 1e-15)
    assert np.all(w <= d.variances.max() + 1e-15)
