import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bayesbench.exceptions import ConfigurationError, DegenerateUpdateError
from bayesbench.particles import (
    ParticleCloud,
    bayes_update,
    effective_sample_size,
    init_uniform_prior,
    liu_west_resample,
    summarize,
)
from bayesbench.probes import ProbeModel, SingleQubitModel, get_model

TWO_PI = 2 * np.pi
qubit = SingleQubitModel()


class ZeroModel(ProbeModel):
    model_id = "zero"
    parameter_count = 1
    outcome_count = 2

    def outcome_probabilities(self, psi):
        psi = np.asarray(psi, dtype=float)[..., 0]
        return np.stack([np.zeros_like(psi), np.ones_like(psi)], axis=-1)


def cloud_of(positions, weights=None, **kw):
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
    if weights is None:
        weights = np.full(len(positions), 1.0 / len(positions))
    return ParticleCloud(positions, np.asarray(weights, dtype=float), **kw)


def test_uniform_prior_basic():
    cloud = init_uniform_prior(4, 1, 0)
    assert cloud.positions.shape == (4, 1)
    np.testing.assert_array_equal(cloud.weights, 0.25)
    assert effective_sample_size(cloud) == pytest.approx(4.0)
    assert np.all((cloud.positions >= 0) & (cloud.positions < TWO_PI))


def test_uniform_prior_seeded():
    a = init_uniform_prior(50, 3, 123)
    b = init_uniform_prior(50, 3, 123)
    np.testing.assert_array_equal(a.positions, b.positions)


@pytest.mark.parametrize("n", [0, 1])
def test_uniform_prior_rejects_small_n(n):
    with pytest.raises(ConfigurationError):
        init_uniform_prior(n, 1, 0)


def test_update_eliminates_zero_likelihood_particle():
    # cos^2(pi/2) vanishes up to rounding
    cloud = bayes_update(cloud_of([np.pi, 0.0]), qubit, 0, [0.0])
    np.testing.assert_allclose(cloud.weights, [0.0, 1.0], atol=1e-30)


def test_update_with_constant_likelihood_keeps_weights():
    w = np.array([0.2, 0.5, 0.3])
    cloud = cloud_of([0.7, TWO_PI - 0.7, 0.7], w)
    updated = bayes_update(cloud, qubit, 1, [0.0])
    np.testing.assert_allclose(updated.weights, w, atol=1e-15)


def test_update_by_hand():
    pos = [0.0, np.pi / 2, 2.0]
    w = [0.5, 0.3, 0.2]
    theta = 0.4
    like = [np.sin((x + theta) / 2) ** 2 for x in pos]
    raw = [wi * li for wi, li in zip(w, like)]
    expected = [r / sum(raw) for r in raw]
    cloud = bayes_update(cloud_of(pos, w), qubit, 1, [theta])
    np.testing.assert_allclose(cloud.weights, expected, rtol=1e-14)
    np.testing.assert_array_equal(cloud.positions[:, 0], pos)


def test_update_underflow_raises():
    with pytest.raises(DegenerateUpdateError):
        bayes_update(cloud_of([0.1, 0.2, 0.3]), ZeroModel(), 0, [0.0])


def test_update_commutes_with_weight_scaling():
    rng = np.random.default_rng(4)
    pos = rng.uniform(0, TWO_PI, (30, 2))
    raw = rng.uniform(0.1, 1.0, 30)
    model = get_model("fourier_p2")
    a = bayes_update(ParticleCloud(pos, raw * 17.0), model, 3, [0.5, 1.5])
    b = bayes_update(ParticleCloud(pos, raw / raw.sum()), model, 3, [0.5, 1.5])
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-13)


@pytest.mark.parametrize(
    "weights, expected",
    [([0.25] * 4, 4.0), ([1.0, 0.0, 0.0], 1.0), ([0.5, 0.5, 0.0, 0.0, 0.0], 2.0)],
)
def test_effective_sample_size(weights, expected):
    cloud = cloud_of(np.linspace(0, 1, len(weights)), weights)
    assert effective_sample_size(cloud) == pytest.approx(expected)


def test_resample_point_mass_stays_put():
    cloud = cloud_of(np.full(50, 1.234), np.random.default_rng(0).uniform(0.1, 1, 50))
    out = liu_west_resample(cloud, 1)
    np.testing.assert_allclose(out.positions, 1.234, atol=1e-12)
    np.testing.assert_allclose(out.weights, 1 / 50)
    assert effective_sample_size(out) == pytest.approx(50)


def test_resample_wrap_cluster_stays_near_zero():
    pos = np.concatenate([np.full(100, 0.05), np.full(100, TWO_PI - 0.05)])
    out = liu_west_resample(cloud_of(pos), 3)
    est = summarize(out).estimate[0]
    assert min(est, TWO_PI - est) < 0.02
    dist = np.minimum(out.positions, TWO_PI - out.positions)
    assert dist.max() < 0.5


def test_resample_singular_covariance_falls_back_to_diagonal():
    # perfectly correlated components: rank-one chart covariance
    x = np.random.default_rng(2).normal(1.0, 0.1, 200)
    out = liu_west_resample(cloud_of(np.column_stack([x, x])), 5)
    assert np.all(np.isfinite(out.positions))


def test_resample_preserves_first_two_moments():
    rng = np.random.default_rng(8)
    pos = np.column_stack([rng.normal(1.0, 0.2, 20000), rng.normal(5.0, 0.1, 20000)])
    w = rng.uniform(0, 1, 20000)
    cloud = cloud_of(pos, w)
    before = summarize(cloud)
    after = summarize(liu_west_resample(cloud, 9))
    np.testing.assert_allclose(after.estimate, before.estimate, atol=0.01)
    np.testing.assert_allclose(np.diag(after.covariance), np.diag(before.covariance), rtol=0.05)


def test_summarize_symmetric_pair():
    s = summarize(cloud_of([np.pi / 2 - 0.1, np.pi / 2 + 0.1]))
    assert s.estimate[0] == pytest.approx(np.pi / 2, abs=1e-12)
    assert s.variance_trace == pytest.approx(0.01, abs=1e-12)


def test_summarize_wrap_pair():
    s = summarize(cloud_of([0.1, TWO_PI - 0.1]))
    assert min(s.estimate[0], TWO_PI - s.estimate[0]) < 1e-12
    assert s.variance_trace == pytest.approx(0.01, abs=1e-12)


def test_summarize_single_particle():
    s = summarize(cloud_of([2.5], [1.0]))
    assert s.estimate[0] == pytest.approx(2.5)
    assert s.variance_trace == pytest.approx(0.0, abs=1e-15)


def test_summarize_undefined_circular_mean_flags_low_confidence():
    s = summarize(cloud_of([0.0, np.pi]))
    assert s.low_confidence
    assert s.estimate[0] == 0.0


def test_linear_estimator_matches_raw_moments():
    pos = np.array([0.5, 1.0, 3.0])
    w = np.array([0.2, 0.5, 0.3])
    s = summarize(cloud_of(pos, w), estimator="linear")
    mean = w @ pos
    assert s.estimate[0] == pytest.approx(mean)
    assert s.variance_trace == pytest.approx(w @ (pos - mean) ** 2)


cloud_strategy = st.integers(2, 40).flatmap(
    lambda n: st.tuples(
        arrays(np.float64, (n, 2), elements=st.floats(0, TWO_PI, exclude_max=True)),
        arrays(np.float64, n, elements=st.floats(1e-3, 1.0)),
    )
)


@settings(max_examples=80, deadline=None)
@given(cloud_strategy, st.randoms(use_true_random=False))
def test_summarize_permutation_invariant(data, rnd):
    pos, w = data
    perm = list(range(len(w)))
    rnd.shuffle(perm)
    a = summarize(ParticleCloud(pos, w))
    b = summarize(ParticleCloud(pos[perm], w[perm]))
    np.testing.assert_allclose(a.estimate, b.estimate, atol=1e-12)
    np.testing.assert_allclose(a.covariance, b.covariance, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(cloud_strategy)
def test_summary_invariants(data):
    pos, w = data
    cloud = ParticleCloud(pos, w)
    s = summarize(cloud)
    assert abs(cloud.weights.sum() - 1) < 1e-12
    assert s.variance_trace == pytest.approx(np.trace(s.covariance), abs=1e-12)
    np.testing.assert_allclose(s.covariance, s.covariance.T, atol=1e-15)
    assert np.linalg.eigvalsh(s.covariance).min() >= -1e-9
    assert 1 - 1e-9 <= effective_sample_size(cloud) <= cloud.n + 1e-9


@settings(max_examples=40, deadline=None)
@given(cloud_strategy, st.integers(0, 5), st.floats(0, TWO_PI))
def test_update_and_resample_keep_normalisation(data, m, theta):
    pos, w = data
    cloud = bayes_update(ParticleCloud(pos, w), get_model("fourier_p2"), m, [theta, 0.0])
    assert abs(cloud.weights.sum() - 1) < 1e-12
    out = liu_west_resample(cloud, 0)
    assert abs(out.weights.sum() - 1) < 1e-12
    assert np.all((out.positions >= 0) & (out.positions < TWO_PI))
