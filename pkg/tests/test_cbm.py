import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma as cgamma

from wmfred.cbm import CbmSample, MCConfig, cbm_estimate, determinantal_weight, sample_endpoints, weights_batch
from wmfred.errors import ConfigError, TooFewSamples
from wmfred.fredholm import fredholm_rank_det
from wmfred.kernel import DriftSpec, ObservablePoint, phi_lifted
from wmfred.numkit import RngStream

CANON = DriftSpec((-0.5, 0.5), 0.5)


def test_endpoint_moments():
    t = 2.0
    s = sample_endpoints(CANON, t, RngStream(5, 0), 100000)
    n = s.V.shape[0]
    se_mean = np.sqrt(1.0 / t / n)
    se_var = (1.0 / t) * np.sqrt(2.0 / n)
    assert np.all(np.abs(s.V.mean(axis=0) - np.array(CANON.nu_hat)) < 3 * se_mean)
    assert np.all(np.abs(s.W.mean(axis=0)) < 3 * se_mean)
    assert np.all(np.abs(s.V.var(axis=0) - 1.0 / t) < 3 * se_var)
    assert np.all(np.abs(s.W.var(axis=0) - 1.0 / t) < 3 * se_var)
    assert abs(np.corrcoef(s.V[:, 0], s.W[:, 0])[0, 1]) < 4 / np.sqrt(n)


def test_endpoints_deterministic_in_key():
    a = sample_endpoints(CANON, 1.0, RngStream(9, 4), 10)
    b = sample_endpoints(CANON, 1.0, RngStream(9, 4), 10)
    assert np.array_equal(a.V, b.V) and np.array_equal(a.W, b.W)
    single = sample_endpoints(CANON, 1.0, RngStream(9, 4))
    assert single.V.shape == (2,)
    with pytest.raises(ConfigError):
        sample_endpoints(CANON, 0.0, RngStream(9, 4))


def test_weight_is_one_when_no_indicator_fires():
    s = CbmSample(np.array([0.5, 2.0]), np.array([0.3, -1.1]))
    assert determinantal_weight(s, CANON, ObservablePoint(1.0, 0.2)) == 1.0


@given(st.floats(-4, 0.9), st.floats(-3, 3).filter(lambda w: abs(w) > 1e-6))
def test_single_particle_weight(v, w):
    d = DriftSpec((0.3,), 0.5)
    z = complex(v, w)
    got = determinantal_weight(CbmSample(np.array([v]), np.array([w])), d, ObservablePoint(1.0, 1.0))
    assert abs(got - (1 - cgamma(1 - 0.5 * (0.3 - z)))) < 1e-12 * max(1.0, abs(got))


@given(st.lists(st.floats(-3, -0.01), min_size=2, max_size=2),
       st.lists(st.floats(0.05, 2), min_size=2, max_size=2))
def test_two_particle_weight_against_cofactors(V, W):
    z = np.array(V) + 1j * np.array(W)
    p = [[phi_lifted(CANON, j, z[k]) for k in range(2)] for j in range(2)]
    ref = (1 - p[0][0]) * (1 - p[1][1]) - p[0][1] * p[1][0]
    got = determinantal_weight(CbmSample(np.array(V), np.array(W)), CANON, ObservablePoint(1.0, 0.0))
    assert abs(got - ref) < 1e-12 * max(1.0, abs(ref))


def test_weights_batch_matches_singles():
    s = sample_endpoints(CANON, 1.0, RngStream(1, 1), 50)
    obs = ObservablePoint(1.0, 0.0)
    w, rej = weights_batch(CANON, obs, s)
    assert not rej.any()
    for i in range(50):
        assert w[i] == determinantal_weight(CbmSample(s.V[i], s.W[i]), CANON, obs)


def test_far_left_threshold_gives_exact_one():
    e = cbm_estimate(CANON, ObservablePoint(1.0, -60.0), MCConfig(5000, seed=3))
    assert e.value == 1.0 and e.std_error == 0.0 and e.imag_residual == 0.0


def test_mc_config_validation():
    with pytest.raises(TooFewSamples):
        MCConfig(99)
    with pytest.raises(ConfigError):
        MCConfig(1000, estimator="trimmed")
    with pytest.raises(ConfigError):
        MCConfig(1000, batch_size=0)
    with pytest.raises(ConfigError):
        MCConfig(1000, groups=0)


@pytest.mark.parametrize("drift", [CANON, DriftSpec((-0.6, 0.0, 0.7), 0.4)])
def test_estimate_independent_of_workers(drift):
    obs = ObservablePoint(1.0, 0.0)
    base = cbm_estimate(drift, obs, MCConfig(20000, batch_size=1500, seed=42))
    for workers in (2, 4, 7):
        e = cbm_estimate(drift, obs, MCConfig(20000, batch_size=1500, seed=42, workers=workers))
        assert e == base


def test_median_of_means_is_reported_and_selectable():
    obs = ObservablePoint(1.0, 0.0)
    mean = cbm_estimate(CANON, obs, MCConfig(20000, seed=1))
    mom = cbm_estimate(CANON, obs, MCConfig(20000, seed=1, estimator="median_of_means"))
    assert mom.value == mean.median_of_means
    assert mean.value == mean.mean


def test_standard_error_scaling():
    obs = ObservablePoint(1.0, 0.0)
    a = cbm_estimate(CANON, obs, MCConfig(50000, seed=8))
    b = cbm_estimate(CANON, obs, MCConfig(200000, seed=9))
    assert abs(a.std_error / b.std_error - 2.0) < 0.4


def test_no_rejections_over_a_million_samples():
    e = cbm_estimate(CANON, ObservablePoint(1.0, 0.0), MCConfig(1000000, batch_size=50000, seed=2024))
    assert e.rejected == 0
    assert e.n == 1000000


@pytest.mark.parametrize("drift", [DriftSpec((0.3,), 0.5), CANON])
def test_estimator_targets_the_real_axis_kernel(drift):
    # the weight evaluates Phi on the literal vertical lines, so the estimator
    # reproduces the Fredholm value built from the real-axis kernel
    for h in (-1.0, 0.0, 1.0):
        obs = ObservablePoint(1.0, h)
        e = cbm_estimate(drift, obs, MCConfig(100000, seed=7))
        ref = fredholm_rank_det(drift, obs, contour="real")
        assert abs(e.value - ref) < 3 * e.std_error
        assert abs(e.imag_residual) < 3 * e.imag_std_error
