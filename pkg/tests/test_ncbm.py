import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from wmfred.errors import ConfigError, DegenerateStart, UnsupportedN
from wmfred.ncbm import (
    WeylPoint,
    gap_probability,
    gap_probability_det,
    gap_probability_drifted,
    gue_density,
    km_density,
    ncbm_density,
    ncbm_drift_density,
    ncbm_drift_density_origin,
    ordered_mass,
)
from wmfred.numkit import composite_gauss_legendre, gaussian_density

weyl = st.lists(st.floats(-3, 3), min_size=2, max_size=3, unique=True).map(sorted).filter(
    lambda v: min(np.diff(v)) > 1e-3)


def test_weyl_point_validation():
    assert WeylPoint((0.0, 1.0)).N == 2
    with pytest.raises(ConfigError):
        WeylPoint((1.0, 0.0))
    with pytest.raises(ConfigError):
        WeylPoint((0.0, 0.0))


def test_km_example():
    assert km_density(1.0, (0.0, 1.0), (0.0, 1.0)) == pytest.approx((1 - np.exp(-1)) / (2 * np.pi), rel=1e-14)
    with pytest.raises(UnsupportedN):
        km_density(1.0, (0, 1, 2, 3), (0, 1, 2, 3))


@given(st.data(), st.floats(0.1, 3))
def test_km_nonnegative_and_symmetric(data, t):
    x = data.draw(weyl)
    y = data.draw(st.lists(st.floats(-3, 3), min_size=len(x), max_size=len(x), unique=True).map(sorted))
    q = km_density(t, y, x)
    assert q >= -1e-15
    assert q == pytest.approx(km_density(t, x, y), rel=1e-12, abs=1e-15)


def test_km_nonnegative_on_random_pairs():
    g = np.random.default_rng(0)
    for n in (2, 3):
        x = np.sort(g.uniform(-2, 2, (500, n)), axis=1)
        y = np.sort(g.uniform(-2, 2, (500, n)), axis=1)
        assert np.all(km_density(1.0, y, x) >= -1e-15)


def test_single_particle_reductions():
    assert ncbm_density(0.7, (0.4,), (-0.2,)) == pytest.approx(gaussian_density(0.7, 0.4, -0.2), rel=1e-15)
    assert gue_density(1.3, (0.4,)) == pytest.approx(gaussian_density(1.3, 0.4, 0.0), rel=1e-15)


def test_degenerate_start_rejected():
    with pytest.raises(DegenerateStart):
        ncbm_density(1.0, (0.0, 1.0), (0.5, 0.5))
    with pytest.raises(DegenerateStart):
        ncbm_drift_density_origin(1.0, (0.0, 1.0), (0.2, 0.2))
    with pytest.raises(ConfigError):
        ncbm_drift_density(1.0, (0.0, 1.0), (0.0, 1.0), (0.5, -0.5))


@pytest.mark.parametrize("x", [(0.0, 1.0), (-0.7, 0.1, 0.9)])
def test_ncbm_normalisation(x):
    n = len(x)
    f = lambda y: ncbm_density(1.0, y, x)
    assert abs(ordered_mass(f, n, min(x) - 9, max(x) + 9, 1.0) - 1) < 1e-6


def test_ordered_mass_routes_agree():
    x = (0.0, 1.0)
    f = lambda y: ncbm_density(1.0, y, x)
    a = ordered_mass(f, 2, -9, 10, 1.0)
    b = ordered_mass(f, 2, -9, 10, 0.25, symmetric=False)
    assert abs(a - b) < 1e-3


def test_chapman_kolmogorov():
    # the 1/h(z) of the second factor cancels the h(z) of the first, leaving
    # (h(y)/h(x)) times a Karlin-McGregor convolution; that is symmetric in
    # (z1, z2), so the chamber integral is half the box integral
    x, y = np.array([0.0, 1.0]), np.array([0.3, 1.4])
    s, t = 0.4, 0.6
    r = composite_gauss_legendre(-8, 9, 34, 16)
    Z = np.stack(np.meshgrid(r.nodes, r.nodes, indexing="ij"), axis=-1)
    conv = np.sum(km_density(s, Z, x) * km_density(t, y, Z) * np.outer(r.weights, r.weights)) / 2.0
    lhs = (y[1] - y[0]) / (x[1] - x[0]) * conv
    assert abs(lhs - ncbm_density(s + t, y, x)) < 1e-5


def test_drift_to_zero_recovers_driftless_form():
    eps = 1e-4
    x = (0.1, 0.9)
    for y in [(0.0, 1.0), (-0.5, 2.0), (0.3, 0.4)]:
        a = ncbm_drift_density(1.0, y, x, (-eps, eps))
        assert a == pytest.approx(ncbm_density(1.0, y, x), rel=1e-6)


def test_drifted_density_mass_and_mean():
    x, nu, t = (0.0, 1.0), (-0.5, 0.5), 1.0
    f = lambda y: ncbm_drift_density(t, y, x, nu)
    assert abs(ordered_mass(f, 2, -10, 11, 1.0) - 1) < 1e-6
    m = ordered_mass(lambda y: f(y) * (y[..., 0] + y[..., 1]), 2, -10, 11, 1.0)
    assert abs(m - (sum(x) + t * sum(nu))) < 1e-4


def test_three_particle_drifted_mass():
    x, nu = (-0.5, 0.2, 1.0), (-0.3, 0.0, 0.6)
    f = lambda y: ncbm_drift_density(1.0, y, x, nu)
    assert abs(ordered_mass(f, 3, -9, 10, 1.0) - 1) < 1e-6


@pytest.mark.parametrize("nu", [(-0.5, 0.5), (-0.6, 0.0, 0.7)])
def test_origin_start_mass(nu):
    t = 1.3
    f = lambda y: ncbm_drift_density_origin(t, y, nu)
    assert abs(ordered_mass(f, len(nu), -10, 11, np.sqrt(t)) - 1) < 1e-6


def test_origin_start_is_the_small_start_limit():
    nu, t, eps = (-0.5, 0.5), 1.0, 1e-4
    for y in [(-0.3, 0.8), (0.0, 0.1), (-1.2, 1.5)]:
        ref = ncbm_drift_density(t, y, (-eps, eps), nu)
        assert ncbm_drift_density_origin(t, y, nu) == pytest.approx(ref, rel=1e-4)


@pytest.mark.parametrize("n", [2, 3])
def test_gue_normalisation(n):
    f = lambda y: gue_density(1.0, y)
    assert abs(ordered_mass(f, n, -9, 9, 1.0) - 1) < 1e-8


def test_gue_is_the_coincident_start_limit():
    eps = 1e-4
    for y in [(-0.4, 0.9), (0.2, 0.3), (-2.0, 1.0)]:
        assert ncbm_density(1.0, y, (-eps, eps)) == pytest.approx(gue_density(1.0, y), rel=1e-4)


# ---------------------------------------------------------------- gap probability

def test_gap_limits():
    start = WeylPoint((-0.5, 0.5))
    assert gap_probability(start, 1.0, -30.0) == pytest.approx(1.0, abs=1e-8)
    assert gap_probability(start, 1.0, 30.0) == 0.0


@given(st.floats(-2, 2), st.floats(0.3, 3))
def test_single_particle_gap_closed_form(h, t):
    ref = norm.sf(h * t, loc=0.3, scale=np.sqrt(1 / t))
    assert abs(gap_probability((0.3,), t, h) - ref) < 1e-9


@given(st.floats(-1.5, 1.5), st.floats(0.4, 2.5))
def test_gap_quadrature_matches_determinant_route(h, t):
    start = (-0.5, 0.5)
    assert abs(gap_probability(start, t, h) - gap_probability_det(start, t, h)) < 1e-8


@pytest.mark.parametrize("t,h", [(1.0, -1.0), (1.0, 0.0), (0.6, 0.8), (2.0, 0.3)])
def test_gap_routes_three_particles(t, h):
    start = (-0.6, 0.0, 0.7)
    assert abs(gap_probability(start, t, h) - gap_probability_det(start, t, h)) < 1e-8


@given(st.floats(-2, 2), st.floats(0, 1), st.floats(0.4, 2.5))
def test_gap_nonincreasing_in_h(h, dh, t):
    a = gap_probability((-0.5, 0.5), t, h)
    b = gap_probability((-0.5, 0.5), t, h + dh)
    assert b <= a + 1e-12
    assert -1e-8 <= b <= 1 + 1e-8


@pytest.mark.parametrize("t,h", [(1.0, 0.0), (2.0, 0.3), (0.5, -0.4), (1.7, 1.1)])
def test_reciprocal_time_relation(t, h):
    # X(t) from the origin with drift nu has the law of t * Y(1/t), Y driftless
    # from nu, so the matching threshold for Y(1/t) is h / t
    nu = (-0.5, 0.5)
    drifted = gap_probability_drifted(nu, t, h)
    assert abs(drifted - gap_probability(nu, t, h / t ** 2)) < 1e-8


def test_literal_threshold_agrees_only_at_unit_time():
    nu = (-0.5, 0.5)
    assert abs(gap_probability(nu, 1.0, 0.4) - gap_probability_drifted(nu, 1.0, 0.4)) < 1e-8
    assert abs(gap_probability(nu, 2.0, 0.3) - gap_probability_drifted(nu, 2.0, 0.3)) > 1e-2
