import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from conewave import geometry as geo
from conewave.errors import DomainError, InvalidArgumentError, UnsupportedDimensionError
from conewave.rng import RngStream
from conewave.sampling import (BoundaryPair, HeatChainParams, heat_kernel_density, heat_step,
                               kernel_reflection_identity_check, sample_brownian_boundary, sample_heat_chain,
                               uniform_point, wrapped_normal_cdf)


def _circle_decay_oracle(t):
    """E cos(theta) for theta ~ N(0, t), by direct quadrature."""
    f = lambda x: math.cos(x) * math.exp(-x * x / (2 * t)) / math.sqrt(2 * math.pi * t)
    return integrate.quad(f, -40 * math.sqrt(t), 40 * math.sqrt(t))[0]


def _sphere2_decay_oracle(t):
    """E[x . X_t] on S^2 by integrating c * p(t, c) over the sphere."""
    e = np.array([1.0, 0.0, 0.0])

    def f(c):
        y = np.array([c, math.sqrt(max(0.0, 1 - c * c)), 0.0])
        return c * float(heat_kernel_density(t, e, y, 2)) * 2 * math.pi

    return integrate.quad(f, -1, 1)[0]


# -- uniform ----------------------------------------------------------------

@pytest.mark.parametrize("d", [1, 2, 3])
def test_uniform_point_moments(d):
    x = uniform_point(RngStream(1, 0, (d,)), d, 10**5)
    assert np.max(np.abs(geo.norm(x) - 1)) <= 1e-12
    assert np.all(np.abs(x.mean(axis=0)) < 0.02)
    assert abs(np.mean(x[:, 0] ** 2) - 1 / (d + 1)) < 0.02


# -- heat step ----------------------------------------------------------------

def test_heat_step_tiny_time_is_identity():
    x = uniform_point(RngStream(2), 2, 50)
    for d, pts in ((1, uniform_point(RngStream(3), 1, 50)), (2, x)):
        out = heat_step(pts, HeatChainParams(1e-18, d), RngStream(4))
        assert np.max(geo.norm(out - pts)) <= 1e-8


def test_heat_step_decay_circle():
    t = 0.5
    oracle = _circle_decay_oracle(t)
    assert oracle == pytest.approx(math.exp(-0.25), abs=1e-10)
    x = np.tile([1.0, 0.0], (10**5, 1))
    y = heat_step(x, HeatChainParams(t, 1), RngStream(5))
    assert abs(y[:, 0].mean() - oracle) < 0.01


def test_heat_step_decay_sphere2():
    t = 0.5
    oracle = _sphere2_decay_oracle(t)
    assert oracle == pytest.approx(math.exp(-0.5), abs=1e-6)
    x = np.tile([1.0, 0.0, 0.0], (10**5, 1))
    y = heat_step(x, HeatChainParams(t, 2, substeps=64), RngStream(6))
    assert abs(y[:, 0].mean() - oracle) < 0.015


@pytest.mark.parametrize("d,t", [(1, 0.1), (2, 0.1), (3, 0.1), (3, 0.5)])
def test_spectral_decay(d, t):
    x = np.zeros((4 * 10**4, d + 1))
    x[:, 0] = 1.0
    y = heat_step(x, HeatChainParams(t, d), RngStream(7, 0, (d,)))
    assert abs(y[:, 0].mean() - math.exp(-d * t / 2)) < 0.015


def test_isometry_invariance_circle():
    t = 0.3
    rot = 1.1
    x = np.tile(geo.circle_point(0.4), (2 * 10**4, 1))
    a = geo.angle(heat_step(x, HeatChainParams(t, 1), RngStream(8, 0, (0,))))
    b = geo.angle(heat_step(geo.circle_point(0.4 + rot) * np.ones((2 * 10**4, 1)), HeatChainParams(t, 1),
                            RngStream(8, 0, (1,))))
    inc_a = geo.wrap_angle(a - 0.4)
    inc_b = geo.wrap_angle(b - 0.4 - rot)
    assert stats.ks_2samp(inc_a, inc_b).pvalue >= 0.01


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        HeatChainParams(0.0, 1)
    with pytest.raises(InvalidArgumentError):
        HeatChainParams(0.1, 2, method="exact-wrap")
    assert HeatChainParams(0.1, 1).method == "exact-wrap"
    assert HeatChainParams(0.1, 3).method == "geodesic-walk"


# -- chains ------------------------------------------------------------------

def test_chain_length_zero():
    x0 = np.array([0.0, 1.0])
    out = sample_heat_chain(x0, HeatChainParams(0.1, 1), 0, RngStream(0))
    assert out.shape == (1, 2) and np.array_equal(out[0], x0)


def test_chain_increments_wrapped_normal():
    t = 2.0 ** -6
    chain = sample_heat_chain(np.array([1.0, 0.0]), HeatChainParams(t, 1), 10**4, RngStream(9))
    inc = geo.wrap_angle(np.diff(geo.angle(chain)))
    D = stats.kstest(inc, lambda x: wrapped_normal_cdf(x, t)).statistic
    assert D < 0.02


def test_chain_marginal_uniform():
    x0 = uniform_point(RngStream(10), 1, 10**4)
    chain = sample_heat_chain(x0, HeatChainParams(0.05, 1), 32, RngStream(11))
    assert abs(chain[32][:, 0].mean()) < 0.03


def test_chain_reproducible():
    p = HeatChainParams(0.1, 2)
    a = sample_heat_chain(np.array([1.0, 0.0, 0.0]), p, 20, RngStream(3, 4, (5,)))
    b = sample_heat_chain(np.array([1.0, 0.0, 0.0]), p, 20, RngStream(3, 4, (5,)))
    c = sample_heat_chain(np.array([1.0, 0.0, 0.0]), p, 20, RngStream(3, 4, (6,)))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


# -- boundary --------------------------------------------------------------

@pytest.mark.parametrize("d", [1, 2])
def test_boundary_shape_and_origin(d):
    b = sample_brownian_boundary(3, 1, d, RngStream(12))
    assert b.y_plus.shape == (17, d + 1) and b.y_minus.shape == (17, d + 1)
    assert np.array_equal(b.y_plus[0], b.y_minus[0])
    assert np.max(np.abs(geo.norm(b.chain()) - 1)) <= 1e-12


def test_boundary_chain_round_trip():
    b = sample_brownian_boundary(3, 0, 1, RngStream(13))
    again = BoundaryPair.from_chain(b.chain(), b.N)
    assert np.array_equal(again.y_plus, b.y_plus) and np.array_equal(again.y_minus, b.y_minus)


def test_boundary_increments_pooled_ks():
    t = 2.0 ** -6
    incs = []
    for r in range(500):
        b = sample_brownian_boundary(6, 0, 1, RngStream(14).substream(r))
        incs.append(geo.wrap_angle(np.diff(geo.angle(b.chain()))))
    pool = np.concatenate(incs)
    assert pool.size == 500 * 128
    assert stats.kstest(pool, lambda x: wrapped_normal_cdf(x, t)).pvalue >= 0.01


def test_boundary_step_tail():
    t = 2.0 ** -6
    b = sample_brownian_boundary(6, 9, 1, RngStream(15))
    steps = geo.norm(np.diff(b.chain(), axis=0))
    frac = np.mean(steps >= 5 * math.sqrt(-t * math.log(t)))
    assert frac <= 10 * t ** (25 / 8)


def test_boundary_pair_rejects_mismatched_origin():
    with pytest.raises(InvalidArgumentError):
        BoundaryPair(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))


# -- kernel ----------------------------------------------------------------

def test_kernel_equilibrium_values():
    x, y = geo.circle_point(0.2), geo.circle_point(2.9)
    assert heat_kernel_density(100.0, x, y, 1) == pytest.approx(1 / (2 * math.pi), abs=1e-8)
    assert heat_kernel_density(0.1, x, x, 1) == pytest.approx(1 / math.sqrt(0.2 * math.pi), abs=1e-9)
    e, f = np.array([1.0, 0, 0]), np.array([0, 0.6, 0.8])
    assert heat_kernel_density(100.0, e, f, 2) == pytest.approx(1 / (4 * math.pi), abs=1e-8)


@pytest.mark.parametrize("d", [1, 2])
def test_kernel_normalised(d):
    t = 0.2
    if d == 1:
        total = integrate.quad(lambda a: float(heat_kernel_density(t, geo.circle_point(0.0),
                                                                   geo.circle_point(a), 1)), -math.pi, math.pi)[0]
    else:
        e = np.array([1.0, 0, 0])
        total = integrate.quad(lambda c: 2 * math.pi * float(heat_kernel_density(
            t, e, np.array([c, math.sqrt(max(0.0, 1 - c * c)), 0]), 2)), -1, 1)[0]
    assert total == pytest.approx(1.0, abs=1e-8)


def test_kernel_errors():
    x = np.array([1.0, 0.0])
    with pytest.raises(DomainError):
        heat_kernel_density(0.0, x, x, 1)
    with pytest.raises(UnsupportedDimensionError):
        heat_kernel_density(0.1, np.ones(4) / 2, np.ones(4) / 2, 3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_kernel_rotation_symmetry_circle(t, a, b, rot):
    p1 = heat_kernel_density(t, geo.circle_point(a), geo.circle_point(b), 1)
    p2 = heat_kernel_density(t, geo.circle_point(a + rot), geo.circle_point(b + rot), 1)
    assert p1 == pytest.approx(p2, rel=1e-9)


def test_kernel_identity_s_equals_p():
    err = kernel_reflection_identity_check(0.05, 1, 1000, RngStream(16), s_equals_p=True)
    assert err <= 1e-10
    err = kernel_reflection_identity_check(0.1, 2, 200, RngStream(16), s_equals_p=True, truncation=60)
    assert err <= 1e-10


def test_kernel_identity_d1():
    assert kernel_reflection_identity_check(0.05, 1, 10**4, RngStream(17)) <= 1e-7


def test_kernel_identity_d2():
    assert kernel_reflection_identity_check(0.1, 2, 10**3, RngStream(18), truncation=60) <= 1e-6


def test_wrapped_normal_cdf_limits():
    assert wrapped_normal_cdf(-math.pi, 0.3) == pytest.approx(0.0, abs=1e-12)
    assert wrapped_normal_cdf(math.pi, 0.3) == pytest.approx(1.0, abs=1e-12)
    assert wrapped_normal_cdf(0.0, 0.3) == pytest.approx(0.5, abs=1e-12)
