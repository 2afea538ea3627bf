import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from vispose.defaults import FRAME, desktop_orientation_model
from vispose.mobility import PositionModel, displacement_sample
from vispose.moments import moments
from vispose.oracle import mc_vis_dst
from vispose.pose_model import AzimuthRegimes, LaplaceParams, OrientationModel, pdf_delta_phi
from vispose.vis import (
    ViSConfig,
    auto_epsilon,
    distance_term,
    laplace_far_fraction,
    sqrt_series,
    vis,
    vis_curve,
    vis_dst,
    vis_fov,
)

DESKTOP = desktop_orientation_model()
DEFAULT = PositionModel(0.5, 1.0, 0.3, 1.4)
CFG = ViSConfig()


def _static_orientation(scale=1e-9):
    return OrientationModel(LaplaceParams(90, 6), {0.1: scale},
                            AzimuthRegimes(1e3, 2e3, {0.1: LaplaceParams(0, scale)}))


# ---- config ---------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [{"w_fv": 0.0}, {"w_fv": math.pi}, {"d_fp": 0.0},
                                    {"epsilon": -1.0}, {"series_terms": 0}])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        ViSConfig(**kwargs)


# ---- FoV term -------------------------------------------------------------

def test_uniform_regime_is_exactly_a_quarter():
    _, pf_phi, _ = vis_fov(DESKTOP, 2000 * FRAME, CFG)
    assert pf_phi == 0.25


def test_static_orientation_gives_unit_fov():
    value, pf_phi, pf_theta = vis_fov(_static_orientation(), 0.5, CFG)
    assert value == pytest.approx(1.0, abs=1e-9)
    assert pf_phi >= 0 and pf_theta >= 0


@given(st.floats(1e-3, 200.0), st.floats(1.0, 179.0))
def test_polar_far_fraction_matches_quadrature(b, w):
    q = integrate.quad(lambda x: x * math.exp(-x / b) / (2 * b), 0, w, epsabs=1e-14, epsrel=1e-13)[0]
    assert laplace_far_fraction(b, w) == pytest.approx(2 * q / w, abs=1e-8)


@pytest.mark.parametrize("frames", [10, 60, 189, 200, 300, 500, 1200])
def test_azimuth_far_fraction_matches_quadrature(frames):
    dt = frames * FRAME
    w = CFG.w_deg
    q = integrate.quad(lambda x: x * pdf_delta_phi(DESKTOP, dt, x), 0, w, points=[0.0],
                       limit=500, epsabs=1e-14, epsrel=1e-13)[0]
    _, pf_phi, _ = vis_fov(DESKTOP, dt, CFG)
    assert pf_phi == pytest.approx(2 * q / w, abs=1e-8)


@pytest.mark.parametrize("frames", [1, 10, 60, 189, 500, 1549, 3000])
def test_fov_terms_are_fractions(frames):
    value, pf_phi, pf_theta = vis_fov(DESKTOP, frames * FRAME, CFG)
    assert 0 <= pf_phi <= 1 and 0 <= pf_theta <= 1 and 0 <= value <= 1


def test_fov_rejects_bad_dt():
    with pytest.raises(ValueError):
        vis_fov(DESKTOP, 0.0, CFG)


# ---- distance term --------------------------------------------------------

def test_auto_epsilon_example():
    assert auto_epsilon(DEFAULT, 0.25) == pytest.approx(0.35, rel=1e-15)
    with pytest.raises(ValueError):
        auto_epsilon(DEFAULT, 0.0)


def test_static_viewport_distance_term():
    slow = PositionModel(0.5, 1.0, 0.3, 1e-9)
    value, err = vis_dst(slow, 0.25, 20.0, CFG)
    assert value == pytest.approx(1.0, abs=1e-9)
    assert err <= 1e-9


def test_far_field_limit():
    value, _ = vis_dst(DEFAULT, 0.5, 1e4, CFG)
    assert abs(value - 1.0) <= 1e-3


@pytest.mark.parametrize("dt", [1 / 6, 0.25, 0.5, 1.0])
@pytest.mark.parametrize("d", [5.0, 20.0, 50.0])
def test_error_bound_within_kappa_epsilon(dt, d):
    term = distance_term(DEFAULT, dt, CFG)
    _, err = term.at(d, CFG.w_fv)
    kappa = 4 * math.sin(CFG.w_fv / 2) / (CFG.w_fv * d * math.sqrt(math.pi))
    assert 0 <= err <= kappa * term.epsilon


@pytest.mark.parametrize("dt", [1 / 6, 0.25, 0.5])
def test_series_stable_under_sixty_term_extension(dt):
    """Terms 30..59 are formed from engine moments up to k = 40 and sampled
    moments beyond, and separately bounded with m(k) <= (v dt)^(2k)."""
    term = distance_term(DEFAULT, dt, CFG)
    eps = term.epsilon
    m40 = moments(DEFAULT, dt, k_max=40).m
    psi = displacement_sample(DEFAULT, dt, 200_000, seed=17)
    mc = np.array([np.mean(psi ** k) for k in range(41, 61)])
    ext = np.concatenate([m40, mc])
    s30, _, _ = sqrt_series(ext, eps, 30)
    s60, _, _ = sqrt_series(ext, eps, 60)
    assert s30 == pytest.approx(term.series, rel=1e-13, abs=1e-15)
    assert abs(s60 - s30) < 1e-9
    i = np.arange(30, 60)
    r = DEFAULT.v * dt
    tail = sum(math.exp((2 * j + 2) * math.log(r) - (2 * j + 1) * math.log(eps)
                        - math.log(j + 0.5) - math.lgamma(j + 1)) for j in i)
    assert tail < 1e-9


def test_series_helper_needs_enough_moments():
    with pytest.raises(ValueError):
        sqrt_series(np.ones(5), 1.0, 10)


@pytest.mark.parametrize("dt", [1 / 6, 0.25, 0.5])
@pytest.mark.parametrize("d", [10.0, 20.0, 50.0])
def test_distance_term_against_monte_carlo(dt, d):
    rep = mc_vis_dst(DEFAULT, dt, d, n_samples=100_000, seed=31)
    assert rep.verdict, rep


@pytest.mark.parametrize("d", [0.0, -1.0, math.inf, math.nan])
def test_distance_domain(d):
    with pytest.raises(ValueError):
        vis_dst(DEFAULT, 0.25, d, CFG)


def test_distance_rejects_bad_dt_and_terms():
    with pytest.raises(ValueError):
        vis_dst(DEFAULT, 0.0, 10.0, CFG)
    with pytest.raises(ValueError):
        vis_dst(DEFAULT, 0.25, 10.0, ViSConfig(series_terms=40))


# ---- combined -------------------------------------------------------------

def test_static_pose_gives_one():
    p = vis(_static_orientation(), PositionModel(0.5, 1.0, 0.3, 1e-9), 0.25, 20.0, CFG)
    assert p.vis == pytest.approx(1.0, abs=1e-8)


def test_product_and_bound_scaling():
    p = vis(DESKTOP, DEFAULT, 0.25, 20.0, CFG)
    assert p.vis == p.vis_fov * p.vis_dst
    _, err = vis_dst(DEFAULT, 0.25, 20.0, CFG)
    assert p.err_bound == pytest.approx(p.vis_fov * err, rel=1e-15)


def test_decreases_with_dt():
    vals = [vis(DESKTOP, DEFAULT, n * FRAME, 20.0, CFG).vis for n in range(1, 31)]
    assert np.all(np.diff(vals) <= 0)


@pytest.mark.parametrize("frames", [1, 10, 30, 60])
def test_increases_with_d(frames):
    curve = vis_curve(DESKTOP, DEFAULT, frames * FRAME, np.linspace(5, 50, 46), CFG)
    assert np.all(np.diff(curve.column("vis")) >= 0)
    assert curve.column("d")[0] == 5.0


def test_curve_points_match_single_calls():
    curve = vis_curve(DESKTOP, DEFAULT, 0.25, [10.0, 30.0], CFG)
    for pt in curve.points:
        assert pt == vis(DESKTOP, DEFAULT, 0.25, pt.d, CFG)


def test_latency():
    vis(DESKTOP, DEFAULT, 0.3, 20.0, CFG)
    distance_term.cache_clear()
    t0 = time.perf_counter()
    vis(DESKTOP, DEFAULT, 0.3, 20.0, CFG)
    assert time.perf_counter() - t0 <= 0.05
