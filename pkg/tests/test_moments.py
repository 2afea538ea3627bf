import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import FROZEN_MC_MOMENTS, PARAM_SETS, case1_printed_mp, case2_printed_mp, g_mp
from vispose.mobility import PositionModel, displacement_sample
from vispose.moments import (
    MomentConvergenceWarning,
    g_kernel,
    log_weight,
    mgf,
    mgf_from_table,
    moments,
    moments_case1,
    moments_case2,
    p_flight,
)
from vispose.special import ConvergenceError

DEFAULT = PositionModel(0.5, 1.0, 0.3, 1.4)


# ---- kernel ---------------------------------------------------------------

@pytest.mark.parametrize("idx", [(0, 0, 1, 1, 4), (2, 1, 2, 2, 8), (3, 3, 3, 4, 15), (5, 2, 4, 3, 14)])
@pytest.mark.parametrize("params", PARAM_SETS)
def test_kernel_matches_high_precision(idx, params):
    model = PositionModel(*params)
    i, h, n, k, m = idx
    ref = float(g_mp(i, h, n, k, m, *params, 0.5))
    got = g_kernel(i, h, n, k, m, model, 0.5)
    if ref == 0.0:
        assert got == 0.0
    else:
        assert got == pytest.approx(ref, rel=1e-11)


def test_kernel_equal_rates_is_closed_product():
    model = PositionModel(0.8, 0.8, 0.25, 1.2)
    i, h, n, k, m, dt = 3, 2, 3, 2, 10, 0.4
    direct = (math.factorial(2 * k) * 0.8 ** i * 0.8 ** h * dt ** (m - 1) * math.exp(-0.8 * dt)
              / math.factorial(m - 1) * 1.2 ** (2 * k) * math.comb(i, h) * 0.25 ** (i - h) * 0.75 ** h)
    assert g_kernel(i, h, n, k, m, model, dt) == pytest.approx(direct, rel=1e-13)


def test_kernel_vanishes_without_zero_pauses():
    model = PositionModel(0.5, 1.0, 0.0, 1.4)
    assert g_kernel(3, 1, 2, 1, 8, model, 0.5) == 0.0
    assert g_kernel(3, 3, 3, 1, 9, model, 0.5) > 0.0


def test_kernel_rejects_bad_indices():
    with pytest.raises(ValueError):
        g_kernel(1, 2, 1, 1, 4, DEFAULT, 0.5)


def test_planar_weight_is_simplex_walk_moment():
    rng = np.random.default_rng(11)
    n = 400_000
    for m in (1, 2, 3):
        a = rng.uniform(0, 2 * math.pi, (n, m))
        tau = rng.dirichlet(np.ones(m), n)
        r2 = (tau * np.cos(a)).sum(1) ** 2 + (tau * np.sin(a)).sum(1) ** 2
        for k in (1, 2, 3):
            w = math.exp(float(log_weight(m, k)))
            pred = w * math.factorial(2 * k) * math.factorial(m - 1) / math.factorial(2 * k + m - 1)
            x = r2 ** k
            assert abs(x.mean() - pred) <= 4 * x.std() / math.sqrt(n) + 1e-12


# ---- case sums ------------------------------------------------------------

@pytest.mark.filterwarnings("ignore::vispose.moments.MomentConvergenceWarning")
@pytest.mark.parametrize("params", PARAM_SETS)
@pytest.mark.parametrize("k", [1, 3])
def test_printed_case_sums_match_transliteration(params, k):
    model = PositionModel(*params)
    dt, n_max = 0.7, 6
    r1 = moments_case1(model, dt, k, n_max, variant="printed")
    r2 = moments_case2(model, dt, k, n_max, variant="printed")
    assert r1.value == pytest.approx(float(case1_printed_mp(*params, dt, k, n_max)), rel=1e-10)
    assert r2.value == pytest.approx(float(case2_printed_mp(*params, dt, k, n_max)), rel=1e-10)


def test_variants_agree_for_first_moment_without_zero_pauses():
    model = PositionModel(2.0, 0.5, 0.0, 1.4)
    a = moments(model, 0.5, k_max=1)
    b = moments(model, 0.5, k_max=1, variant="printed")
    assert a.m[1] == pytest.approx(b.m[1], rel=1e-13)


def test_single_flight_term_at_first_moment():
    # c = 0: only the n = 0 head term covers a window that stays in one flight
    model = PositionModel(2.0, 0.5, 0.0, 1.4)
    dt = 0.3
    r = moments_case2(model, dt, 1, variant="printed")
    head = (model.v * dt) ** 2 * math.exp(-model.mu * dt)
    assert r.a_terms[0] == pytest.approx(head, rel=1e-13)


@pytest.mark.parametrize("dt, k", sorted(FROZEN_MC_MOMENTS))
def test_against_frozen_monte_carlo(dt, k):
    mean, se = FROZEN_MC_MOMENTS[(dt, k)]
    assert abs(moments(DEFAULT, dt, k_max=4).m[k] - mean) <= 3 * se + 0.005 * mean


@pytest.mark.parametrize("condition, case", [("pause", moments_case1), ("flight", moments_case2)])
def test_conditioned_monte_carlo_first_moment(condition, case):
    dt = 1 / 6
    psi = displacement_sample(DEFAULT, dt, 200_000, seed=21, condition=condition)
    ref = case(DEFAULT, dt, 1).value
    se = psi.std() / math.sqrt(psi.size)
    assert abs(psi.mean() - ref) <= 0.02 * ref + 3 * se


def test_unconditioned_first_moment_within_two_percent():
    dt = 0.5
    psi = displacement_sample(DEFAULT, dt, 300_000, seed=8)
    assert psi.mean() == pytest.approx(moments(DEFAULT, dt, k_max=1).m[1], rel=0.02)


# ---- invariants -----------------------------------------------------------

model_st = st.builds(PositionModel, st.floats(0.05, 5.0), st.floats(0.05, 5.0),
                     st.floats(0.0, 0.95), st.floats(0.1, 3.0))


@given(model_st, st.floats(0.01, 2.0))
def test_moment_bounds(model, dt):
    tab = moments(model, dt, k_max=6)
    assert tab.m[0] == 1.0
    bound = tab.bound(model.v)
    assert np.all(tab.m >= 0)
    assert np.all(tab.m <= bound * (1 + 1e-12))
    assert np.all(tab.m_case1 <= bound * (1 + 1e-12))
    assert np.all(tab.m_case2 <= bound * (1 + 1e-12))


@given(model_st, st.floats(0.05, 1.0))
def test_per_n_terms_decay_beyond_three(model, dt):
    tab = moments(model, dt, k_max=4)
    for key in ("case1_A", "case1_B", "case2_A", "case2_B"):
        terms = tab.per_n_terms[key]
        assert np.all(np.diff(terms[:, 3:], axis=1) <= 1e-300 + 1e-12 * terms[:, 3:-1])


def test_equal_rates_path_is_finite():
    tab = moments(PositionModel(1.0, 1.0, 0.0, 1.4), 0.5, k_max=8)
    assert np.all(np.isfinite(tab.m))
    assert tab.converged


def test_default_table_size_and_convergence():
    tab = moments(DEFAULT, 0.25)
    assert tab.k_max == 31
    assert tab.converged


def test_auto_grow_extends_flight_cap():
    tab = moments(DEFAULT, 20.0, k_max=2)
    assert tab.n_max > 8
    assert tab.converged


def test_unsettled_series_warns():
    with pytest.warns(MomentConvergenceWarning):
        moments(DEFAULT, 20.0, k_max=2, auto_grow=False)


@pytest.mark.parametrize("kwargs", [{"dt": 0.0}, {"dt": -1.0}, {"dt": math.nan},
                                    {"dt": 0.5, "k_max": 41}, {"dt": 0.5, "n_max": 1},
                                    {"dt": 0.5, "variant": "other"}])
def test_invalid_requests(kwargs):
    with pytest.raises(ValueError):
        moments(DEFAULT, **kwargs)


# ---- flight probability ---------------------------------------------------

def test_flight_probability_examples():
    assert p_flight(PositionModel(1.0, 1.0, 0.0, 1.0)) == 0.5
    assert p_flight(PositionModel(1.0, 1.0, 0.5, 1.0)) == pytest.approx(2 / 3, rel=1e-15)


# ---- MGF ------------------------------------------------------------------

def test_mgf_at_zero_is_one():
    assert mgf(DEFAULT, 0.25, 0.0).value == 1.0


def test_mgf_negative_argument_in_unit_interval():
    tau = -1.0 / (DEFAULT.v * 0.25) ** 2
    val = mgf(DEFAULT, 0.25, tau).value
    assert 0.0 < val <= 1.0


def test_mgf_monotone_on_negative_grid():
    tab = moments(DEFAULT, 0.5, k_max=25)
    taus = np.linspace(-1.0 / (DEFAULT.v * 0.5) ** 2, 0.0, 30)
    vals = [mgf_from_table(tab, float(t), 25).value for t in taus]
    assert np.all(np.diff(vals) >= -1e-12)


def test_mgf_refuses_growing_terms():
    tab = moments(DEFAULT, 1.0, k_max=4)
    with pytest.raises(ConvergenceError):
        mgf_from_table(tab, -50.0, 4)


def test_mgf_needs_enough_moments():
    tab = moments(DEFAULT, 0.5, k_max=4)
    with pytest.raises(ValueError):
        mgf_from_table(tab, -1.0, 10)


def test_mgf_matches_monte_carlo():
    dt = 0.25
    tau = -1.0 / (DEFAULT.v * dt) ** 2
    psi = displacement_sample(DEFAULT, dt, 200_000, seed=4)
    est = np.exp(tau * psi)
    val = mgf(DEFAULT, dt, tau).value
    assert abs(est.mean() - val) <= 0.01 * val + 3 * est.std() / math.sqrt(psi.size)


def test_no_warnings_on_default_grid():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for dt in (1 / 60, 1 / 6, 0.5, 1.0):
            moments(DEFAULT, dt)
