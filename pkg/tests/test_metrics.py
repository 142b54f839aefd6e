import math

import mpmath
import numpy as np
import pytest

from risdist import metrics
from risdist.channelmodels import RisDhModel, RisTModel
from risdist.metrics import (
    DPSK,
    Method,
    MetricCurve,
    ModulationParams,
    Scheme,
    ber_dh_closed,
    ber_dh_quadrature,
    ber_t_asymptotic,
    ber_t_closed,
    ber_t_quadrature,
    ber_unified_quadrature,
    capacity_dh_asymptotic,
    capacity_dh_closed,
    capacity_dh_quadrature,
    capacity_dh_upper,
    capacity_from_ccdf,
    capacity_t_asymptotic,
    capacity_t_closed,
    capacity_t_quadrature,
    capacity_t_upper,
    diversity_order_estimate,
    metric_curve,
    outage_dh,
    outage_t,
    outage_t_asymptotic,
)
from risdist.quadrature import integrate_finite
from risdist.special import EvalAccuracy

B2 = 1 + math.pi / 4
GRID = np.arange(0.0, 61.0, 10.0)


def _t(n, avg):
    return RisTModel(n, avg).fit()


def _dh(n, avg):
    return RisDhModel(n, avg).fit()


# -- outage ---------------------------------------------------------------


def test_outage_dh_single_element_against_bessel_integral():
    oracle = integrate_finite(lambda g: 2 * np.vectorize(
        lambda x: float(mpmath.besselk(0, 2 * mpmath.sqrt(x))))(g), 0.0, 1.0,
        EvalAccuracy(1e-11, 1e-300)).value
    assert outage_dh(_dh(1, 1.0), 1.0) == pytest.approx(oracle, rel=1e-9)


def test_outage_dh_limits_and_monotone():
    assert outage_dh(_dh(3, 1e12), 1.0) == pytest.approx(0.0, abs=1e-9)
    vals = [outage_dh(_dh(2, a), 100.0) for a in np.logspace(0, 6, 13)]
    assert np.all(np.diff(vals) <= 0)
    with pytest.raises(ValueError):
        outage_dh(_dh(2, 1.0), 0.0)


def test_outage_t_examples():
    assert outage_t(_t(1, 5.0), 5.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert outage_t(_t(3, 5.0), 1e-12) == pytest.approx(0.0, abs=1e-30)


def test_outage_t_against_monte_carlo():
    gamma_th = 100.0
    model = _t(4, 10 * gamma_th)
    rng = np.random.default_rng(2024)
    n = 10_000_000
    r = np.sqrt(rng.exponential(size=(n, 4))).sum(axis=1)
    p_mc = np.mean(model.avg_snr * r * r <= gamma_th)
    p = outage_t(model, gamma_th)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(p_mc - p) < 3 * se


def test_outage_t_asymptotic():
    model = _t(2, 1e4)
    assert model.b_const_ == pytest.approx(B2)
    assert outage_t_asymptotic(model, 100.0) == pytest.approx((100 / (B2 * 1e4)) ** 2 / 2,
                                                              rel=1e-13)
    for n in (1, 2, 4, 8):
        for avg in np.logspace(0, 6, 7):
            m = _t(n, avg)
            assert outage_t_asymptotic(m, 100.0) >= outage_t(m, 100.0)
    for n in (1, 2, 4):
        m = _t(n, 1e6)
        assert outage_t_asymptotic(m, 100.0) / outage_t(m, 100.0) == pytest.approx(1.0, abs=0.02)
    lo, hi = outage_t_asymptotic(_t(3, 1e4), 1.0), outage_t_asymptotic(_t(3, 1e5), 1.0)
    assert math.log10(lo / hi) == pytest.approx(3.0, rel=1e-12)


# -- BER ------------------------------------------------------------------


def test_ber_unified_quadrature_trivial_cdfs():
    assert ber_unified_quadrature(np.ones_like) == pytest.approx(0.5, rel=1e-10)
    assert ber_unified_quadrature(np.zeros_like) == 0.0
    bpsk_like = ModulationParams(0.5, 1.0)
    assert ber_unified_quadrature(np.ones_like, bpsk_like) == pytest.approx(0.5, rel=1e-10)


def test_ber_unified_quadrature_rayleigh_dpsk():
    assert ber_unified_quadrature(_t(1, 10.0).cdf) == pytest.approx(1 / 22, rel=1e-9)


@pytest.mark.parametrize("avg", [1.0, 10.0, 100.0])
def test_dpsk_rayleigh_chain(avg):
    m = _t(1, avg)
    exact = 1 / (2 * (1 + avg))
    assert ber_t_closed(m) == pytest.approx(exact, abs=1e-9)
    assert ber_t_quadrature(m) == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
@pytest.mark.parametrize("avg", [0.1, 10.0, 1e3, 1e6])
def test_ber_t_closed_matches_quadrature(n, avg):
    m = _t(n, avg)
    assert ber_t_closed(m) == pytest.approx(ber_t_quadrature(m), rel=1e-6)


def test_ber_t_limits_and_asymptote():
    assert ber_t_closed(_t(4, 1e-9)) == pytest.approx(0.5, abs=1e-6)
    assert ber_t_closed(_t(1, 10.0)) == pytest.approx(1 / 22, rel=1e-14)
    assert ber_t_asymptotic(_t(1, 50.0)) == pytest.approx(1 / 100, rel=1e-14)
    for n in (1, 2, 4):
        m = _t(n, 1e6)
        assert ber_t_asymptotic(m) / ber_t_closed(m) == pytest.approx(1.0, abs=0.02)
    lo, hi = ber_t_asymptotic(_t(2, 1e3)), ber_t_asymptotic(_t(2, 1e4))
    assert math.log10(lo / hi) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4])
@pytest.mark.parametrize("avg", [10.0, 1e3])
def test_ber_dh_closed_matches_quadrature(n, avg):
    m = _dh(n, avg)
    assert ber_dh_closed(m) == pytest.approx(ber_dh_quadrature(m), rel=1e-4)


def test_ber_dh_closed_other_modulation():
    mod = ModulationParams(0.5, 1.0)
    m = _dh(2, 30.0)
    assert ber_dh_closed(m, mod) == pytest.approx(ber_dh_quadrature(m, mod), rel=1e-4)


def test_ber_dh_low_snr_limit():
    assert ber_dh_closed(_dh(2, 1e-9)) == pytest.approx(0.5, abs=1e-6)


def test_ber_dh_single_element_semi_analytic():
    # DPSK conditional BER exp(-g)/2 averaged over the exact double-Rayleigh power
    rng = np.random.default_rng(77)
    avg, n = 10.0, 2_000_000
    g = avg * rng.exponential(size=n) * rng.exponential(size=n)
    cond = 0.5 * np.exp(-g)
    se = cond.std(ddof=1) / math.sqrt(n)
    assert abs(cond.mean() - ber_dh_closed(_dh(1, avg))) < 3 * se


# -- capacity -------------------------------------------------------------


def test_capacity_from_ccdf_trivial():
    assert capacity_from_ccdf(np.zeros_like) == 0.0
    g0 = 7.0
    step = capacity_from_ccdf(lambda g: (g < g0).astype(float))
    assert step == pytest.approx(math.log2(1 + g0), rel=1e-9)


def test_capacity_from_ccdf_rayleigh():
    oracle = float(-mpmath.e * mpmath.ei(-1) / mpmath.log(2))
    assert oracle == pytest.approx(0.86034, abs=1e-5)
    assert capacity_from_ccdf(_t(1, 1.0).ccdf) == pytest.approx(oracle, rel=1e-9)


@pytest.mark.parametrize("n", [1, 2, 4])
@pytest.mark.parametrize("avg", [1.0, 100.0])
def test_capacity_dh_closed_matches_quadrature(n, avg):
    m = _dh(n, avg)
    assert capacity_dh_closed(m) == pytest.approx(capacity_dh_quadrature(m), rel=1e-4)


def test_capacity_dh_bounds_and_limits():
    assert capacity_dh_upper(_dh(1, 1.0)) == pytest.approx(1.0, rel=1e-14)
    assert capacity_dh_closed(_dh(3, 1e-9)) == pytest.approx(0.0, abs=1e-6)
    for n in (1, 2, 4, 8):
        for db in GRID:
            m = _dh(n, 10 ** (db / 10))
            assert capacity_dh_quadrature(m) <= capacity_dh_upper(m)
    m = _dh(2, 1e6)
    doubled = m.fit_.omega_w * 2e6
    assert math.log2(1 + doubled) - capacity_dh_upper(m) == pytest.approx(1.0, abs=1e-6)


def test_capacity_dh_asymptote_form():
    euler = 0.5772156649015329
    assert capacity_dh_asymptotic(_dh(1, 1e3)) == pytest.approx(
        math.log2(1e3) - 2 * euler / math.log(2), rel=1e-14)
    a, b = capacity_dh_asymptotic(_dh(4, 1e3)), capacity_dh_asymptotic(_dh(4, 2e3))
    assert b - a == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("n", [2, 4])
def test_capacity_dh_asymptote_gap_at_60db(n):
    m = _dh(n, 1e6)
    assert abs(capacity_dh_asymptotic(m) - capacity_dh_quadrature(m)) <= 0.05


def test_capacity_t_closed_single_element():
    for avg in (0.5, 1.0, 30.0):
        ref = float(-mpmath.exp(1 / avg) * mpmath.ei(-1 / avg) / mpmath.log(2))
        assert capacity_t_closed(_t(1, avg)) == pytest.approx(ref, rel=1e-13)
    assert capacity_t_closed(_t(3, 1e-9)) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 64])
@pytest.mark.parametrize("avg", [1e-4, 1e-2, 1.0, 100.0, 1e6])
def test_capacity_t_closed_matches_quadrature(n, avg):
    m = _t(n, avg)
    assert capacity_t_closed(m) == pytest.approx(capacity_t_quadrature(m), rel=1e-6)


def test_capacity_t_bounds():
    assert capacity_t_upper(_t(1, 9.0)) == pytest.approx(math.log2(10.0), rel=1e-14)
    assert capacity_t_asymptotic(_t(1, 9.0)) == pytest.approx(math.log2(9.0), rel=1e-14)
    for n in (1, 2, 4, 8):
        for db in GRID:
            m = _t(n, 10 ** (db / 10))
            assert capacity_t_closed(m) <= capacity_t_upper(m)
    gaps = [capacity_t_upper(_t(n, 10.0)) - capacity_t_closed(_t(n, 10.0)) for n in (1, 2, 4, 8)]
    assert np.all(np.diff(gaps) < 0)
    a, b = capacity_t_asymptotic(_t(4, 1e3)), capacity_t_asymptotic(_t(4, 2e3))
    assert b - a == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_capacity_t_asymptote_gap_at_60db(n):
    m = _t(n, 1e6)
    assert abs(capacity_t_asymptotic(m) - capacity_t_closed(m)) <= 0.05


# -- diversity and curves -------------------------------------------------


def _window_grid():
    return np.arange(50.0, 70.1, 2.0)


def test_diversity_of_monomial_asymptote():
    grid = _window_grid()
    vals = [outage_t_asymptotic(_t(3, 10 ** (d / 10)), 100.0) for d in grid]
    curve = MetricCurve(grid, vals, Method.ASYMPTOTIC, Scheme.T, "outage", 3)
    assert diversity_order_estimate(curve, (50, 70)) == pytest.approx(3.0, abs=1e-6)


def test_diversity_of_exact_rayleigh_sum_outage():
    curve = metric_curve("outage", "T", 2, _window_grid())
    assert diversity_order_estimate(curve, (50, 70)) == pytest.approx(2.0, abs=0.05)


def test_diversity_of_dh_outage_between_n_minus_one_and_n():
    curve = metric_curve("outage", "DH", 3, _window_grid())
    assert 2.0 < diversity_order_estimate(curve, (50, 70)) < 3.0


def test_diversity_errors():
    curve = metric_curve("outage", "T", 2, _window_grid())
    with pytest.raises(ValueError):
        diversity_order_estimate(curve, (50, 52))
    rising = MetricCurve((0, 1, 2), (0.1, 0.2, 0.3), Method.CLOSED_FORM, Scheme.T, "outage")
    with pytest.raises(ValueError):
        diversity_order_estimate(rising, (0, 2))


def test_metric_curve_validation():
    with pytest.raises(ValueError):
        MetricCurve((0, 0), (0.1, 0.1), Method.CLOSED_FORM, Scheme.T, "outage")
    with pytest.raises(ValueError):
        MetricCurve((0, 1), (0.1, 1.5), Method.CLOSED_FORM, Scheme.T, "ber")
    with pytest.raises(ValueError):
        MetricCurve((0, 1), (1.0, -0.5), Method.CLOSED_FORM, Scheme.T, "capacity")
    with pytest.raises(ValueError):
        MetricCurve((0, 1, 2), (1.0, 2.0), Method.CLOSED_FORM, Scheme.T, "capacity")


def test_metric_curve_methods():
    assert metric_curve("outage", "DH", 2, GRID, method=Method.ASYMPTOTIC) is None
    assert metric_curve("ber", "DH", 2, GRID, method=Method.UPPER_BOUND) is None
    closed = metric_curve("ber", "T", 4, GRID)
    quad = metric_curve("ber", "T", 4, GRID, method="Quadrature")
    assert closed.method is Method.CLOSED_FORM and quad.method is Method.QUADRATURE
    assert closed.values == pytest.approx(quad.values, rel=1e-6)
    assert all(0 <= v <= 0.5 for v in closed.values)
    assert np.all(np.diff(closed.values) < 0)
    cap = metric_curve("capacity", "DH", 2, GRID)
    assert np.all(np.diff(cap.values) > 0)
    with pytest.raises(ValueError):
        metric_curve("snr", "T", 2, GRID)


def test_nccs_curve():
    curve = metrics.nccs_outage_curve("t", 2, GRID)
    assert curve.scheme is Scheme.NCCS
    assert np.all(np.diff(curve.values) <= 0)


def test_modulation_params_validation():
    assert (DPSK.p, DPSK.q) == (1.0, 1.0)
    with pytest.raises(ValueError):
        ModulationParams(0.0, 1.0)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_capacity_t_high_snr_offset_is_digamma_term(n):
    # E[log2 X] for a Gamma(N) law: the exact curve sits log2(e)(psi(N) - ln N) below the asymptote
    m = _t(n, 1e9)
    offset = (float(mpmath.digamma(n)) - math.log(n)) / math.log(2)
    assert capacity_t_closed(m) - capacity_t_asymptotic(m) == pytest.approx(offset, abs=1e-6)
