"""Outage probability, average BER and average capacity.

Every closed form has a quadrature twin built from the generic integrals

    BER = q^p / (2 Gamma(p)) * int_0^inf exp(-q g) g^(p-1) F(g) dg
    C   = 1/ln 2 * int_0^inf (1 - F(g)) / (1 + g) dg

plus the high-SNR asymptotes and Jensen upper bounds where they exist.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from mpmath.ctx_mp import MPContext

from . import _meijer, special
from ._validation import check_positive, db_to_linear
from .channelmodels import (
    KeyholeModel,
    NccsModel,
    RisDhModel,
    RisTModel,
    SquaredKGModel,
)
from .exceptions import ConvergenceError
from .quadrature import integrate_semi_infinite
from .special import EvalAccuracy

METRIC_QUAD_ACCURACY = EvalAccuracy(rel_tol=1e-10, abs_tol=1e-300)
_LOG2 = math.log(2.0)
_LOG2E = 1.0 / _LOG2


class Method(str, enum.Enum):
    CLOSED_FORM = "ClosedForm"
    QUADRATURE = "Quadrature"
    ASYMPTOTIC = "Asymptotic"
    UPPER_BOUND = "UpperBound"
    MONTE_CARLO = "MonteCarlo"


class Scheme(str, enum.Enum):
    DH = "DH"
    T = "T"
    KEYHOLE = "Keyhole"
    NCCS = "NCCS"


@dataclass(frozen=True)
class ModulationParams:
    """(p, q) pair of the unified binary-modulation BER integral."""

    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        check_positive(self.p, "p")
        check_positive(self.q, "q")


DPSK = ModulationParams(1.0, 1.0)


@dataclass(frozen=True)
class MetricCurve:
    snr_grid_db: tuple
    values: tuple
    method: Method
    scheme: Scheme
    metric: str = ""
    n_elems: int = 0
    fallback_points: tuple = field(default=())

    def __post_init__(self):
        grid = tuple(float(v) for v in self.snr_grid_db)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "snr_grid_db", grid)
        object.__setattr__(self, "values", vals)
        if len(grid) != len(vals):
            raise ValueError("grid and values differ in length")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("snr grid must be strictly increasing")
        if self.metric in {"outage", "ber"} and any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.metric == "capacity" and any(v < 0 for v in vals):
            raise ValueError("capacity must be >= 0")


# -- outage ---------------------------------------------------------------


def outage_dh(model, gamma_th, method="auto"):
    check_positive(gamma_th, "gamma_th")
    return model.cdf(gamma_th, method=method)


def outage_t(model, gamma_th):
    check_positive(gamma_th, "gamma_th")
    return model.cdf(gamma_th)


def outage_t_asymptotic(model, gamma_th):
    """gamma_th^N / ((B avg)^N N!), an upper bound on the exact outage."""
    check_positive(gamma_th, "gamma_th")
    n = model.n_elems
    return math.exp(n * math.log(gamma_th / model.scale_) - math.lgamma(n + 1))


# -- BER ------------------------------------------------------------------


def ber_unified_quadrature(cdf, mod=DPSK, acc=METRIC_QUAD_ACCURACY):
    """Average BER of the (p, q) family from a vectorized CDF callable."""
    p, q = mod.p, mod.q
    log_pref = p * math.log(q) - _LOG2 - math.lgamma(p)

    def integrand(g):
        with np.errstate(divide="ignore", under="ignore"):
            w = np.exp(log_pref - q * g + (p - 1.0) * np.log(g))
        w = np.where(g > 0, w, 0.0)
        out = np.zeros_like(g)
        live = w > 0
        if live.any():
            out[live] = w[live] * np.asarray(cdf(g[live]))
        return out

    res = integrate_semi_infinite(integrand, 0.0, acc)
    return min(max(res.value, 0.0), 0.5)


def ber_dh_closed(model, mod=DPSK, *, fallback=True):
    """Meijer-G BER of a squared-K_G model at argument Xi^2/(avg q)."""
    x = model.xi_tilde_sq_ / mod.q
    try:
        return _meijer.gkg_ber(model.k_, model.m_, mod.p, x)[0]
    except ConvergenceError:
        if not fallback:
            raise
        return ber_dh_quadrature(model, mod)


def ber_dh_quadrature(model, mod=DPSK, acc=METRIC_QUAD_ACCURACY):
    return ber_unified_quadrature(lambda g: model.cdf(g, method="quad"), mod, acc)


def ber_t_closed(model, mod=DPSK):
    """Finite-sum BER of the Gamma model.

    The sum's terms are the pmf of a negative binomial count, so when they
    add up to nearly one the complementary tail is summed instead of
    subtracting from 1/2.
    """
    n, p, q = model.n_elems, mod.p, mod.q
    theta = model.scale_
    log_r = -math.log1p(q * theta)  # 1 / (1 + q theta)
    log_1mr = math.log(q * theta) + log_r

    def log_term(k):
        return (math.lgamma(p + k) - math.lgamma(p) - math.lgamma(k + 1)
                + p * log_1mr + k * log_r)

    head = math.fsum(math.exp(log_term(k)) for k in range(n))
    if head < 0.9:
        return min(max(0.5 * (1.0 - head), 0.0), 0.5)
    r = math.exp(log_r)
    term = math.exp(log_term(n))
    tail = 0.0
    k = n
    while term > 0:
        tail += term
        ratio = (p + k) / (k + 1) * r
        if ratio < 1 and term * ratio / (1 - ratio) <= 1e-17 * tail:
            break
        term *= ratio
        k += 1
        if k - n > 1_000_000:
            raise ConvergenceError("ber_t_closed tail series did not converge")
    return min(max(0.5 * tail, 0.0), 0.5)


def ber_t_quadrature(model, mod=DPSK, acc=METRIC_QUAD_ACCURACY):
    return ber_unified_quadrature(model.cdf, mod, acc)


def ber_t_asymptotic(model, mod=DPSK):
    """Gamma(p+N) / (2 Gamma(p) (B q avg)^N N!)."""
    n, p, q = model.n_elems, mod.p, mod.q
    return math.exp(
        math.lgamma(p + n) - _LOG2 - math.lgamma(p)
        - n * math.log(q * model.scale_) - math.lgamma(n + 1)
    )


# -- capacity -------------------------------------------------------------


def capacity_from_ccdf(ccdf, acc=METRIC_QUAD_ACCURACY, *, scale=1.0):
    """Average capacity (bits/s/Hz) from a vectorized complementary CDF.

    ``scale`` (typically the mean SNR) sets the variable map of the
    semi-infinite integral.
    """
    res = integrate_semi_infinite(
        lambda g: np.asarray(ccdf(g)) / (1.0 + g), 0.0, acc, scale=scale
    )
    return max(res.value / _LOG2, 0.0)


def capacity_dh_closed(model, *, fallback=True):
    """Meijer-G capacity of a squared-K_G model at argument Xi^2 / avg."""
    try:
        return _meijer.gkg_capacity(model.k_, model.m_, model.xi_tilde_sq_)[0]
    except ConvergenceError:
        if not fallback:
            raise
        return capacity_dh_quadrature(model)


def capacity_dh_quadrature(model, acc=METRIC_QUAD_ACCURACY):
    return capacity_from_ccdf(lambda g: model.ccdf(g, method="quad"), acc,
                              scale=model.mean())


def capacity_dh_upper(model):
    """Jensen bound log2(1 + Omega avg)."""
    return math.log2(1.0 + model.omega_ * model.avg_snr)


def capacity_dh_asymptotic(model):
    """log2(avg) + 2 log2(e) psi(N)."""
    return math.log2(model.avg_snr) + 2.0 * _LOG2E * special.digamma(float(model.n_elems))


def _capacity_t_terms(n, theta, exp_ei):
    terms = []
    for k in range(n):
        log_den = k * math.log(theta) + math.lgamma(k + 1)
        for m in range(1, k + 1):
            sign = -1.0 if (k - m) % 2 else 1.0
            terms.append(sign * math.exp(math.lgamma(m) + m * math.log(theta) - log_den))
        sign = -1.0 if (k - 1) % 2 else 1.0
        terms.append(sign * exp_ei * math.exp(-log_den))
    return terms


def _capacity_t_mp(n, theta, dps):
    mp = MPContext()
    mp.dps = dps
    th = mp.mpf(theta)
    exp_ei = mp.exp(1 / th) * mp.ei(-1 / th)
    total = mp.mpf(0)
    for k in range(n):
        den = th**k * mp.factorial(k)
        for m in range(1, k + 1):
            total += mp.factorial(m - 1) * (-1) ** (k - m) * th**m / den
        total += (-1) ** (k - 1) * exp_ei / den
    return total


def _capacity_t_extended(n, theta, big):
    """Sum at increasing precision until two successive results agree."""
    dps = max(30, int(math.log10(max(big, 1.0))) + 30)
    prev = _capacity_t_mp(n, theta, dps)
    for _ in range(8):
        dps *= 2
        cur = _capacity_t_mp(n, theta, dps)
        if abs(cur - prev) <= 1e-17 * abs(cur):
            return float(cur)
        prev = cur
    raise ConvergenceError("capacity_t_closed: extended-precision sum did not settle")


def capacity_t_closed(model):
    """Double-sum plus exponential-integral capacity of the Gamma model.

    Evaluated in double precision when the alternating terms do not cancel
    badly; otherwise the same expression is summed in extended precision.
    """
    n, theta = model.n_elems, model.scale_
    inv = 1.0 / theta
    # e^{1/theta} Ei(-1/theta) = -e^{t} E1(t)
    exp_ei = -special.scaled_exp_integral_e1(inv)
    terms = _capacity_t_terms(n, theta, exp_ei)
    total = math.fsum(terms)
    big = max(abs(t) for t in terms)
    if total <= 0 or big * 1e-14 > 1e-12 * total:
        total = _capacity_t_extended(n, theta, big)
    return max(total / _LOG2, 0.0)


def capacity_t_quadrature(model, acc=METRIC_QUAD_ACCURACY):
    return capacity_from_ccdf(model.ccdf, acc, scale=model.mean())


def capacity_t_upper(model):
    """Jensen bound log2(1 + B N avg)."""
    return math.log2(1.0 + model.b_const_ * model.n_elems * model.avg_snr)


def capacity_t_asymptotic(model):
    """log2(avg) + log2(B N)."""
    return math.log2(model.avg_snr) + math.log2(model.b_const_ * model.n_elems)


# -- diversity ------------------------------------------------------------


def diversity_order_estimate(curve, window_db):
    """Least-squares slope of -log10(value) against log10(avg SNR) in a window."""
    lo, hi = window_db
    grid = np.asarray(curve.snr_grid_db)
    vals = np.asarray(curve.values)
    inside = (grid >= lo) & (grid <= hi)
    if inside.sum() < 3:
        raise ValueError(f"window {window_db} holds fewer than 3 grid points")
    x = grid[inside] / 10.0
    y = vals[inside]
    if np.any(y <= 0):
        raise ValueError("curve values must be strictly positive in the window")
    if np.any(np.diff(y) >= 0):
        raise ValueError("curve values must be decreasing in the window")
    slope = np.polyfit(x, -np.log10(y), 1)[0]
    return float(slope)


# -- curves ---------------------------------------------------------------

_SCHEME_MODELS = {
    Scheme.DH: RisDhModel,
    Scheme.T: RisTModel,
    Scheme.KEYHOLE: KeyholeModel,
}


def build_model(scheme, n_elems, avg_snr):
    scheme = Scheme(scheme)
    if scheme is Scheme.NCCS:
        raise ValueError("use NccsModel directly; it needs the underlying scheme")
    return _SCHEME_MODELS[scheme](n_elems=n_elems, avg_snr=avg_snr).fit()


def metric_value(metric, scheme, model, method, gamma_th=100.0, mod=DPSK):
    """One metric value and the method that actually produced it (None if n/a)."""
    kg = isinstance(model, SquaredKGModel)
    if metric == "outage":
        if method is Method.CLOSED_FORM:
            if kg:
                try:
                    return model.cdf(gamma_th, method="closed"), Method.CLOSED_FORM
                except ConvergenceError:
                    return model.cdf(gamma_th, method="quad"), Method.QUADRATURE
            return model.cdf(gamma_th), Method.CLOSED_FORM
        if method is Method.QUADRATURE:
            if kg:
                return model.cdf(gamma_th, method="quad"), Method.QUADRATURE
            return None, None
        if method is Method.ASYMPTOTIC and scheme is Scheme.T:
            return outage_t_asymptotic(model, gamma_th), Method.ASYMPTOTIC
        return None, None
    if metric == "ber":
        if method is Method.CLOSED_FORM:
            if kg:
                try:
                    return ber_dh_closed(model, mod, fallback=False), Method.CLOSED_FORM
                except ConvergenceError:
                    return ber_dh_quadrature(model, mod), Method.QUADRATURE
            return ber_t_closed(model, mod), Method.CLOSED_FORM
        if method is Method.QUADRATURE:
            fn = ber_dh_quadrature if kg else ber_t_quadrature
            return fn(model, mod), Method.QUADRATURE
        if method is Method.ASYMPTOTIC and scheme is Scheme.T:
            return ber_t_asymptotic(model, mod), Method.ASYMPTOTIC
        return None, None
    if metric == "capacity":
        if method is Method.CLOSED_FORM:
            if kg:
                try:
                    return capacity_dh_closed(model, fallback=False), Method.CLOSED_FORM
                except ConvergenceError:
                    return capacity_dh_quadrature(model), Method.QUADRATURE
            return capacity_t_closed(model), Method.CLOSED_FORM
        if method is Method.QUADRATURE:
            fn = capacity_dh_quadrature if kg else capacity_t_quadrature
            return fn(model), Method.QUADRATURE
        if method is Method.ASYMPTOTIC:
            fn = capacity_t_asymptotic if scheme is Scheme.T else capacity_dh_asymptotic
            return fn(model), Method.ASYMPTOTIC
        if method is Method.UPPER_BOUND:
            fn = capacity_t_upper if scheme is Scheme.T else capacity_dh_upper
            return fn(model), Method.UPPER_BOUND
        return None, None
    raise ValueError(f"unknown metric {metric!r}")


def metric_curve(metric, scheme, n_elems, snr_grid_db, *, gamma_th=100.0, mod=DPSK,
                 method=Method.CLOSED_FORM):
    """Evaluate one metric over an average-SNR grid given in dB.

    Returns None when the (metric, scheme, method) combination has no
    formula, e.g. an asymptote for the RIS-DH outage. Closed-form points
    that had to fall back to quadrature are listed in ``fallback_points``.
    """
    scheme = Scheme(scheme)
    method = Method(method)
    grid = tuple(float(v) for v in snr_grid_db)
    values, fallbacks = [], []
    for i, avg in enumerate(db_to_linear(grid)):
        if scheme is Scheme.NCCS:
            raise ValueError("NCCS curves are built with nccs_outage_curve")
        model = build_model(scheme, n_elems, float(avg))
        val, used = metric_value(metric, scheme, model, method, gamma_th, mod)
        if val is None:
            return None
        if used is not method:
            fallbacks.append(i)
        values.append(val)
    return MetricCurve(grid, values, method, scheme, metric, n_elems, tuple(fallbacks))


def nccs_outage_curve(base_scheme, n_elems, snr_grid_db, *, gamma_th=100.0):
    grid = tuple(float(v) for v in snr_grid_db)
    values = [
        NccsModel(n_elems, float(avg), base_scheme).fit().cdf(gamma_th)
        for avg in db_to_linear(grid)
    ]
    return MetricCurve(grid, values, Method.CLOSED_FORM, Scheme.NCCS, "outage", n_elems)
