"""The three Meijer-G patterns behind the squared-K_G closed forms.

When the poles of the leading gamma factors are simple (no two of b_1..b_m
closer than ``POLE_GAP`` to an integer apart) the function is the residue
sum

    G = sum_h  C_h z^{b_h} pF_{q-1}(1 + b_h - a; 1 + b_h - b_{j != h}; (-1)^{p-m-n} z)

evaluated with ``special.hyp_1f2`` / ``special.hyp_pfq``. Coincident poles
(always present in the capacity pattern, and for every fallback fit with
k_w = m_w) are delegated to mpmath, which resolves them by parameter
perturbation at raised precision.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from mpmath.ctx_mp import MPContext
from scipy import special as _sp

from . import special
from .exceptions import ConvergenceError

POLE_GAP = 1e-3
SERIES_Z_MAX = 100.0
_MAXPREC = 1000

_mp = MPContext()
_mp.dps = 15


def _near_integer(d):
    return abs(d - round(d)) < POLE_GAP


def degenerate(bm):
    return any(
        _near_integer(bm[i] - bm[j]) for i in range(len(bm)) for j in range(i)
    )


def _pole_series(an, ap, bm, bq, z, log_norm, rel_tol):
    p = len(an) + len(ap)
    sign_z = -1.0 if (p - len(bm) - len(an)) % 2 else 1.0
    a_all = list(an) + list(ap)
    terms = []
    for h, bh in enumerate(bm):
        others = [b for j, b in enumerate(bm) if j != h] + list(bq)
        num_args = [b - bh for j, b in enumerate(bm) if j != h] + [1 + bh - a for a in an]
        den_args = [1 + bh - b for b in bq] + [a - bh for a in ap]
        if any(v <= 0 and float(v).is_integer() for v in num_args):
            raise ConvergenceError("pole of a numerator gamma factor")
        if any(v <= 0 and float(v).is_integer() for v in den_args):
            continue  # 1/Gamma(non-positive integer) = 0
        log_c = sum(_sp.gammaln(v) for v in num_args) - sum(_sp.gammaln(v) for v in den_args)
        sgn = np.prod([_sp.gammasgn(v) for v in num_args]) * np.prod(
            [_sp.gammasgn(v) for v in den_args]
        )
        upper = [1 + bh - a for a in a_all]
        lower = [1 + bh - b for b in others]
        zz = sign_z * z
        if len(upper) == 1 and len(lower) == 2 and zz >= 0:
            series = special.hyp_1f2(upper[0], lower[0], lower[1], zz,
                                     rel_tol=rel_tol, z_max=SERIES_Z_MAX)
        else:
            if abs(zz) > SERIES_Z_MAX:
                raise ConvergenceError("pole series argument beyond guard")
            series = special.hyp_pfq(upper, lower, zz, rel_tol=rel_tol)
        log_mag = log_c + bh * math.log(z) - log_norm
        terms.append(sgn * math.exp(log_mag) * series if log_mag > -745 else 0.0)
    total = math.fsum(terms)
    big = max((abs(t) for t in terms), default=0.0)
    if big > 0 and big * 1e3 * np.finfo(float).eps > rel_tol * abs(total):
        raise ConvergenceError("pole series terms cancel beyond requested accuracy")
    return total


def _mp_eval(an, ap, bm, bq, z, log_norm):
    try:
        val = _mp.meijerg([list(an), list(ap)], [list(bm), list(bq)], z,
                          maxprec=_MAXPREC)
    except (ValueError, ZeroDivisionError, mpmath.libmp.NoConvergence) as exc:
        raise ConvergenceError(f"Meijer-G evaluation failed: {exc}") from None
    out = float(_mp.re(val) * _mp.exp(-log_norm))
    if not math.isfinite(out):
        raise ConvergenceError("Meijer-G evaluation returned a non-finite value")
    return out


def meijer_g(an, ap, bm, bq, z, *, log_norm=0.0, rel_tol=1e-10):
    """``exp(-log_norm) * G^{m,n}_{p,q}(z)`` with p < q, plus the route taken."""
    if z <= 0:
        raise ValueError("z must be > 0")
    if not degenerate(bm):
        try:
            return _pole_series(an, ap, bm, bq, z, log_norm, rel_tol), "series"
        except ConvergenceError:
            pass
    return _mp_eval(an, ap, bm, bq, z, log_norm), "mpmath"


def _log_gamma_pair(k, m):
    return math.lgamma(k) + math.lgamma(m)


def gkg_cdf(k, m, z):
    """CDF of a squared-K_G variate at normalized argument z = k m x / Omega."""
    if z == 0:
        return 0.0, "exact"
    val, route = meijer_g([1.0], [], [k, m], [0.0], z, log_norm=_log_gamma_pair(k, m))
    return min(max(val, 0.0), 1.0), route


def gkg_ber(k, m, p, x):
    """G^{2,2}_{2,3}(x | 1-p, 1; k, m, 0) / (2 Gamma(p) Gamma(k) Gamma(m))."""
    log_norm = math.log(2.0) + math.lgamma(p) + _log_gamma_pair(k, m)
    val, route = meijer_g([1.0 - p, 1.0], [], [k, m], [0.0], x, log_norm=log_norm)
    return min(max(val, 0.0), 0.5), route


def gkg_capacity(k, m, x):
    """G^{4,1}_{2,4}(x | 0, 1; 0, 0, k, m) / (Gamma(k) Gamma(m) ln 2)."""
    log_norm = _log_gamma_pair(k, m) + math.log(math.log(2.0))
    val, route = meijer_g([0.0], [1.0], [0.0, 0.0, k, m], [], x, log_norm=log_norm)
    return max(val, 0.0), route
