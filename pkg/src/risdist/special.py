"""Scalar special functions used by the channel models and metrics.

Each function accepts a float or an array and returns the same kind. Domain
violations raise ``ValueError``; results that cannot be represented raise
``OverflowError`` instead of leaking ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .exceptions import ConvergenceError

_EPS = np.finfo(float).eps
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class EvalAccuracy:
    """Relative tolerance with an absolute floor."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-300

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be >= 0")

    def scaled(self, factor):
        return EvalAccuracy(self.rel_tol * factor, self.abs_tol * factor)


def _arr(x, name):
    a = np.asarray(x, dtype=float)
    if np.any(np.isnan(a)):
        raise ValueError(f"{name} must not be NaN")
    return a


def _ret(a, like):
    return float(a) if np.ndim(like) == 0 else a


def _no_overflow(a, what):
    if np.any(np.isinf(a)):
        raise OverflowError(f"{what} overflows double precision")
    return a


def gamma_fn(x):
    x_ = _arr(x, "x")
    if np.any(x_ <= 0):
        raise ValueError("gamma_fn requires x > 0")
    return _ret(_no_overflow(_sp.gamma(x_), "gamma"), x)


def ln_gamma(x):
    x_ = _arr(x, "x")
    if np.any(x_ <= 0):
        raise ValueError("ln_gamma requires x > 0")
    return _ret(_sp.gammaln(x_), x)


def digamma(x):
    x_ = _arr(x, "x")
    if np.any(x_ <= 0):
        raise ValueError("digamma requires x > 0")
    return _ret(_sp.psi(x_), x)


def bessel_k(nu, x):
    """Modified Bessel function of the second kind, real order.

    Negative orders are folded onto ``|nu|`` (K is even in its order).
    """
    nu_ = np.abs(_arr(nu, "nu"))
    x_ = _arr(x, "x")
    if np.any(x_ <= 0):
        raise ValueError("bessel_k requires x > 0")
    out = _no_overflow(_sp.kv(nu_, x_), "bessel_k")
    return float(out) if np.ndim(out) == 0 else out


def log_bessel_k(nu, x):
    """``log K_nu(x)`` without under- or overflow."""
    nu_ = np.abs(_arr(nu, "nu"))
    x_ = _arr(x, "x")
    if np.any(x_ <= 0):
        raise ValueError("log_bessel_k requires x > 0")
    scalar = nu_.ndim == 0 and x_.ndim == 0
    nu_, x_ = (np.atleast_1d(v) for v in np.broadcast_arrays(nu_, x_))
    with np.errstate(divide="ignore", over="ignore"):
        out = np.log(_sp.kve(nu_, x_)) - x_
    bad = ~np.isfinite(out)
    if np.any(bad):
        # small-argument limit K_nu(x) ~ Gamma(nu)/2 (2/x)^nu, nu > 0
        nb, xb = nu_[bad], x_[bad]
        if np.any(nb == 0):
            raise OverflowError("log_bessel_k: K_0 out of range")
        out[bad] = _sp.gammaln(nb) - math.log(2.0) + nb * np.log(2.0 / xb)
    return float(out[0]) if scalar else out


def reg_lower_inc_gamma(n, x):
    """Regularized lower incomplete gamma P(n, x)."""
    n_ = _arr(n, "n")
    x_ = _arr(x, "x")
    if np.any(n_ <= 0) or np.any(x_ < 0):
        raise ValueError("reg_lower_inc_gamma requires n > 0 and x >= 0")
    out = _sp.gammainc(n_, x_)
    return float(out) if np.ndim(out) == 0 else out


def exp_integral_ei(x):
    """Exponential integral Ei(x) for x < 0, i.e. -E1(-x)."""
    x_ = _arr(x, "x")
    if np.any(x_ >= 0):
        raise ValueError("exp_integral_ei is only provided for x < 0")
    return _ret(_sp.expi(x_), x)


def scaled_exp_integral_e1(t):
    """``exp(t) * E1(t)`` for t > 0, stable for large t."""
    t_ = _arr(t, "t")
    if np.any(t_ <= 0):
        raise ValueError("scaled_exp_integral_e1 requires t > 0")
    t_ = np.atleast_1d(t_)
    out = np.empty_like(t_)
    small = t_ <= 500.0
    out[small] = np.exp(t_[small]) * _sp.exp1(t_[small])
    for i in np.flatnonzero(~small):
        # asymptotic series, truncated at its smallest term
        tv = t_[i]
        term, acc, k = 1.0, 1.0, 0
        while True:
            k += 1
            nxt = -term * k / tv
            if abs(nxt) >= abs(term) or abs(nxt) < _EPS * abs(acc):
                break
            acc += nxt
            term = nxt
        out[i] = acc / tv
    return float(out[0]) if np.ndim(t) == 0 else out


def erfc(x):
    x_ = _arr(x, "x")
    return _ret(_sp.erfc(x_), x)


def marcum_q_half(a, b):
    """Generalized Marcum Q of order 1/2, via the closed erfc identity."""
    a_ = _arr(a, "a")
    b_ = _arr(b, "b")
    if np.any(a_ < 0) or np.any(b_ < 0):
        raise ValueError("marcum_q_half requires a >= 0 and b >= 0")
    out = 0.5 * (_sp.erfc((b_ - a_) / _SQRT2) + _sp.erfc((b_ + a_) / _SQRT2))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def marcum_p_half(a, b):
    """``1 - Q_{1/2}(a, b)`` evaluated without the subtraction from one."""
    a_ = _arr(a, "a")
    b_ = _arr(b, "b")
    if np.any(a_ < 0) or np.any(b_ < 0):
        raise ValueError("marcum_p_half requires a >= 0 and b >= 0")
    out = 0.5 * (_sp.erfc((a_ - b_) / _SQRT2) - _sp.erfc((a_ + b_) / _SQRT2))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def _is_nonpos_int(v):
    return v <= 0 and float(v).is_integer()


def _tail_ratio_bound(a, dens, z, k):
    """Upper bound on every term ratio from index k on (k beyond all parameters).

    Each numerator (a_i + k) is paired with a denominator (d_i + k); such a
    quotient moves monotonically toward 1 as k grows, so max(1, current)
    bounds it. Unpaired denominators only shrink the ratio.
    """
    bound = abs(z)
    for v, d in zip(a, dens):
        bound *= max(1.0, (v + k) / (d + k))
    for d in dens[len(a):]:
        bound /= d + k
    return bound


def hyp_pfq(a, b, z, *, rel_tol=1e-10, max_terms=10_000):
    """Generalized hypergeometric series pFq(a; b; z) by direct summation, p <= q + 1.

    Summation stops once a rigorous geometric bound on the remaining tail
    drops below machine precision. Raises ConvergenceError when that does
    not happen within ``max_terms`` terms or when cancellation between
    terms eats the requested ``rel_tol``.
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    z = float(z)
    if len(a) > len(b) + 1:
        raise ValueError("hyp_pfq supports p <= q + 1 only")
    if any(_is_nonpos_int(v) for v in b):
        raise ValueError("lower parameters must not be non-positive integers")
    if z == 0.0:
        return 1.0
    terminating = any(_is_nonpos_int(v) for v in a)
    dens = [1.0] + b  # the j! factor pairs like a lower parameter equal to 1
    k_safe = max(abs(v) for v in a + dens) + 1.0
    term = 1.0
    total = 1.0
    big = 1.0
    for j in range(max_terms):
        num = z
        for v in a:
            num *= v + j
        den = j + 1.0
        for v in b:
            den *= v + j
        term *= num / den
        if not math.isfinite(term):
            raise ConvergenceError("hyp_pfq: term overflow")
        total += term
        mag = abs(term)
        big = max(big, mag)
        if terminating and term == 0.0:
            break
        k = j + 1.0
        if k >= k_safe:
            r = _tail_ratio_bound(a, dens, z, k)
            if r < 1.0 and mag * r / (1.0 - r) <= _EPS * abs(total):
                break
    else:
        raise ConvergenceError(f"hyp_pfq: no convergence within {max_terms} terms")
    if total == 0.0 or big * _EPS > rel_tol * abs(total):
        raise ConvergenceError("hyp_pfq: cancellation exceeds requested accuracy")
    return total


def hyp_1f2(a, b1, b2, z, *, rel_tol=1e-10, max_terms=10_000, z_max=100.0):
    """Hypergeometric 1F2(a; b1, b2; z) for z >= 0 below a divergence guard."""
    if z < 0:
        raise ValueError("hyp_1f2 requires z >= 0")
    if z > z_max:
        raise ConvergenceError(f"hyp_1f2: z={z} beyond series guard {z_max}")
    return hyp_pfq([a], [b1, b2], z, rel_tol=rel_tol, max_terms=max_terms)
