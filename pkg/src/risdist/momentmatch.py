"""Moments of summed channel amplitudes and the squared-K_G moment fit.

The fit matches the first three moments of W = R**2 (equivalently the even
moments 2, 4, 6 of R) against a squared-K_G (Gamma-Gamma) law, whose raw
moments are

    E[W^n] = Omega^n * Gamma(k+n) Gamma(m+n) / (Gamma(k) Gamma(m) (k m)^n).

Writing u = 1/k and v = 1/m, the normalized ratios give

    E[W^2]/E[W]^2 = (1+u)(1+v)
    E[W^3]/E[W]^3 = (1+u)(1+2u)(1+v)(1+2v)

so u and v are the roots of t^2 - s t + p with s = u+v, p = uv.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive
from .exceptions import FitError

LOG_DOMAIN_THRESHOLD = 32


@dataclass(frozen=True)
class MomentSet:
    """Raw moments ``mu[n] = E[X**n]`` for n = 0..n_max."""

    mu: tuple

    def __post_init__(self):
        mu = tuple(float(v) for v in self.mu)
        object.__setattr__(self, "mu", mu)
        if len(mu) < 1 or mu[0] != 1.0:
            raise ValueError("mu[0] must equal 1")
        if any(not (v > 0 and math.isfinite(v)) for v in mu):
            raise ValueError("moments must be positive and finite")

    @property
    def n_max(self):
        return len(self.mu) - 1

    def __getitem__(self, n):
        return self.mu[n]

    def is_log_convex(self, rtol=1e-12):
        mu = self.mu
        return all(
            mu[n - 1] * mu[n + 1] >= mu[n] ** 2 * (1 - rtol)
            for n in range(1, self.n_max)
        )

    def scaled(self, c):
        """Moments of ``c * X``."""
        return MomentSet(tuple(v * c**n for n, v in enumerate(self.mu)))


@dataclass(frozen=True)
class SaaFit:
    k_w: float
    m_w: float
    omega_w: float
    discriminant: float
    fallback_used: bool

    @property
    def exact_boundary(self):
        """True when the quadratic had a (numerically) double root."""
        return self.discriminant == 0.0


def double_rayleigh_moment(n):
    """n-th moment of the product of two unit-power Rayleigh variables."""
    if n < 0:
        raise ValueError("moment order must be >= 0")
    return math.gamma(1.0 + n / 2.0) ** 2


def double_rayleigh_moments(n_max=6):
    return MomentSet(tuple(double_rayleigh_moment(n) for n in range(n_max + 1)))


def rayleigh_moments(n_max=6):
    """Moments of a unit-power Rayleigh variable, Gamma(1 + n/2)."""
    return MomentSet(tuple(math.gamma(1.0 + n / 2.0) for n in range(n_max + 1)))


def empirical_moments(samples, n_max=6):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0 or np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("samples must be a non-empty array of finite nonnegative values")
    return MomentSet(tuple(float(np.mean(x**n)) for n in range(n_max + 1)))


def _log_binom(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _logsumexp(vals):
    top = max(vals)
    return top + math.log(math.fsum(math.exp(v - top) for v in vals))


def sum_moments(elem, n_elems, n_max=None):
    """Moments of the sum of ``n_elems`` i.i.d. copies of a variable.

    Uses the binomial recursion mu_j(n) = sum_l C(n,l) mu_{j-1}(l) mu(n-l),
    which reproduces the nested multinomial sum term by term. Above
    ``LOG_DOMAIN_THRESHOLD`` summands the recursion runs on logarithms.
    """
    n_elems = check_positive(n_elems, "n_elems", integer=True)
    if n_max is None:
        n_max = elem.n_max
    if n_max > elem.n_max:
        raise ValueError(f"element moments only known up to order {elem.n_max}")
    base = elem.mu[: n_max + 1]
    if n_elems <= LOG_DOMAIN_THRESHOLD:
        cur = list(base)
        for _ in range(n_elems - 1):
            cur = [
                math.fsum(math.comb(n, l) * cur[l] * base[n - l] for l in range(n + 1))
                for n in range(n_max + 1)
            ]
        out = cur
    else:
        log_base = [math.log(v) for v in base]
        cur = list(log_base)
        for _ in range(n_elems - 1):
            cur = [
                _logsumexp([
                    _log_binom(n, l) + cur[l] + log_base[n - l] for l in range(n + 1)
                ])
                for n in range(n_max + 1)
            ]
        try:
            out = [math.exp(v) for v in cur]
        except OverflowError:
            raise OverflowError("summed moments exceed double precision") from None
    return MomentSet(tuple(out))


def fit_saa(moments):
    """Fit squared-K_G shaping parameters to moments of the amplitude R.

    Complex-conjugate reciprocal roots (negative discriminant) fall back to
    k_w = m_w = 1/sqrt(p), the common modulus.
    """
    if moments.n_max < 6:
        raise ValueError("fit_saa needs moments up to order 6")
    m2, m4, m6 = moments[2], moments[4], moments[6]
    ratio2 = m4 / m2**2
    ratio3 = m6 / m2**3
    s = (4.0 * ratio2 - 3.0 - ratio3 / ratio2) / 2.0
    p = ratio2 - 1.0 - s
    if s <= 0 or p <= 0:
        raise FitError(
            f"moments incompatible with a squared-K_G law (s={s:.6g}, p={p:.6g})"
        )
    disc = s * s - 4.0 * p
    if disc < 0:
        k = m = 1.0 / math.sqrt(p)
        return SaaFit(k, m, m2, disc, True)
    root = math.sqrt(disc)
    u_big = (s + root) / 2.0
    # p / u_big avoids cancellation in (s - root) / 2
    u_small = p / u_big
    return SaaFit(1.0 / u_small, 1.0 / u_big, m2, disc, False)


def squared_kg_moment(fit, n):
    """E[W**n] for a squared-K_G variate with the given parameters."""
    k, m, om = fit.k_w, fit.m_w, fit.omega_w
    return math.exp(
        n * math.log(om / (k * m))
        + math.lgamma(k + n) - math.lgamma(k)
        + math.lgamma(m + n) - math.lgamma(m)
    )
