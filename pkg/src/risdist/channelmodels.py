"""SNR distributions for RIS-aided links, as scikit-learn style estimators.

Each model is configured through constructor parameters (``get_params`` /
``set_params`` work as usual), and ``fit`` derives the distribution
constants. A fitted model exposes ``pdf``, ``cdf`` and ``ccdf`` over the
instantaneous SNR (linear scale), ``transform`` (the probability integral
transform) and ``score_samples`` (log-density).

>>> model = RisTModel(n_elems=4, avg_snr=10.0).fit()
>>> round(model.cdf(40.0 * model.b_const_), 6)
0.56653
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import _meijer, special
from ._validation import as_output, check_positive, check_snr
from .exceptions import ConvergenceError
from .momentmatch import (
    SaaFit,
    double_rayleigh_moments,
    empirical_moments,
    fit_saa,
    sum_moments,
)
from .quadrature import integrate_intervals
from .special import EvalAccuracy

CDF_QUAD_ACCURACY = EvalAccuracy(rel_tol=1e-11, abs_tol=1e-300)
_LOG2 = math.log(2.0)


def chi_pdf(r):
    """Density 4 r K_0(2 r) of the product of two unit-power Rayleigh variables."""
    r_, scalar = check_snr(r, strict=True, name="r")
    return as_output(4.0 * r_ * special.bessel_k(0.0, 2.0 * r_), scalar)


class SnrDistribution(BaseEstimator):
    """Shared plumbing for the SNR laws: array handling and the sklearn surface."""

    def _check_fitted(self):
        check_is_fitted(self)

    def logpdf(self, gamma):
        self._check_fitted()
        g, scalar = check_snr(gamma)
        out = np.full(g.shape, -np.inf)
        pos = g > 0
        if np.any(pos):
            out[pos] = self._logpdf(g[pos])
        return as_output(out, scalar)

    def pdf(self, gamma):
        with np.errstate(under="ignore"):
            out = np.exp(np.asarray(self.logpdf(gamma)))
        return as_output(out, np.ndim(gamma) == 0)

    def cdf(self, gamma):
        self._check_fitted()
        g, scalar = check_snr(gamma)
        return as_output(np.clip(self._cdf(g), 0.0, 1.0), scalar)

    def ccdf(self, gamma, **kwargs):
        out = 1.0 - np.asarray(self.cdf(gamma, **kwargs))
        return as_output(out, np.ndim(gamma) == 0)

    def mean(self):
        raise NotImplementedError

    def transform(self, X):
        """Map SNR samples through the model CDF."""
        X = check_array(X, ensure_2d=False, dtype=float)
        return np.asarray(self.cdf(X), dtype=float)

    def score_samples(self, X):
        X = check_array(X, ensure_2d=False, dtype=float)
        return np.asarray(self.logpdf(X), dtype=float)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))


class SquaredKGModel(SnrDistribution):
    """Squared-K_G (Gamma-Gamma) SNR law with explicit shaping parameters.

    Parameters
    ----------
    shape_k, shape_m : float
        Shaping parameters, both > 0. The law is symmetric in the pair.
    omega : float
        Mean of the normalized power W, so that E[gamma] = omega * avg_snr.
    avg_snr : float
        Average SNR, linear scale.
    """

    def __init__(self, shape_k=1.0, shape_m=1.0, omega=1.0, avg_snr=1.0):
        self.shape_k = shape_k
        self.shape_m = shape_m
        self.omega = omega
        self.avg_snr = avg_snr

    def fit(self, X=None, y=None):
        k = check_positive(self.shape_k, "shape_k")
        m = check_positive(self.shape_m, "shape_m")
        self._set_shape(max(k, m), min(k, m), check_positive(self.omega, "omega"))
        return self

    def _set_shape(self, k, m, omega):
        avg = check_positive(self.avg_snr, "avg_snr")
        self.k_ = float(k)
        self.m_ = float(m)
        self.omega_ = float(omega)
        self.xi_tilde_sq_ = self.k_ * self.m_ / (avg * self.omega_)

    def mean(self):
        self._check_fitted()
        return self.omega_ * self.avg_snr

    def _logpdf(self, g):
        k, m, xi_sq = self.k_, self.m_, self.xi_tilde_sq_
        arg = 2.0 * np.sqrt(xi_sq * g)
        return (
            _LOG2
            + 0.5 * (k + m) * math.log(xi_sq)
            + (0.5 * (k + m) - 1.0) * np.log(g)
            + special.log_bessel_k(k - m, arg)
            - math.lgamma(k)
            - math.lgamma(m)
        )

    def cdf(self, gamma, method="auto"):
        """CDF through the Meijer-G closed form, pdf quadrature, or both.

        ``method="closed"`` raises ConvergenceError if the closed form cannot
        be evaluated; ``"auto"`` falls back to quadrature for those points.
        """
        self._check_fitted()
        g, scalar = check_snr(gamma)
        if method not in {"auto", "closed", "quad"}:
            raise ValueError(f"unknown method {method!r}")
        flat = np.atleast_1d(g).ravel()
        out = np.empty_like(flat)
        todo = np.ones(flat.size, dtype=bool)
        if method in {"auto", "closed"}:
            for i, v in enumerate(flat):
                try:
                    out[i] = self._cdf_closed(v)
                    todo[i] = False
                except ConvergenceError:
                    if method == "closed":
                        raise
        if todo.any():
            out[todo] = self._cdf_quad(flat[todo])
        out = np.clip(out, 0.0, 1.0).reshape(np.shape(g))
        return as_output(out, scalar)

    def cdf_route(self, gamma):
        """Which evaluation path the closed form takes at ``gamma``."""
        self._check_fitted()
        return _meijer.gkg_cdf(self.k_, self.m_, self.xi_tilde_sq_ * float(gamma))[1]

    def _cdf_closed(self, g):
        return _meijer.gkg_cdf(self.k_, self.m_, self.xi_tilde_sq_ * g)[0]

    def _cdf_quad(self, g, acc=CDF_QUAD_ACCURACY):
        g = np.asarray(g, dtype=float)
        # geometric breakpoints around the mean keep far-out targets from
        # skipping the bulk of the mass
        aux = self.mean() * np.exp2(np.arange(-60, 61, 2))
        aux = aux[aux < g.max()]
        pts = np.concatenate([g, aux])
        order = np.argsort(pts, kind="stable")
        edges = np.concatenate([[0.0], pts[order]])
        pieces, _ = integrate_intervals(lambda x: np.exp(self._logpdf(x)), edges, acc)
        cum = np.empty_like(pts)
        cum[order] = np.cumsum(pieces)
        return cum[: g.size]

    def sample(self, n_samples, random_state=None):
        """Draw SNR values using W = Omega/(k m) * X * Y with X, Y Gamma."""
        self._check_fitted()
        rng = np.random.default_rng(random_state)
        x = rng.gamma(self.k_, size=n_samples)
        y = rng.gamma(self.m_, size=n_samples)
        return self.avg_snr * self.omega_ / (self.k_ * self.m_) * x * y


class RisDhModel(SquaredKGModel):
    """Dual-hop RIS link: squared-K_G fit to the SNR of (sum_i a_i b_i)^2.

    ``fit()`` with no data matches the analytic moments of the sum of
    ``n_elems`` double-Rayleigh amplitudes. Passing amplitude samples ``X``
    fits their empirical moments instead.

    Attributes
    ----------
    fit_ : SaaFit
    moments_ : MomentSet
        Moments of the amplitude R the fit was matched to.
    xi_tilde_sq_ : float
        k_w m_w / (avg_snr * Omega_w).
    """

    def __init__(self, n_elems=1, avg_snr=1.0):
        self.n_elems = n_elems
        self.avg_snr = avg_snr

    def fit(self, X=None, y=None):
        n = check_positive(self.n_elems, "n_elems", integer=True)
        if X is None:
            self.moments_ = sum_moments(double_rayleigh_moments(6), n, 6)
        else:
            X = check_array(X, ensure_2d=False, dtype=float)
            self.moments_ = empirical_moments(X, 6)
        self.fit_ = fit_saa(self.moments_)
        self._set_shape(self.fit_.k_w, self.fit_.m_w, self.fit_.omega_w)
        return self


class KeyholeModel(SquaredKGModel):
    """Keyhole-style approximation: squared-K_G with k = m = N and Omega = N^2.

    Its density is 2 g^(N-1) K_0(2 sqrt(g/avg)) / (Gamma(N)^2 avg^N).
    """

    def __init__(self, n_elems=1, avg_snr=1.0):
        self.n_elems = n_elems
        self.avg_snr = avg_snr

    def fit(self, X=None, y=None):
        n = check_positive(self.n_elems, "n_elems", integer=True)
        self._set_shape(float(n), float(n), float(n * n))
        self.fit_ = SaaFit(float(n), float(n), float(n * n), 0.0, False)
        return self


class RisTModel(SnrDistribution):
    """RIS used as transmitter: Gamma law with shape N and scale B * avg_snr.

    B = 1 + (N - 1) Gamma(3/2)^2 = 1 + (N - 1) pi / 4.
    """

    def __init__(self, n_elems=1, avg_snr=1.0):
        self.n_elems = n_elems
        self.avg_snr = avg_snr

    def fit(self, X=None, y=None):
        n = check_positive(self.n_elems, "n_elems", integer=True)
        avg = check_positive(self.avg_snr, "avg_snr")
        self.b_const_ = 1.0 + (n - 1) * math.gamma(1.5) ** 2
        self.scale_ = self.b_const_ * avg
        return self

    def mean(self):
        self._check_fitted()
        return self.n_elems * self.scale_

    def _logpdf(self, g):
        n, s = self.n_elems, self.scale_
        return (n - 1) * np.log(g) - g / s - n * math.log(s) - math.lgamma(n)

    def _cdf(self, g):
        return special.reg_lower_inc_gamma(float(self.n_elems), g / self.scale_)

    def sample(self, n_samples, random_state=None):
        self._check_fitted()
        rng = np.random.default_rng(random_state)
        return rng.gamma(self.n_elems, self.scale_, size=n_samples)


_NCCS_SCHEMES = ("dh", "t")


class NccsModel(SnrDistribution):
    """CLT baseline: the amplitude is Normal(sqrt(lambda), sigma^2), SNR = R^2 avg.

    ``scheme="dh"`` uses lambda = N^2 pi^2/16, sigma^2 = N(16 - pi^2)/16;
    ``scheme="t"`` uses lambda = N^2 pi/4, sigma^2 = N(4 - pi)/4.
    """

    def __init__(self, n_elems=1, avg_snr=1.0, scheme="dh"):
        self.n_elems = n_elems
        self.avg_snr = avg_snr
        self.scheme = scheme

    def fit(self, X=None, y=None):
        n = check_positive(self.n_elems, "n_elems", integer=True)
        check_positive(self.avg_snr, "avg_snr")
        if self.scheme == "dh":
            self.lambda_nc_ = n * n * math.pi**2 / 16.0
            self.sigma_sq_ = n * (16.0 - math.pi**2) / 16.0
        elif self.scheme == "t":
            self.lambda_nc_ = n * n * math.pi / 4.0
            self.sigma_sq_ = n * (4.0 - math.pi) / 4.0
        else:
            raise ValueError(f"scheme must be one of {_NCCS_SCHEMES}, got {self.scheme!r}")
        return self

    def mean(self):
        self._check_fitted()
        return (self.lambda_nc_ + self.sigma_sq_) * self.avg_snr

    def _logpdf(self, g):
        sigma = math.sqrt(self.sigma_sq_)
        mu = math.sqrt(self.lambda_nc_)
        r = np.sqrt(g / self.avg_snr)
        lo = -0.5 * ((r - mu) / sigma) ** 2
        hi = -0.5 * ((r + mu) / sigma) ** 2
        # density of R^2 at r^2, then the avg_snr change of variables
        return (
            np.logaddexp(lo, hi)
            - 0.5 * math.log(2.0 * math.pi)
            - math.log(2.0 * sigma)
            - np.log(r)
            - math.log(self.avg_snr)
        )

    def _cdf(self, g):
        a = math.sqrt(self.lambda_nc_ / self.sigma_sq_)
        b = np.sqrt(g / (self.avg_snr * self.sigma_sq_))
        return special.marcum_p_half(a, b)

    def sample(self, n_samples, random_state=None):
        self._check_fitted()
        rng = np.random.default_rng(random_state)
        r = math.sqrt(self.lambda_nc_) + math.sqrt(self.sigma_sq_) * rng.standard_normal(n_samples)
        return r * r * self.avg_snr


def dh_pdf(model, gamma):
    return model.pdf(gamma)


def dh_cdf(model, gamma, method="auto"):
    return model.cdf(gamma, method=method)


def keyhole_pdf(model, gamma):
    return model.pdf(gamma)


def ris_t_pdf(model, gamma):
    return model.pdf(gamma)


def ris_t_cdf(model, gamma):
    return model.cdf(gamma)


def nccs_outage(model, gamma_th):
    """1 - Q_{1/2}(sqrt(lambda)/sigma, sqrt(gamma_th / (avg sigma^2)))."""
    check_positive(gamma_th, "gamma_th")
    return model.cdf(gamma_th)
