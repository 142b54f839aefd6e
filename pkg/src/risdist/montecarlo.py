"""Seeded Monte Carlo sampling of the end-to-end SNR and empirical metrics.

Each run is split into ``n_substreams`` independent Philox streams spawned
from one ``SeedSequence``. A substream always draws its samples in chunks of
``CHUNK_ROWS`` and statistics are merged in substream order, so results do
not depend on how many worker threads execute the substreams.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, db_to_linear
from .metrics import Scheme

CHUNK_ROWS = 1 << 16
MIN_SAMPLES = 10_000
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class SimConfig:
    scheme: Scheme = Scheme.DH
    n_elems: int = 1
    snr_grid_db: tuple = (0.0,)
    gamma_th: float = 100.0
    n_samples: int = 1_000_000
    seed: int = 12345
    n_substreams: int = 8

    def __post_init__(self):
        scheme = Scheme(self.scheme)
        if scheme not in (Scheme.DH, Scheme.T):
            raise ValueError("simulation supports the DH and T schemes only")
        object.__setattr__(self, "scheme", scheme)
        check_positive(self.n_elems, "n_elems", integer=True)
        check_positive(self.gamma_th, "gamma_th")
        check_positive(self.n_substreams, "n_substreams", integer=True)
        grid = tuple(float(v) for v in self.snr_grid_db)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("snr grid must be non-empty and strictly increasing")
        object.__setattr__(self, "snr_grid_db", grid)
        if int(self.n_samples) != self.n_samples or self.n_samples < MIN_SAMPLES:
            raise ValueError(f"n_samples must be an integer >= {MIN_SAMPLES}")
        if self.n_samples % self.n_substreams:
            raise ValueError("n_samples must be divisible by n_substreams")
        if not (0 <= int(self.seed) < 2**64) or int(self.seed) != self.seed:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class EmpiricalCurve:
    snr_grid_db: tuple
    estimates: tuple
    std_errors: tuple
    n_samples: int


def substream_generators(seed, n_substreams):
    """Independent Philox generators, one per substream, in a fixed order."""
    children = np.random.SeedSequence(int(seed)).spawn(int(n_substreams))
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _rayleigh(rng, shape):
    # unit power: E[r^2] = 1, mean sqrt(pi)/2
    return np.sqrt(-np.log1p(-rng.random(shape)))


def sample_r1(n_elems, rng_stream, size=None):
    """Draw(s) of sum_i alpha_i beta_i with unit-power Rayleigh factors."""
    n = check_positive(n_elems, "n_elems", integer=True)
    rows = 1 if size is None else int(size)
    shape = (rows, n)
    a = _rayleigh(rng_stream, shape)
    b = _rayleigh(rng_stream, shape)
    out = (a * b).sum(axis=1)
    return float(out[0]) if size is None else out


def sample_r2(n_elems, rng_stream, size=None):
    """Draw(s) of the sum of ``n_elems`` unit-power Rayleigh variables."""
    n = check_positive(n_elems, "n_elems", integer=True)
    rows = 1 if size is None else int(size)
    out = _rayleigh(rng_stream, (rows, n)).sum(axis=1)
    return float(out[0]) if size is None else out


_SAMPLERS = {Scheme.DH: sample_r1, Scheme.T: sample_r2}


def _substream_power_chunks(scheme, n_elems, rng, n_rows):
    """Yield chunks of R**2 for one substream."""
    draw = _SAMPLERS[Scheme(scheme)]
    done = 0
    while done < n_rows:
        rows = min(CHUNK_ROWS, n_rows - done)
        r = draw(n_elems, rng, rows)
        yield r * r
        done += rows


def _run_substreams(fn, n_substreams, n_workers):
    if n_workers <= 1:
        return [fn(i) for i in range(n_substreams)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, range(n_substreams)))


def sample_snr_power(scheme, n_elems, n_samples, seed, *, n_substreams=8, n_workers=1):
    """``n_samples`` draws of R**2, concatenated in substream order."""
    if n_samples % n_substreams:
        raise ValueError("n_samples must be divisible by n_substreams")
    gens = substream_generators(seed, n_substreams)
    per = n_samples // n_substreams

    def one(i):
        return np.concatenate(list(_substream_power_chunks(scheme, n_elems, gens[i], per)))

    return np.concatenate(_run_substreams(one, n_substreams, n_workers))


def _merge(a, b):
    """Chan et al. pairwise merge of (count, mean, M2) arrays."""
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    m2 = sa + sb + delta * delta * (na * nb / n)
    return n, mean, m2


_SAMPLE_METRICS = {
    "outage": None,  # needs gamma_th, built in _metric_fn
    "ber": lambda g: 0.5 * np.exp(-g),
    "capacity": lambda g: np.log1p(g) / _LN2,
}


def _metric_fn(metric, gamma_th):
    if metric == "outage":
        return lambda g: (g <= gamma_th).astype(float)
    if metric not in _SAMPLE_METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    return _SAMPLE_METRICS[metric]


def simulate(cfg, metrics=("outage", "ber", "capacity"), *, n_workers=1):
    """Empirical curves for several metrics from one shared set of channel draws.

    The same channel samples are reused at every grid point, and the
    conditional DPSK error 0.5*exp(-gamma) is averaged rather than simulated
    bit by bit. Returns a dict metric -> EmpiricalCurve.
    """
    fns = [_metric_fn(m, cfg.gamma_th) for m in metrics]
    avg = db_to_linear(np.asarray(cfg.snr_grid_db))[:, None]
    gens = substream_generators(cfg.seed, cfg.n_substreams)
    per = cfg.n_samples // cfg.n_substreams

    def one(i):
        acc = [None] * len(fns)
        for w in _substream_power_chunks(cfg.scheme, cfg.n_elems, gens[i], per):
            g = avg * w[None, :]
            for j, fn in enumerate(fns):
                v = fn(g)
                mean = v.mean(axis=1)
                m2 = ((v - mean[:, None]) ** 2).sum(axis=1)
                part = (float(w.size), mean, m2)
                acc[j] = part if acc[j] is None else _merge(acc[j], part)
        return acc

    parts = _run_substreams(one, cfg.n_substreams, n_workers)
    out = {}
    for j, name in enumerate(metrics):
        total = parts[0][j]
        for p in parts[1:]:
            total = _merge(total, p[j])
        n, mean, m2 = total
        se = np.sqrt(m2 / (n - 1.0) / n)
        out[name] = EmpiricalCurve(cfg.snr_grid_db, tuple(mean.tolist()),
                                   tuple(se.tolist()), cfg.n_samples)
    return out


def empirical_outage(cfg, *, n_workers=1):
    return simulate(cfg, ("outage",), n_workers=n_workers)["outage"]


def empirical_ber_dpsk(cfg, *, n_workers=1):
    return simulate(cfg, ("ber",), n_workers=n_workers)["ber"]


def empirical_capacity(cfg, *, n_workers=1):
    return simulate(cfg, ("capacity",), n_workers=n_workers)["capacity"]


def ks_distance_bound(sorted_samples, model_cdf, max_eval_points=20001):
    """Upper bound on the KS distance between the sample and ``model_cdf``.

    The model CDF is evaluated at up to ``max_eval_points`` order statistics
    (all of them when the sample is smaller, giving the exact statistic).
    Between two evaluated order statistics the CDF is bracketed by its
    monotonicity, so the returned value never understates the distance.
    """
    x = np.asarray(sorted_samples, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    if max_eval_points < 2:
        raise ValueError("max_eval_points must be >= 2")
    if n <= max_eval_points:
        idx = np.arange(n)
    else:
        idx = np.unique(np.linspace(0, n - 1, max_eval_points).round().astype(np.int64))
    f = np.clip(np.asarray(model_cdf(x[idx]), dtype=float), 0.0, 1.0)
    rank = idx + 1  # 1-based rank of each evaluated order statistic
    # exact terms at the evaluated points
    d = max(np.max(rank / n - f), np.max(f - (rank - 1) / n))
    if idx.size > 1:
        lo_rank, hi_rank = rank[:-1], rank[1:]
        gaps = hi_rank - lo_rank > 1
        if gaps.any():
            above = (hi_rank - 1)[gaps] / n - f[:-1][gaps]
            below = f[1:][gaps] - lo_rank[gaps] / n
            d = max(d, np.max(above), np.max(below))
    return float(d)


def empirical_cdf_distance(scheme, n_elems, avg_snr, model_cdf, n_samples, seed, *,
                           n_substreams=8, max_eval_points=20001, n_workers=1):
    """KS distance between seeded SNR samples R**2 * avg_snr and ``model_cdf``."""
    check_positive(avg_snr, "avg_snr")
    w = sample_snr_power(scheme, n_elems, n_samples, seed,
                         n_substreams=n_substreams, n_workers=n_workers)
    g = np.sort(w * avg_snr)
    return ks_distance_bound(g, model_cdf, max_eval_points)
