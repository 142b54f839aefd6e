"""Input checking shared by the estimators, metrics and CLI."""

from __future__ import annotations

import numbers

import numpy as np


def check_snr(gamma, *, strict=False, name="gamma"):
    """Coerce ``gamma`` to a float array and validate its domain.

    Returns the array and a flag telling whether the input was a scalar, so
    callers can hand back a plain float for scalar input.
    """
    arr = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if strict and np.any(arr <= 0):
        raise ValueError(f"{name} must be > 0")
    if np.any(arr < 0):
        raise ValueError(f"{name} must be >= 0")
    return arr, arr.ndim == 0


def check_positive(value, name, *, integer=False):
    if integer:
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            raise TypeError(f"{name} must be an integer, got {value!r}")
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")
        return int(value)
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be finite and > 0, got {value}")
    return value


def as_output(arr, scalar):
    if scalar:
        return float(arr)
    return arr


def db_to_linear(db):
    """Convert decibels to a linear power ratio (x dB -> 10**(x/10))."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(lin):
    return 10.0 * np.log10(np.asarray(lin, dtype=float))
