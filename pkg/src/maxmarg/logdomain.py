"""Log-domain arithmetic for non-negative reals.

Every probability in the package is carried as its natural logarithm; the
zero element is ``-inf``.  Scalar helpers operate on plain floats, and
:func:`lse` is the array reduction used by the dynamic programs.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

ZERO = -math.inf
ONE = 0.0

DEFAULT_TOL = 1e-9


class LogDomainError(ValueError):
    """Raised for NaN inputs or division by the zero element."""


def _check(a: float) -> float:
    if math.isnan(a):
        raise LogDomainError("NaN is not a valid log weight")
    return a


def log_sum_exp(terms: Iterable[float]) -> float:
    """Return ``log(sum(exp(t) for t in terms))``; the empty sum is ``-inf``."""
    vals = [_check(float(t)) for t in terms]
    if not vals:
        return ZERO
    m = max(vals)
    if m == ZERO:
        return ZERO
    if m == math.inf:
        return math.inf
    return m + math.log(math.fsum(math.exp(v - m) for v in vals))


def log_mul(a: float, b: float) -> float:
    a, b = _check(a), _check(b)
    if a == ZERO or b == ZERO:
        return ZERO
    return a + b


def log_div(a: float, b: float) -> float:
    a, b = _check(a), _check(b)
    if b == ZERO:
        raise LogDomainError("division by the zero element")
    if a == ZERO:
        return ZERO
    return a - b


def log_pow(a: float, r: int) -> float:
    a = _check(a)
    if r == 0:
        return ONE
    if a == ZERO:
        if r < 0:
            raise LogDomainError("negative power of the zero element")
        return ZERO
    return r * a


def lse(a: np.ndarray, axis=None, keepdims: bool = False) -> np.ndarray:
    """Max-shifted log-sum-exp over ``axis``; all ``-inf`` slices give ``-inf``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        shape = np.sum(a, axis=axis, keepdims=keepdims).shape
        return np.full(shape, ZERO)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore", under="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return out


def masked_scale(counts: np.ndarray, logw: np.ndarray) -> np.ndarray:
    """``counts * logw`` with the convention ``0 * -inf = 0``."""
    with np.errstate(invalid="ignore"):
        out = counts * logw
    return np.where(counts == 0, 0.0, out)


def log_close(a: float, b: float, tol: float = DEFAULT_TOL) -> bool:
    """Absolute comparison on log scale; two zero elements compare equal."""
    if a == b:
        return True
    return abs(a - b) <= tol
