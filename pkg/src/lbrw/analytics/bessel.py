"""Modified Bessel function of the second kind, order 0.

Power series for ``t <= 2`` and Steed's continued fraction (Temme's form
of CF2) above, both evaluated in double precision.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError

EULER_GAMMA = 0.57721566490153286061
_SERIES_MAX = 2.0
_EPS = 1e-17
_MAXIT = 10_000


def _k0_series(t: float) -> float:
    # K0 = -(log(t/2) + gamma) I0(t) + sum_k (t^2/4)^k / (k!)^2 H_k
    y = 0.25 * t * t
    term = 1.0
    i0 = 1.0
    tail = 0.0
    h = 0.0
    k = 0
    while True:
        k += 1
        term *= y / (k * k)
        h += 1.0 / k
        i0 += term
        tail += term * h
        if term < _EPS * i0:
            break
    return -(math.log(0.5 * t) + EULER_GAMMA) * i0 + tail


def _k0e_cf2(t: float) -> float:
    """``exp(t) K0(t)`` from the continued fraction, valid for ``t >= 2``."""
    b = 2.0 * (1.0 + t)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    return math.sqrt(math.pi / (2.0 * t)) / s


def bessel_k0e(t: float) -> float:
    """Exponentially scaled ``exp(t) K0(t)`` for ``t > 0``."""
    t = float(t)
    if not t > 0:
        raise DomainError(f"K0 needs t > 0, got {t}")
    if t <= _SERIES_MAX:
        return math.exp(t) * _k0_series(t)
    return _k0e_cf2(t)


def bessel_k0(t):
    """``K0(t)`` for ``t > 0``; scalar or array.  Underflows to 0 past ~745."""
    if np.ndim(t):
        arr = np.asarray(t, dtype=float)
        return np.vectorize(bessel_k0, otypes=[float])(arr)
    t = float(t)
    if not t > 0:
        raise DomainError(f"K0 needs t > 0, got {t}")
    if math.isinf(t):
        return 0.0
    if t <= _SERIES_MAX:
        return _k0_series(t)
    return _k0e_cf2(t) * math.exp(-t)
