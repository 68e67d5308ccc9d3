"""Hitting fractions for annuli, the Erdos-Taylor origin-avoidance tail and
annulus Green functions of the 2d Bessel process."""
from __future__ import annotations

import math

from ..errors import DomainError


def hitting_fraction(r: float, r1: float, r2: float, d: int) -> float:
    """Probability scale ``f_d(r; r1, r2)`` of leaving ``(r1, r2)`` through the outer sphere."""
    if not (0 < r1 < r < r2):
        raise DomainError(f"need 0 < r1 < r < r2, got r1={r1}, r={r}, r2={r2}")
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    if d == 1:
        return (r - r1) / (r2 - r1)
    if d == 2:
        return (math.log(r) - math.log(r1)) / (math.log(r2) - math.log(r1))
    e = 2 - d
    return (r1 ** e - r ** e) / (r1 ** e - r2 ** e)


def erdos_taylor_tail(x_norm: float, n: int) -> float:
    """``min(2 log|x| / log n, 1)``: asymptotic chance a planar walk from ``x`` avoids 0 for ``n`` steps."""
    if not x_norm > 1:
        raise DomainError(f"|x| must exceed 1, got {x_norm}")
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    return min(2.0 * math.log(x_norm) / math.log(n), 1.0)


def annulus_ansatz_f(x_norm: float, M: float, beta: float) -> float:
    """``2^(beta-2) M^(2-beta) - |x|^(2-beta) 1{|x| >= M/2}``."""
    if not beta > 2:
        raise DomainError(f"beta must exceed 2, got {beta}")
    if not M > 0 or x_norm < 0:
        raise DomainError("need M > 0 and |x| >= 0")
    base = 2.0 ** (beta - 2) * M ** (2 - beta)
    if x_norm >= M / 2:
        return base - x_norm ** (2 - beta)
    return base


def _check_annulus(x, a, b, beta):
    if not beta > 2:
        raise DomainError(f"beta must exceed 2, got {beta}")
    if not (0 < a <= x <= b) or not a < b:
        raise DomainError(f"need 0 < a <= x <= b with a < b, got a={a}, x={x}, b={b}")


def bessel_annulus_green_kernel(x: float, xi: float, a: float, b: float) -> float:
    """Green density ``G_{a,b}(x, xi)`` (speed-measure factor ``xi`` included) of the 2d Bessel process killed outside ``(a, b)``."""
    if not (0 < a < b) or not (a <= x <= b) or not (a <= xi <= b):
        raise DomainError("need 0 < a < b and x, xi in [a, b]")
    la, lb = math.log(a), math.log(b)
    if xi >= x:
        return 2.0 * (math.log(x) - la) * (lb - math.log(xi)) / (lb - la) * xi
    return 2.0 * (lb - math.log(x)) * (math.log(xi) - la) / (lb - la) * xi


def bessel_annulus_green_f(x: float, a: float, b: float, beta: float) -> float:
    """Expected ``int x_t^(-beta) dt`` until the 2d Bessel process started at ``x`` leaves ``(a, b)``."""
    _check_annulus(x, a, b, beta)
    la, lb, lx = math.log(a), math.log(b), math.log(x)
    e = 2.0 - beta
    ae, be, xe = a ** e, b ** e, x ** e
    # grouped so the bracket vanishes exactly at x = a and x = b up to rounding
    bracket = (lb - lx) * (ae - xe) + (lx - la) * (be - xe)
    return 2.0 / ((beta - 2.0) ** 2 * (lb - la)) * bracket
