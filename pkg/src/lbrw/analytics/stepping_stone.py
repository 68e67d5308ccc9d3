"""Stepping-stone identity by descent: ``G_u``, ``psi`` and the small-``u`` Bessel form.

``G_u(0, x) = sum_{k >= 1} (1 - u)^(2k) p_{2k}(0, x)``.  The default method
sums the geometric series in Fourier space on a periodic grid wide enough
that wrap-around is below double precision; ``method="convolution"``
squares the kernel repeatedly on a finite box instead and is meant for
cross-checks at moderate ``u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..errors import BudgetExceeded, DomainError, KernelError, MissingDecomposition
from ..kernels import KernelSpec, make_kernel
from .bessel import bessel_k0

DECOMP_TOL = 1e-12
DEFAULT_K_CAP = 10 ** 7
DEFAULT_MAX_GRID = 4096


@dataclass(frozen=True)
class SteppingStoneParams:
    N_deme: int
    u: float
    p: KernelSpec
    nu: float | None = None
    q: KernelSpec | None = None

    def __post_init__(self):
        if self.N_deme < 1:
            raise DomainError("N_deme must be >= 1")
        if not 0 < self.u < 1:
            raise DomainError(f"u must lie in (0, 1), got {self.u}")
        if self.p.kind != "migration":
            raise KernelError("p must be a migration kernel")
        if (self.nu is None) != (self.q is None):
            raise DomainError("give both nu and q or neither")
        if self.q is not None:
            if not 0 < self.nu <= 1:
                raise DomainError("nu must lie in (0, 1]")
            if self.q.weight((0, 0)) != 0:
                raise KernelError("q must not charge the origin")
            if abs(self.q.total - 1.0) > DECOMP_TOL:
                raise KernelError("q must be stochastic")
            sites = set(self.p.offsets) | set(self.q.offsets) | {(0, 0)}
            for z in sites:
                want = (1.0 - self.nu) * (z == (0, 0)) + self.nu * self.q.weight(z)
                if abs(self.p.weight(z) - want) > DECOMP_TOL:
                    raise KernelError(f"p != (1 - nu) delta + nu q at offset {z}")
            exx, eyy, exy = self.q.variance()
            if abs(exx - eyy) > DECOMP_TOL or abs(exy) > DECOMP_TOL:
                raise KernelError("q must have isotropic covariance sigma^2 I")

    @property
    def decomposed(self) -> bool:
        return self.q is not None

    @property
    def sigma2(self) -> float:
        if self.q is None:
            raise MissingDecomposition("no (nu, q) decomposition given")
        return self.q.variance()[0]

    @property
    def ell(self) -> float:
        return math.sqrt(self.nu * self.sigma2 / (2.0 * self.u)) if self.decomposed else _missing()


def _missing():
    raise MissingDecomposition("no (nu, q) decomposition given")


def ss_preset(N_deme: int = 20, u: float = 0.02) -> SteppingStoneParams:
    """``nu = 1`` and ``q`` on the four nearest and four second-nearest axial sites (sigma^2 = 1)."""
    offs = [(1, 0), (-1, 0), (0, 1), (0, -1), (2, 0), (-2, 0), (0, 2), (0, -2)]
    w = [1 / 6] * 4 + [1 / 12] * 4
    q = make_kernel(offs, w, kind="competition")
    p = make_kernel(offs, w)
    return SteppingStoneParams(N_deme, u, p, nu=1.0, q=q)


def truncation_order(u: float, tol: float) -> int:
    """Smallest ``K`` with ``(1-u)^(2(K+1)) / (1 - (1-u)^2) < tol``."""
    a = (1.0 - u) ** 2
    if a == 0.0:
        return 0
    k = math.log(tol * (1.0 - a)) / math.log(a) - 1.0
    return max(0, math.ceil(k + 1e-12))


def _std(p: KernelSpec) -> float:
    exx, eyy, _ = p.variance()
    return math.sqrt(max(exx, eyy))


def green_grid_side(x, ss: SteppingStoneParams, K: int) -> int:
    a = (1.0 - ss.u) ** 2
    ell = _std(ss.p) / math.sqrt(1.0 - a)
    xr = max(abs(int(x[0])), abs(int(x[1])))
    wide = 2 * xr + math.ceil(80 * ell)
    exact = 2 * (2 * K * ss.p.range) + 1  # support of p_{2K}
    return max(min(wide, exact), 2 * xr + 1, 3)


def _symbol(p: KernelSpec, M: int) -> np.ndarray:
    th = 2 * np.pi * np.fft.fftfreq(M)
    t1, t2 = np.meshgrid(th, th, indexing="ij")
    phi = np.zeros((M, M))
    for (dx, dy), w in zip(p.offsets, p.weights):
        phi += w * np.cos(t1 * dx + t2 * dy)
    return phi


def _green_fourier(sites, ss, K, M):
    a = (1.0 - ss.u) ** 2
    w = a * _symbol(ss.p, M) ** 2
    # sum_{k=1}^K w^k = w (1 - w^K) / (1 - w); w < 1 everywhere since u > 0
    g = w * (1.0 - w ** K) / (1.0 - w)
    field = np.fft.ifft2(g).real
    return [float(field[int(s[0]) % M, int(s[1]) % M]) for s in sites]


def _trim(arr, R, rel=1e-15):
    # zero the FFT round-off floor, then shrink the (centred) box to what is left
    arr[arr < rel * arr.max()] = 0.0
    c = arr.shape[0] // 2
    idx = np.nonzero(arr)
    if not len(idx[0]):
        return arr, R
    r = int(max(np.max(np.abs(idx[0] - c)), np.max(np.abs(idx[1] - c))))
    shell = R - r
    if shell > 0:
        arr = arr[shell:-shell, shell:-shell]
    return arr, R - max(shell, 0)


def _green_convolution(sites, ss, K, k_cap, max_grid):
    a = (1.0 - ss.u) ** 2
    p2 = fftconvolve(ss.p.dense(), ss.p.dense())
    R2 = 2 * ss.p.range
    term, R = p2.copy(), R2
    acc = {s: 0.0 for s in sites}
    for k in range(1, K + 1):
        if k > k_cap:
            raise BudgetExceeded(f"needs {K} terms, cap is {k_cap}")
        for s in sites:
            i, j = R + s[0], R + s[1]
            if 0 <= i < term.shape[0] and 0 <= j < term.shape[1]:
                acc[s] += a ** k * term[i, j]
        if k == K:
            break
        term = np.maximum(fftconvolve(term, p2), 0.0)
        R += R2
        term, R = _trim(term, R)
        if 2 * R + 1 > max_grid:
            raise BudgetExceeded(f"box side {2 * R + 1} exceeds {max_grid}")
    return [float(acc[s]) for s in sites]


def stepping_stone_green(x, ss: SteppingStoneParams, tol: float = 1e-12, *, method: str = "fourier",
                         grid_side: int | None = None, k_cap: int = DEFAULT_K_CAP,
                         max_grid: int = DEFAULT_MAX_GRID) -> float:
    """``G_u(0, x)``, truncated where the geometric tail bound falls below ``tol``."""
    return stepping_stone_green_many([x], ss, tol, method=method, grid_side=grid_side,
                                     k_cap=k_cap, max_grid=max_grid)[0]


def stepping_stone_green_many(sites, ss: SteppingStoneParams, tol: float = 1e-12, *, method: str = "fourier",
                              grid_side: int | None = None, k_cap: int = DEFAULT_K_CAP,
                              max_grid: int = DEFAULT_MAX_GRID) -> list[float]:
    if not tol > 0:
        raise DomainError("tol must be > 0")
    sites = [(int(s[0]), int(s[1])) for s in sites]
    K = truncation_order(ss.u, tol)
    if K > k_cap:
        raise BudgetExceeded(f"needs {K} terms for tol={tol}, cap is {k_cap}")
    if K == 0:
        return [0.0] * len(sites)
    if method == "convolution":
        return _green_convolution(sites, ss, K, k_cap, max_grid)
    if method != "fourier":
        raise ValueError(f"unknown method {method!r}")
    far = max(max(abs(a), abs(b)) for a, b in sites)
    M = grid_side if grid_side is not None else max(green_grid_side((far, 0), ss, K), 3)
    if M > max_grid:
        raise BudgetExceeded(f"grid side {M} exceeds {max_grid}")
    return _green_fourier(sites, ss, K, M)


def stepping_stone_psi(x, ss: SteppingStoneParams, tol: float = 1e-12, **kw) -> float:
    """Probability that two genes sampled at offset ``x`` are identical: ``G_u(0,x) / (N + G_u(0,0))``."""
    g0, gx = stepping_stone_green_many([(0, 0), x], ss, tol, **kw)
    return gx / (ss.N_deme + g0)


def stepping_stone_psi_asymptotic(r: float, ss: SteppingStoneParams) -> float:
    """Small-``u`` Bessel form ``(K0(r/ell) - K0(r)) / (2 pi N + log ell)``.

    Only an asymptotic equivalent as ``u -> 0``; at moderate ``u`` it can
    be far from :func:`stepping_stone_psi`.
    """
    if not ss.decomposed:
        raise MissingDecomposition("the asymptotic form needs the (nu, q) decomposition")
    if not r > 0:
        raise DomainError("r must be > 0")
    ell = ss.ell
    return (bessel_k0(r / ell) - bessel_k0(r)) / (2.0 * math.pi * ss.N_deme + math.log(ell))
