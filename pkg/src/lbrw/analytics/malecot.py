"""Wright-Malecot identity by descent and a radial solver for its recursion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e

from ..errors import DomainError, NonConvergence
from .bessel import bessel_k0


@dataclass(frozen=True)
class WMParams:
    delta: float  # individuals per unit area
    sigma: float  # dispersal std-dev per coordinate
    mu: float  # mutation probability per generation
    kappa: float  # local scale

    def __post_init__(self):
        for name in ("delta", "sigma", "mu", "kappa"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and > 0, got {v}")
        if not self.mu < 1:
            raise DomainError(f"mu must be < 1, got {self.mu}")


def wright_malecot_phi(r: float, wm: WMParams) -> float:
    """``K0(sqrt(2 mu) r / sigma) / (2 pi sigma^2 delta + K0(sqrt(2 mu) kappa / sigma))`` for ``r >= kappa``."""
    if r < wm.kappa:
        raise DomainError(f"r = {r} below the local scale kappa = {wm.kappa}")
    c = math.sqrt(2.0 * wm.mu) / wm.sigma
    return bessel_k0(c * r) / (2.0 * math.pi * wm.sigma ** 2 * wm.delta + bessel_k0(c * wm.kappa))


@dataclass(frozen=True)
class ScalingValue:
    value: float
    limit_reference: float


def wm_scaling_value(N: float, gamma: float, m: float, y_norm: float, wm: WMParams) -> ScalingValue:
    """Identity at separation ``N y`` with ``mu = m N^(-2 gamma)``; ``wm.mu`` is ignored."""
    if gamma < 1:
        raise DomainError("gamma must be >= 1")
    if not (m > 0 and y_norm > 0 and N > 0):
        raise DomainError("N, m and |y| must be > 0")
    mu = m * float(N) ** (-2.0 * gamma)
    if not 0 < mu < 1:
        raise DomainError(f"mu = m N^(-2 gamma) = {mu} outside (0, 1)")
    r = N * y_norm
    if r < wm.kappa:
        raise DomainError(f"separation {r} below kappa = {wm.kappa}")
    c = math.sqrt(2.0 * m) / wm.sigma
    # the K0 arguments, written so that N^(-gamma) never underflows mu first
    a_r = c * y_norm * float(N) ** (1.0 - gamma)
    a_k = c * wm.kappa * float(N) ** (-gamma)
    value = bessel_k0(a_r) / (2.0 * math.pi * wm.sigma ** 2 * wm.delta + bessel_k0(a_k))
    return ScalingValue(value, 1.0 - 1.0 / gamma)


WM_PRESET = WMParams(delta=0.1, sigma=1.0, mu=1e-4, kappa=1.0)


# radial recursion -------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    h: float
    r_max: float

    @property
    def r(self) -> np.ndarray:
        n = int(round(self.r_max / self.h))
        return np.arange(n + 1) * self.h


def _convolution_matrix(grid: RadialGrid, sigma: float) -> np.ndarray:
    # radial form of convolution with the 2d normal density of variance s2 = 2 sigma^2
    # per coordinate (difference of two independent displacements), trapezoid in rho
    s2 = 2.0 * sigma ** 2
    r = grid.r
    R, P = np.meshgrid(r, r, indexing="ij")
    K = P / s2 * np.exp(-((R - P) ** 2) / (2 * s2)) * i0e(R * P / s2)
    K[np.abs(R - P) > 6.0 * math.sqrt(s2)] = 0.0
    w = np.full(len(r), grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return K * w[None, :]


def _source(grid: RadialGrid, sigma: float) -> np.ndarray:
    s2 = 2.0 * sigma ** 2
    return np.exp(-grid.r ** 2 / (2 * s2)) / (2 * math.pi * s2)


def _check_grid(grid: RadialGrid, wm: WMParams):
    if grid.h <= 0 or grid.h > wm.sigma / 4:
        raise DomainError(f"grid spacing {grid.h} must lie in (0, sigma/4]")
    if grid.r_max <= grid.h:
        raise DomainError("r_max must exceed the grid spacing")


def malecot_recursion_iterate(phi: np.ndarray, wm: WMParams, grid: RadialGrid, _cache=None):
    """One fixed-point step of the radial recursion; returns ``(next, sup_residual)``.

    ``phi`` is sampled on ``grid.r`` and taken to vanish beyond ``r_max``.
    """
    _check_grid(grid, wm)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != grid.r.shape:
        raise DomainError(f"phi has {phi.shape[0]} points, grid has {grid.r.shape[0]}")
    K, g = _cache if _cache is not None else (_convolution_matrix(grid, wm.sigma), _source(grid, wm.sigma))
    nxt = (1.0 - wm.mu) ** 2 * ((1.0 - phi[0]) / wm.delta * g + K @ phi)
    return nxt, float(np.max(np.abs(nxt - phi)))


@dataclass(frozen=True)
class MalecotSolution:
    r: np.ndarray
    phi: np.ndarray
    iterations: int
    residual: float


def malecot_solve(wm: WMParams, grid: RadialGrid, tol: float = 1e-8, max_iter: int = 10_000,
                  phi0: np.ndarray | None = None) -> MalecotSolution:
    """Iterate the recursion from ``phi0`` (default 0) until the sup residual is below ``tol``."""
    _check_grid(grid, wm)
    cache = (_convolution_matrix(grid, wm.sigma), _source(grid, wm.sigma))
    phi = np.zeros_like(grid.r) if phi0 is None else np.asarray(phi0, dtype=float)
    best = math.inf
    for it in range(1, max_iter + 1):
        phi, res = malecot_recursion_iterate(phi, wm, grid, cache)
        best = min(best, res)
        if res < tol:
            return MalecotSolution(grid.r, phi, it, res)
    raise NonConvergence(f"no convergence after {max_iter} iterations", best)
