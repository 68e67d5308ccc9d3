"""Kernels, model parameters and the deterministic coupled map lattice.

Sites live on a ``side x side`` torus and are addressed as ``(i, j)``
integer pairs.  Density and count fields are plain 2d numpy arrays indexed
the same way.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AsymmetricKernel,
    EmptyKernel,
    KernelError,
    NonpositiveGrowth,
    NotStochastic,
    ParameterError,
    Periodic,
    Reducible,
)

STOCHASTIC_TOL = 1e-12
# off-site/on-site competition ratio above which we warn (not enforced)
COMPETITION_RATIO_WARN = 0.1


@dataclass(frozen=True)
class KernelSpec:
    """Finite-range symmetric kernel on the 2d lattice.

    Offsets are stored sorted so that two kernels built from the same
    (offset, weight) pairs in different order compare equal.
    """

    offsets: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]
    kind: str = "migration"

    @property
    def range(self) -> int:
        return max(max(abs(dx), abs(dy)) for dx, dy in self.offsets)

    @property
    def total(self) -> float:
        return math.fsum(self.weights)

    def weight(self, z) -> float:
        z = (int(z[0]), int(z[1]))
        try:
            return self.weights[self.offsets.index(z)]
        except ValueError:
            return 0.0

    def dense(self) -> np.ndarray:
        """Weights on the ``(2R+1, 2R+1)`` box; entry ``[R+dx, R+dy]``."""
        r = self.range
        out = np.zeros((2 * r + 1, 2 * r + 1))
        for (dx, dy), w in zip(self.offsets, self.weights):
            out[r + dx, r + dy] = w
        return out

    def variance(self) -> tuple[float, float, float]:
        """Second moments ``(E dx^2, E dy^2, E dx dy)`` of a stochastic kernel."""
        o = np.asarray(self.offsets, dtype=float)
        w = np.asarray(self.weights)
        return (float(w @ o[:, 0] ** 2), float(w @ o[:, 1] ** 2), float(w @ (o[:, 0] * o[:, 1])))

    def to_triples(self) -> list[tuple[int, int, float]]:
        return [(dx, dy, w) for (dx, dy), w in zip(self.offsets, self.weights)]


def _generated_lattice_is_z2(support) -> bool:
    # the subgroup spanned by integer vectors is Z^2 iff the gcd of all
    # 2x2 minors is 1
    g = 0
    pts = list(support)
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            g = math.gcd(g, pts[a][0] * pts[b][1] - pts[a][1] * pts[b][0])
    return g == 1


def _is_aperiodic(support) -> bool:
    # symmetric kernels always return in 2 steps, so the period is 1 or 2;
    # it is 2 iff some parity character (a*dx + b*dy mod 2) is odd on every
    # step of the support.
    for a, b in ((1, 0), (0, 1), (1, 1)):
        if all((a * dx + b * dy) % 2 == 1 for dx, dy in support):
            return False
    return True


def make_kernel(offsets: Iterable[Sequence[int]], weights: Iterable[float], kind: str = "migration") -> KernelSpec:
    """Validate and build a kernel.

    Migration kernels must be stochastic (to 1e-12; never renormalized),
    irreducible and aperiodic.  Competition kernels only need nonnegative
    symmetric weights.
    """
    if kind not in ("migration", "competition"):
        raise ValueError(f"kind must be 'migration' or 'competition', got {kind!r}")
    offsets = [(int(o[0]), int(o[1])) for o in offsets]
    weights = [float(w) for w in weights]
    if len(offsets) != len(weights):
        raise KernelError(f"{len(offsets)} offsets but {len(weights)} weights")
    if not offsets:
        raise EmptyKernel("kernel has no offsets")
    if any(not math.isfinite(w) or w < 0 for w in weights):
        raise KernelError("kernel weights must be finite and nonnegative")
    if len(set(offsets)) != len(offsets):
        raise KernelError("duplicate offsets in kernel")

    pairs = sorted(zip(offsets, weights))
    table = dict(pairs)
    for z, w in pairs:
        if table.get((-z[0], -z[1]), 0.0) != w:
            raise AsymmetricKernel(f"weight{z} = {w} but weight{(-z[0], -z[1])} = {table.get((-z[0], -z[1]), 0.0)}")

    support = [z for z, w in pairs if w > 0]
    if not support:
        raise EmptyKernel("kernel has no positive weight")

    if kind == "migration":
        total = math.fsum(weights)
        if abs(total - 1.0) > STOCHASTIC_TOL:
            raise NotStochastic(f"migration weights sum to {total!r}, not 1")
        if not _generated_lattice_is_z2(support):
            raise Reducible("migration kernel does not generate the whole lattice")
        if not _is_aperiodic(support):
            raise Periodic("migration kernel has period 2")

    return KernelSpec(tuple(z for z, _ in pairs), tuple(w for _, w in pairs), kind)


def kernel_from_triples(triples, kind="migration") -> KernelSpec:
    triples = list(triples)
    return make_kernel([(t[0], t[1]) for t in triples], [t[2] for t in triples], kind)


def uniform_box_kernel(radius: int = 1) -> KernelSpec:
    offs = [(i, j) for i in range(-radius, radius + 1) for j in range(-radius, radius + 1)]
    return make_kernel(offs, [1.0 / len(offs)] * len(offs))


def onsite_competition(lambda0: float) -> KernelSpec:
    return make_kernel([(0, 0)], [lambda0], kind="competition")


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization of the logistic branching random walk."""

    m: float
    lam: KernelSpec
    p: KernelSpec
    torus_side: int = 64
    burn_in: int = 200

    def __post_init__(self):
        if not 1.0 < self.m < 3.0:
            raise ParameterError(f"m = {self.m} outside (1, 3): the logistic map needs a stable positive fixed point")
        if self.p.kind != "migration":
            raise ParameterError("p must be a migration kernel")
        l0 = self.lam.weight((0, 0))
        if l0 <= 0:
            raise ParameterError("competition kernel needs a positive on-site weight")
        off = [w for z, w in zip(self.lam.offsets, self.lam.weights) if z != (0, 0)]
        if any(w > l0 for w in off):
            raise ParameterError("off-site competition weights may not exceed the on-site weight")
        if off and max(off) / l0 > COMPETITION_RATIO_WARN:
            warnings.warn(
                f"off-site/on-site competition ratio {max(off) / l0:.3g} > {COMPETITION_RATIO_WARN}; "
                "survival results assume off-site competition is much weaker",
                stacklevel=2,
            )
        if self.torus_side < 4 * self.p.range:
            raise ParameterError(f"torus_side {self.torus_side} < 4 * migration range {self.p.range}")
        if self.burn_in < 0:
            raise ParameterError("burn_in must be >= 0")

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)

    @property
    def fixed_point(self) -> float:
        return logistic_fixed_point(self.m, self.lam)


def default_params(**overrides) -> ModelParams:
    """m = 2, on-site competition 0.025 (density 40), uniform 3x3 migration, 64^2 torus."""
    kw = dict(m=2.0, lam=onsite_competition(0.025), p=uniform_box_kernel(1), torus_side=64, burn_in=200)
    kw.update(overrides)
    return ModelParams(**kw)


def logistic_fixed_point(m: float, lam: KernelSpec) -> float:
    """Nontrivial fixed point ``(m - 1) / sum(lambda)`` of the logistic map."""
    if m <= 1:
        raise NonpositiveGrowth(f"m = {m} <= 1: the only fixed point is 0")
    total = lam.total
    if total <= 0:
        raise ParameterError("competition kernel has zero mass")
    return (m - 1.0) / total


def _kernel_sum(field: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    # out[x] = sum_z w_z field[x + z]; for symmetric kernels this equals
    # sum_z w_z field[x - z]
    out = np.zeros(field.shape, dtype=float)
    for (dx, dy), w in zip(kernel.offsets, kernel.weights):
        if w:
            out += w * np.roll(field, shift=(-dx, -dy), axis=(0, 1))
    return out


def f_field(xi: np.ndarray, m: float, lam: KernelSpec) -> np.ndarray:
    """``f(x; xi)`` at every torus site."""
    xi = np.asarray(xi, dtype=float)
    return xi * np.maximum(m - _kernel_sum(xi, lam), 0.0)


def interaction_f(x, xi: np.ndarray, m: float, lam: KernelSpec) -> float:
    """``xi(x) * (m - sum_z lambda_{xz} xi(z))^+`` with torus wrap."""
    L0, L1 = xi.shape
    i, j = int(x[0]) % L0, int(x[1]) % L1
    if xi[i, j] == 0:
        return 0.0
    s = 0.0
    for (dx, dy), w in zip(lam.offsets, lam.weights):
        s += w * float(xi[(i + dx) % L0, (j + dy) % L1])
    return float(xi[i, j]) * max(m - s, 0.0)


def birth_intensity(xi: np.ndarray, params: ModelParams) -> np.ndarray:
    """``sum_y p_{yx} f(y; xi)`` at every site: the next generation's expected counts."""
    return _kernel_sum(f_field(xi, params.m, params.lam), params.p)


def cml_step(zeta: np.ndarray, params: ModelParams) -> np.ndarray:
    """One step of the coupled map lattice ``zeta' = p * f(.; zeta)``."""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (params.torus_side, params.torus_side):
        raise ParameterError(f"field shape {zeta.shape} does not match torus side {params.torus_side}")
    if np.any(zeta < 0):
        raise ParameterError("density field must be nonnegative")
    return birth_intensity(zeta, params)


def cml_iterate(zeta: np.ndarray, params: ModelParams, n_iter: int = 10_000, tol: float = 1e-8):
    """Iterate the coupled map lattice until the sup-distance to the fixed point is below ``tol``.

    Returns ``(field, iterations, sup_error)``.
    """
    target = params.fixed_point
    z = np.asarray(zeta, dtype=float)
    err = float(np.max(np.abs(z - target)))
    for it in range(1, n_iter + 1):
        z = cml_step(z, params)
        err = float(np.max(np.abs(z - target)))
        if err < tol:
            return z, it, err
    return z, n_iter, err
