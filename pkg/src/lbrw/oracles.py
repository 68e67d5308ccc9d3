"""Brute-force Monte Carlo oracles on the unbounded lattice.

Walkers are plain integer pairs; there is no torus.  Replicates are
processed in fixed-size chunks, each on its own substream, so estimates do
not depend on how chunks are scheduled.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytics.stepping_stone import SteppingStoneParams
from .errors import DomainError
from .experiments import wilson_interval
from .kernels import KernelSpec, make_kernel
from .rng import RngStream, stream_id

CHUNK = 10_000
BLOCK = 256


def eight_neighbour_kernel() -> KernelSpec:
    offs = [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)]
    return make_kernel(offs, [1 / 8] * 8)


class _Sampler:
    def __init__(self, kernel: KernelSpec):
        self.offsets = np.asarray(kernel.offsets, dtype=np.int32)
        w = np.asarray(kernel.weights)
        self.uniform = bool(np.all(w == w[0]))
        self.cum = np.cumsum(w)
        self.cum[-1] = 1.0

    def draw(self, gen, shape):
        if self.uniform:
            idx = gen.integers(0, len(self.offsets), size=shape)
        else:
            idx = np.searchsorted(self.cum, gen.random(shape), side="right")
        return self.offsets[idx]


def first_events(start, kernel: KernelSpec, n_steps: int, merge_prob: float, replicates: int, gen,
                 two_walkers: bool = True, block: int = BLOCK):
    """Meeting and merge times of walkers started at offset ``start`` from the origin.

    With ``two_walkers`` the tracked offset is the difference of two
    independent ``kernel`` walks, otherwise a single walk.  After each step
    an offset of 0 merges with probability ``merge_prob``.  Returns
    ``(tau_meet, tau_merge)`` with -1 for walkers that did not do so
    within ``n_steps``.
    """
    samp = _Sampler(kernel)
    pos = np.tile(np.asarray(start, dtype=np.int32), (replicates, 1))
    meet = np.full(replicates, -1, dtype=np.int64)
    merge = np.full(replicates, -1, dtype=np.int64)
    active = np.arange(replicates)
    t0 = 0
    while t0 < n_steps and len(active):
        B = min(block, n_steps - t0)
        inc = samp.draw(gen, (len(active), B))
        if two_walkers:
            inc = inc - samp.draw(gen, (len(active), B))
        path = pos[active][:, None, :] + np.cumsum(inc, axis=1, dtype=np.int32)
        zero = (path[..., 0] == 0) & (path[..., 1] == 0)
        if merge_prob >= 1.0:
            hit = zero
        else:
            hit = zero & (gen.random((len(active), B)) < merge_prob)
        any_zero = zero.any(axis=1)
        first_zero = np.argmax(zero, axis=1)
        new_meet = any_zero & (meet[active] < 0)
        meet[active[new_meet]] = t0 + 1 + first_zero[new_meet]
        any_hit = hit.any(axis=1)
        merge[active[any_hit]] = t0 + 1 + np.argmax(hit[any_hit], axis=1)
        pos[active] = path[:, -1, :]
        active = active[~any_hit]
        t0 += B
    return meet, merge


# stepping-stone identity --------------------------------------------------------

def ss_step_cap(ss: SteppingStoneParams, tol: float) -> int:
    """Smallest cap with ``(1-u)^(2 cap) / (1 - (1-u)^2) / N < tol``."""
    a = (1.0 - ss.u) ** 2
    return max(1, math.ceil(math.log(tol * (1.0 - a) * ss.N_deme) / math.log(a)))


@dataclass(frozen=True)
class SSOracleSpec:
    ss: SteppingStoneParams
    separation: tuple[int, int]
    replicates: int = 100_000
    step_cap: int | None = None
    seed: int = 0
    tol: float = 1e-6

    def __post_init__(self):
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if not self.tol > 0:
            raise DomainError("tol must be > 0")
        if self.step_cap is not None and self.step_cap < ss_step_cap(self.ss, self.tol):
            raise DomainError(f"step_cap {self.step_cap} leaves truncation bias above {self.tol}")

    @property
    def cap(self) -> int:
        return self.step_cap if self.step_cap is not None else ss_step_cap(self.ss, self.tol)

    @property
    def bias_bound(self) -> float:
        a = (1.0 - self.ss.u) ** 2
        return a ** self.cap / (1.0 - a) / self.ss.N_deme


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    se: float
    n: int
    meta: dict


def _ss_chunk(spec: SSOracleSpec, c: int):
    n = min(CHUNK, spec.replicates - c * CHUNK)
    gen = RngStream(spec.seed, stream_id("ss-oracle")).substream("chunk", c).generator()
    _, tau = first_events(spec.separation, spec.ss.p, spec.cap, 1.0 / spec.ss.N_deme, n, gen)
    a = (1.0 - spec.ss.u) ** 2
    vals = np.where(tau > 0, a ** np.maximum(tau, 0).astype(float), 0.0)
    return math.fsum(vals), math.fsum(vals * vals), n


def _chunked(fn, spec, n_chunks, workers):
    if workers <= 1:
        return [fn(spec, c) for c in range(n_chunks)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, [spec] * n_chunks, range(n_chunks)))


def simulate_ss_psi(spec: SSOracleSpec, workers: int = 1) -> MCEstimate:
    """``E[(1-u)^(2T)]`` for the delayed-coalescence merge time ``T`` (0 if unmerged by the cap)."""
    n_chunks = math.ceil(spec.replicates / CHUNK)
    parts = _chunked(_ss_chunk, spec, n_chunks, workers)
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    n = sum(p[2] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return MCEstimate(mean, math.sqrt(var / n), n, {"step_cap": spec.cap, "bias_bound": spec.bias_bound})


# origin avoidance -----------------------------------------------------------------

@dataclass(frozen=True)
class RWTailEstimate:
    threshold: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    n: int


@dataclass(frozen=True)
class _RWJob:
    x: tuple[int, int]
    n: int
    replicates: int
    seed: int
    kernel: KernelSpec


def _rw_chunk(job: _RWJob, c: int):
    m = min(CHUNK, job.replicates - c * CHUNK)
    gen = RngStream(job.seed, stream_id("rw-tail")).substream("chunk", c).generator()
    _, tau = first_events(job.x, job.kernel, job.n, 1.0, m, gen, two_walkers=False)
    return tau


def rw_hitting_times(x, n: int, replicates: int, seed: int = 0, kernel: KernelSpec | None = None,
                     workers: int = 1) -> np.ndarray:
    """First time at the origin for walks from ``x`` (-1 if not within ``n`` steps)."""
    x = (int(x[0]), int(x[1]))
    if x == (0, 0):
        raise DomainError("start must differ from the origin")
    if n < 0 or replicates < 1:
        raise DomainError("need n >= 0 and replicates >= 1")
    job = _RWJob(x, n, replicates, seed, kernel or eight_neighbour_kernel())
    parts = _chunked(_rw_chunk, job, math.ceil(replicates / CHUNK), workers)
    return np.concatenate(parts)


def tail_from_times(tau: np.ndarray, threshold: int, horizon: int) -> RWTailEstimate:
    if threshold > horizon:
        raise DomainError("threshold beyond simulated horizon")
    k = int(np.sum((tau < 0) | (tau > threshold)))
    lo, hi = wilson_interval(k, len(tau))
    p = k / len(tau)
    return RWTailEstimate(threshold, p, min(lo, p), max(hi, p), len(tau))


def simulate_rw_tail(x, n: int, replicates: int, seed: int = 0, kernel: KernelSpec | None = None,
                     workers: int = 1) -> RWTailEstimate:
    """Fraction of walks from ``x`` that avoid the origin during steps ``1..n``."""
    tau = rw_hitting_times(x, n, replicates, seed, kernel, workers)
    return tail_from_times(tau, n, n)


# delayed coalescence proxy ----------------------------------------------------------

def delayed_coalescence_times(separation, kernel: KernelSpec, merge_prob: float, horizon: int,
                              replicates: int, seed: int = 0):
    """``(tau_meet, tau_coal)`` of two independent walks merging with ``merge_prob`` on co-location."""
    meets, coals = [], []
    for c in range(math.ceil(replicates / CHUNK)):
        m = min(CHUNK, replicates - c * CHUNK)
        gen = RngStream(seed, stream_id("coal-proxy")).substream("chunk", c).generator()
        a, b = first_events(separation, kernel, horizon, merge_prob, m, gen)
        meets.append(a)
        coals.append(b)
    return np.concatenate(meets), np.concatenate(coals)


def walk_kernel(offsets, weights) -> KernelSpec:
    """Symmetric stochastic step law for the oracles; unlike migration kernels it may be periodic."""
    k = make_kernel(offsets, weights, kind="competition")
    if abs(k.total - 1.0) > 1e-12:
        from .errors import NotStochastic

        raise NotStochastic(f"walk weights sum to {k.total!r}, not 1")
    return k
