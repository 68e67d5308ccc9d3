"""Backward-in-time ancestral lineages in a recorded environment.

Given the space-time field, one lineage at site ``x`` in frame ``t`` picks
its ancestor ``y`` in frame ``t - 1`` with probability proportional to
``p_{yx} f(y; eta_{t-1})``.  For two lineages every case of the quenched
pair law (distinct or equal current sites, distinct or equal ancestor
sites) reduces to the product of the two single-lineage laws, with the
mass on a common ancestor site ``x`` split into "same parent" (probability
``1 / eta_{t-1}(x)``) and "different parents at the same site".
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoAncestorMass, OccupancyViolation, WindowExhausted
from .forward import FieldRecord
from .kernels import ModelParams
from .rng import as_generator


def wrap(site, side: int) -> tuple[int, int]:
    return (int(site[0]) % side, int(site[1]) % side)


def torus_delta(a, b, side: int) -> tuple[int, int]:
    """Minimal-image displacement ``b - a``."""
    d = []
    for k in range(2):
        v = (int(b[k]) - int(a[k])) % side
        if v > side // 2:
            v -= side
        d.append(v)
    return d[0], d[1]


def torus_distance(a, b, side: int) -> float:
    dx, dy = torus_delta(a, b, side)
    return math.hypot(dx, dy)


def torus_chebyshev(a, b, side: int) -> int:
    dx, dy = torus_delta(a, b, side)
    return max(abs(dx), abs(dy))


@dataclass(frozen=True)
class PairState:
    pos1: tuple[int, int]
    pos2: tuple[int, int]
    frame: int
    coalesced: bool = False

    def __post_init__(self):
        if self.coalesced and tuple(self.pos1) != tuple(self.pos2):
            raise ValueError("a coalesced pair must sit on one site")


@dataclass(frozen=True, eq=False)
class PairStepDistribution:
    """Joint law of the two ancestors, one entry per (ancestor1, ancestor2, coalesce).

    Entries are in lexicographic order of ``(ancestor1, ancestor2, coalesce)``.
    """

    anc1: np.ndarray  # (n, 2) int
    anc2: np.ndarray  # (n, 2) int
    coalesce: np.ndarray  # (n,) bool
    prob: np.ndarray  # (n,) float

    @property
    def entries(self):
        return [
            ((int(a[0]), int(a[1])), (int(b[0]), int(b[1])), bool(c), float(p))
            for a, b, c, p in zip(self.anc1, self.anc2, self.coalesce, self.prob)
        ]

    def __len__(self):
        return len(self.prob)

    def total(self) -> float:
        return math.fsum(self.prob)

    def marginal(self, which: int) -> dict:
        """Law of one ancestor, summed over the other and the coalescence mark."""
        anc = self.anc1 if which == 1 else self.anc2
        out: dict = {}
        for a, p in zip(anc, self.prob):
            key = (int(a[0]), int(a[1]))
            out[key] = out.get(key, 0.0) + float(p)
        return out


@dataclass(frozen=True)
class PairTrace:
    start1: tuple[int, int]
    start2: tuple[int, int]
    tau_meet: int | None  # None: censored
    tau_coal: int | None
    steps_taken: int
    max_separation: float
    horizon: int

    def coal_exceeds(self, t: int) -> bool:
        """Indicator ``tau_coal > t``; needs ``t <= horizon`` when censored."""
        return _exceeds(self.tau_coal, t, self.horizon)

    def meet_exceeds(self, t: int) -> bool:
        return _exceeds(self.tau_meet, t, self.horizon)

    def to_dict(self) -> dict:
        return {
            "start1": list(self.start1), "start2": list(self.start2),
            "tau_meet": self.tau_meet, "tau_coal": self.tau_coal,
            "steps_taken": self.steps_taken, "max_separation": self.max_separation,
            "horizon": self.horizon,
        }


def _exceeds(tau, t, horizon):
    if tau is not None:
        return tau > t
    if t > horizon:
        raise ValueError(f"threshold {t} beyond trace horizon {horizon}")
    return True


# single lineage ------------------------------------------------------------

def _occupancy(rec: FieldRecord, t: int, x) -> int:
    i, j = wrap(x, rec.side)
    return int(rec.frames[t][i, j])


def _ancestor_weights(x, t: int, rec: FieldRecord, params: ModelParams):
    """Candidate ancestor sites (sorted, wrapped) with unnormalized weights ``p f``."""
    L = rec.side
    prev = rec.frames[t - 1]
    p_off = np.asarray(params.p.offsets)
    p_w = np.asarray(params.p.weights)
    ys = (np.asarray(x, dtype=np.int64) + p_off) % L
    lam_off = np.asarray(params.lam.offsets)
    lam_w = np.asarray(params.lam.weights)
    nb = (ys[:, None, :] + lam_off[None, :, :]) % L
    comp = (prev[nb[..., 0], nb[..., 1]].astype(float) * lam_w).sum(axis=1)
    occ = prev[ys[:, 0], ys[:, 1]].astype(float)
    w = p_w * occ * np.maximum(params.m - comp, 0.0)
    order = np.lexsort((ys[:, 1], ys[:, 0]))
    return ys[order], w[order], occ[order]


def _check_frame(t: int, rec: FieldRecord):
    if not 1 <= t < rec.generations:
        raise WindowExhausted(f"frame {t} has no predecessor in a record of {rec.generations} frames")


def single_step_distribution(x, t: int, rec: FieldRecord, params: ModelParams):
    """Law of the ancestor (in frame ``t - 1``) of an individual at ``x`` in frame ``t``.

    Returns a list of ``(site, prob)`` in lexicographic site order.
    """
    _check_frame(t, rec)
    if _occupancy(rec, t, x) < 1:
        raise OccupancyViolation(f"site {tuple(x)} is empty in frame {t}")
    sites, w, _ = _ancestor_weights(x, t, rec, params)
    tot = w.sum()
    if tot <= 0:
        raise NoAncestorMass(f"no ancestor mass for site {tuple(x)} in frame {t}")
    return [((int(s[0]), int(s[1])), float(v / tot)) for s, v in zip(sites, w)]


# pair ----------------------------------------------------------------------

def pair_step_distribution(state: PairState, rec: FieldRecord, params: ModelParams) -> PairStepDistribution:
    if state.coalesced:
        raise ValueError("lineages already coalesced")
    t = state.frame
    _check_frame(t, rec)
    same = wrap(state.pos1, rec.side) == wrap(state.pos2, rec.side)
    n1, n2 = _occupancy(rec, t, state.pos1), _occupancy(rec, t, state.pos2)
    if n1 < 1 or n2 < 1:
        raise OccupancyViolation(f"lineage site empty in frame {t}")
    if same and n1 < 2:
        raise OccupancyViolation(f"two distinct lineages on site {tuple(state.pos1)} holding {n1} individual")

    s1, w1, occ1 = _ancestor_weights(state.pos1, t, rec, params)
    s2, w2, _ = _ancestor_weights(state.pos2, t, rec, params)
    t1, t2 = w1.sum(), w2.sum()
    if t1 <= 0 or t2 <= 0:
        raise NoAncestorMass(f"no ancestor mass in frame {t - 1}")
    q1, q2 = w1 / t1, w2 / t2

    k1, k2 = len(s1), len(s2)
    prod = np.outer(q1, q2).ravel()
    match = np.all(s1[:, None, :] == s2[None, :, :], axis=2).ravel()
    reps = 1 + match.astype(np.int64)
    idx = np.repeat(np.arange(k1 * k2), reps)
    i1, i2 = idx // k2, idx % k2
    # second copy of a matched pair is the coalescence entry
    coal = np.zeros(len(idx), dtype=bool)
    first = np.concatenate(([True], idx[1:] != idx[:-1]))
    coal[~first] = True
    prob = prod[idx].copy()
    # an empty common site already carries zero product mass
    m = match[idx] & (occ1[i1] > 0)
    inv = np.zeros(len(idx))
    inv[m] = 1.0 / occ1[i1[m]]
    prob[match[idx] & ~m] = 0.0
    prob[m & coal] *= inv[m & coal]
    prob[m & ~coal] *= 1.0 - inv[m & ~coal]
    return PairStepDistribution(s1[i1], s2[i2], coal, prob)


def pair_step(state: PairState, rec: FieldRecord, params: ModelParams, rng) -> PairState:
    """Sample one backward step with a single uniform draw against cumulative sums."""
    dist = pair_step_distribution(state, rec, params)
    cum = np.cumsum(dist.prob)
    u = as_generator(rng).random() * cum[-1]
    k = min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)
    a1, a2 = dist.anc1[k], dist.anc2[k]
    return PairState((int(a1[0]), int(a1[1])), (int(a2[0]), int(a2[1])), state.frame - 1, bool(dist.coalesce[k]))


def trace_pair(start1, start2, rec: FieldRecord, params: ModelParams, horizon: int, rng, dump=None) -> PairTrace:
    """Trace two lineages sampled in the last frame back for at most ``horizon`` steps.

    ``dump`` may be a text stream; one JSON object per backward step is
    written to it.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon > rec.generations - 1:
        raise WindowExhausted(f"horizon {horizon} needs {horizon + 1} frames, record has {rec.generations}")
    gen = as_generator(rng)
    L = rec.side
    top = rec.generations - 1
    s1, s2 = wrap(start1, L), wrap(start2, L)
    n1, n2 = _occupancy(rec, top, s1), _occupancy(rec, top, s2)
    if n1 < 1 or n2 < 1 or (s1 == s2 and n1 < 2):
        raise OccupancyViolation("start sites must hold the sampled individuals")

    state = PairState(s1, s2, top)
    if dump is not None:
        _dump(dump, state)
    tau_meet = tau_coal = None
    max_sep = torus_distance(s1, s2, L)
    steps = 0
    for k in range(1, horizon + 1):
        state = pair_step(state, rec, params, gen)
        steps = k
        if dump is not None:
            _dump(dump, state)
        if tau_meet is None:
            sep = torus_distance(state.pos1, state.pos2, L)
            max_sep = max(max_sep, sep)
            if sep == 0.0:
                tau_meet = k
        if state.coalesced:
            tau_coal = k
            break
    return PairTrace(s1, s2, tau_meet, tau_coal, steps, max_sep, horizon)


def _dump(stream, state: PairState):
    stream.write(json.dumps({
        "frame": state.frame, "pos1": list(state.pos1), "pos2": list(state.pos2),
        "coalesced": state.coalesced,
    }) + "\n")
