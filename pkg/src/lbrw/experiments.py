"""Monte Carlo drivers for coalescence / meeting-time tails and identity by descent.

Every replicate runs on its own substream of ``master_seed``, and
aggregation only uses sums and counts over replicates sorted by index.
Results therefore do not depend on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleGeometry, NoAncestorMass, OccupancyViolation
from .forward import DEFAULT_MEMORY_BUDGET, FieldRecord, simulate_environment
from .kernels import ModelParams
from .lineage import PairTrace, trace_pair
from .rng import RngStream, stream_id


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise DomainError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    if z < 0:
        raise DomainError("z must be >= 0")
    n = float(trials)
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def side_rule(N: int, direction, horizon: int, p_range: int = 1) -> int:
    """Smallest torus side for which wrap-around is negligible over ``horizon`` steps."""
    norm = math.hypot(*direction)
    return math.ceil(2 * (N * norm + 6 * p_range * math.sqrt(horizon)))


def scaled_threshold(N: int, gamma: float) -> int:
    """Integer threshold ``t`` with ``{tau > N^(2 gamma)} = {tau > t}``."""
    return int(math.floor(float(N) ** (2 * gamma) + 1e-9))


@dataclass(frozen=True)
class ExperimentSpec:
    params: ModelParams
    N: int
    gamma: float = 1.0
    direction: tuple[float, float] = (1.0, 0.0)
    mu_coefficient: float = 1.0
    replicates: int = 100
    master_seed: int = 0
    horizon_factor: float = 1.0
    # additional gammas evaluated on the same traces; the horizon covers all of them
    gammas: tuple[float, ...] = ()
    pairs_per_environment: int = 1
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    tag: str = "lbrw"

    def __post_init__(self):
        if self.N < 1:
            raise DomainError("N must be >= 1")
        if any(g < 1 for g in self.all_gammas):
            raise DomainError("gamma must be >= 1")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if self.mu_coefficient <= 0:
            raise DomainError("mu coefficient must be > 0")
        if self.horizon_factor < 1:
            raise DomainError("horizon_factor must be >= 1 so the horizon covers N^(2 gamma)")
        if self.pairs_per_environment < 1:
            raise DomainError("pairs_per_environment must be >= 1")

    @property
    def all_gammas(self) -> tuple[float, ...]:
        return tuple(sorted({float(self.gamma), *map(float, self.gammas)}))

    @property
    def horizon(self) -> int:
        return math.ceil(self.horizon_factor * float(self.N) ** (2 * max(self.all_gammas)) - 1e-9)

    @property
    def separation(self) -> tuple[int, int]:
        return (round(self.N * self.direction[0]), round(self.N * self.direction[1]))

    @property
    def mu(self) -> float:
        return self.mu_coefficient * float(self.N) ** (-2 * self.gamma)

    @property
    def min_side(self) -> int:
        return side_rule(self.N, self.direction, self.horizon, self.params.p.range)

    @property
    def correlated(self) -> bool:
        return self.pairs_per_environment > 1

    def check_geometry(self):
        if self.params.torus_side < self.min_side:
            raise InfeasibleGeometry(
                f"torus side {self.params.torus_side} < {self.min_side} required for N={self.N}, horizon={self.horizon}"
            )


def sized_params(params: ModelParams, N: int, direction, horizon: int) -> ModelParams:
    """``params`` with the torus enlarged (never shrunk) to satisfy the side rule."""
    side = max(params.torus_side, side_rule(N, direction, horizon, params.p.range))
    return params.replace(torus_side=side)


@dataclass(frozen=True)
class SurvivalEstimate:
    threshold: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    n_effective: int
    n_discarded: int
    gamma: float | None = None

    @property
    def limit(self) -> float | None:
        return None if self.gamma is None else 1.0 / self.gamma


@dataclass
class TraceSet:
    spec: ExperimentSpec
    traces: list  # PairTrace, sorted by replicate index
    n_discarded: int = 0
    log: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.spec.horizon


# replicate machinery ----------------------------------------------------------

def nearest_occupied(frame: np.ndarray, site, min_count: int = 1) -> tuple[int, int]:
    """Nearest site (Chebyshev, minimal image) holding at least ``min_count`` individuals.

    Ties are broken lexicographically by displacement.
    """
    L = frame.shape[0]
    i0, j0 = int(site[0]) % L, int(site[1]) % L
    if frame[i0, j0] >= min_count:
        return (i0, j0)
    for r in range(1, L // 2 + 1):
        ring = [(dx, dy) for dx in range(-r, r + 1) for dy in range(-r, r + 1) if max(abs(dx), abs(dy)) == r]
        for dx, dy in sorted(ring):
            s = ((i0 + dx) % L, (j0 + dy) % L)
            if frame[s] >= min_count:
                return s
    raise OccupancyViolation("no occupied site on the torus")


def _choose_starts(rec: FieldRecord, separation):
    top = rec.frames[-1]
    a = nearest_occupied(top, (0, 0))
    b = nearest_occupied(top, separation)
    if b == a and top[a] < 2:
        b = nearest_occupied(top, separation, min_count=2)
    return a, b


def _run_group(spec: ExperimentSpec, group: int):
    """All replicates sharing environment ``group``; returns [(index, trace|None, discards, note)]."""
    root = RngStream(spec.master_seed, stream_id(spec.tag))
    k = spec.pairs_per_environment
    first, last = group * k, min((group + 1) * k, spec.replicates)
    rec, env_discards = simulate_environment(
        spec.params, spec.horizon + 1, root.substream("env", group), memory_budget=spec.memory_budget
    )
    out = []
    for r in range(first, last):
        disc = env_discards if r == first else 0
        try:
            a, b = _choose_starts(rec, spec.separation)
            tr = trace_pair(a, b, rec, spec.params, spec.horizon, root.substream("pair", r))
            out.append((r, tr, disc, None))
        except (NoAncestorMass, OccupancyViolation) as exc:
            out.append((r, None, disc + 1, type(exc).__name__))
    return out


def _run_group_star(args):
    return _run_group(*args)


def collect_traces(spec: ExperimentSpec, workers: int = 1) -> TraceSet:
    """Run every replicate of ``spec`` and gather the pair traces."""
    spec.check_geometry()
    # fail fast on memory before spawning workers
    L = spec.params.torus_side
    need = L * L * (spec.horizon + 1) * 2
    if need > spec.memory_budget:
        from .errors import MemoryBudgetExceeded

        raise MemoryBudgetExceeded(
            f"each environment needs {need} bytes ({L}^2 sites x {spec.horizon + 1} frames), budget is {spec.memory_budget}"
        )
    n_groups = math.ceil(spec.replicates / spec.pairs_per_environment)
    jobs = [(spec, g) for g in range(n_groups)]
    if workers <= 1:
        results = [_run_group(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_group_star, jobs))
    rows = sorted((row for res in results for row in res), key=lambda t: t[0])
    traces = [tr for _, tr, _, _ in rows if tr is not None]
    discarded = sum(d for _, _, d, _ in rows)
    log = [
        {"replicate": r, **(tr.to_dict() if tr is not None else {"discarded": note}), "env_discards": d}
        for r, tr, d, note in rows
    ]
    return TraceSet(spec, traces, discarded, log)


# estimators -------------------------------------------------------------------

def tail_estimate(ts: TraceSet, threshold: int, which: str = "coal", gamma=None, z: float = 1.96) -> SurvivalEstimate:
    if threshold > ts.horizon:
        raise DomainError(f"threshold {threshold} beyond horizon {ts.horizon}")
    if which == "coal":
        hits = sum(tr.coal_exceeds(threshold) for tr in ts.traces)
    elif which == "meet":
        hits = sum(tr.meet_exceeds(threshold) for tr in ts.traces)
    else:
        raise ValueError(which)
    n = len(ts.traces)
    if n == 0:
        return SurvivalEstimate(threshold, float("nan"), 0.0, 1.0, 0, ts.n_discarded, gamma)
    lo, hi = wilson_interval(hits, n, z)
    p = hits / n
    return SurvivalEstimate(threshold, p, min(lo, p), max(hi, p), n, ts.n_discarded, gamma)


def tail_profile(ts: TraceSet, which: str = "coal", gammas=None) -> list[SurvivalEstimate]:
    gammas = ts.spec.all_gammas if gammas is None else sorted(gammas)
    return [tail_estimate(ts, scaled_threshold(ts.spec.N, g), which, gamma=g) for g in gammas]


def estimate_coal_tail(spec: ExperimentSpec, workers: int = 1, traces: TraceSet | None = None) -> SurvivalEstimate:
    """``P(tau_coal > N^(2 gamma))`` with a 95% Wilson interval."""
    ts = traces if traces is not None else collect_traces(spec, workers)
    return tail_estimate(ts, scaled_threshold(spec.N, spec.gamma), "coal", gamma=spec.gamma)


def estimate_meet_tail(spec: ExperimentSpec, workers: int = 1, traces: TraceSet | None = None) -> SurvivalEstimate:
    """``P(tau_meet > N^(2 gamma))`` with a 95% Wilson interval."""
    ts = traces if traces is not None else collect_traces(spec, workers)
    return tail_estimate(ts, scaled_threshold(spec.N, spec.gamma), "meet", gamma=spec.gamma)


def coal_tail_profile(spec: ExperimentSpec, workers: int = 1) -> list[SurvivalEstimate]:
    """Coalescence tails for every gamma of ``spec`` on one shared trace set."""
    return tail_profile(collect_traces(spec, workers), "coal")


@dataclass(frozen=True)
class PhiEstimate:
    mu: float
    lo: float  # censored traces contribute their lowest possible value
    hi: float  # ... and their highest
    ci_lo: float
    ci_hi: float
    n: int
    n_censored: int
    reference: float

    @property
    def point(self) -> float | None:
        return self.lo if self.lo == self.hi else None


def _phi_values(ts: TraceSet, mu: float):
    a = (1.0 - mu) ** 2
    H = ts.horizon
    floor = 1.0 if a == 1.0 else 0.0
    lo, hi = [], []
    for tr in ts.traces:
        if tr.tau_coal is not None:
            v = a ** tr.tau_coal
            lo.append(v)
            hi.append(v)
        else:
            lo.append(floor)
            hi.append(a ** H)
    return np.asarray(lo), np.asarray(hi)


def estimate_phi(spec: ExperimentSpec, workers: int = 1, traces: TraceSet | None = None,
                 mu: float | None = None, n_boot: int = 1000) -> PhiEstimate:
    """Bracket for ``E[(1 - mu_N)^(2 tau_coal)]`` with a bootstrap 95% interval."""
    ts = traces if traces is not None else collect_traces(spec, workers)
    mu = spec.mu if mu is None else mu
    if not 0 <= mu < 1:
        raise DomainError("mu must lie in [0, 1)")
    ref = 1.0 - 1.0 / spec.gamma
    lo, hi = _phi_values(ts, mu)
    n = len(lo)
    if n == 0:
        return PhiEstimate(mu, float("nan"), float("nan"), 0.0, 1.0, 0, 0, ref)
    n_cens = sum(tr.tau_coal is None for tr in ts.traces)
    gen = RngStream(spec.master_seed, stream_id(spec.tag, 1)).substream("bootstrap").generator()
    idx = gen.integers(0, n, size=(n_boot, n))
    blo, bhi = lo[idx].mean(axis=1), hi[idx].mean(axis=1)
    m_lo, m_hi = math.fsum(lo) / n, math.fsum(hi) / n
    return PhiEstimate(mu, m_lo, m_hi, min(float(np.quantile(blo, 0.025)), m_lo),
                       max(float(np.quantile(bhi, 0.975)), m_hi), n, n_cens, ref)


def phi_from_tail(ts: TraceSet, mu: float) -> tuple[float, float]:
    """Same bracket as :func:`estimate_phi`, computed from the empirical tail of ``tau_coal``.

    Uses ``E[a^min(tau, H)] = 1 - sum_{t<H} (a^t - a^(t+1)) P(tau > t)`` with
    ``a = (1 - mu)^2`` and moves the censored mass down to its floor.
    """
    a = (1.0 - mu) ** 2
    H = ts.horizon
    n = len(ts.traces)
    taus = np.array([tr.tau_coal if tr.tau_coal is not None else H + 1 for tr in ts.traces])
    counts = np.bincount(np.minimum(taus, H + 1), minlength=H + 2)
    # survival[t] = #{tau > t}
    survival = n - np.cumsum(counts)[:H]
    t = np.arange(H)
    hi = 1.0 - math.fsum((a ** t - a ** (t + 1)) * survival) / n
    n_cens = int(counts[H + 1])
    floor = 1.0 if a == 1.0 else 0.0
    lo = hi - n_cens / n * (a ** H - floor)
    return lo, hi


@dataclass(frozen=True)
class SeparationSummary:
    levels: tuple[float, ...]
    quantiles: tuple[float, ...]
    n_met: int
    n_total: int
    frac_exceeding: float  # fraction of all traces whose pre-meeting maximum reaches N^gamma
    scale: float

    @property
    def empty(self) -> bool:
        return self.n_met == 0


def separation_profile(spec: ExperimentSpec, workers: int = 1, traces: TraceSet | None = None,
                       levels=(0.05, 0.25, 0.5, 0.75, 0.95)) -> SeparationSummary:
    """Quantiles of the maximal separation before meeting, among traces that met."""
    ts = traces if traces is not None else collect_traces(spec, workers)
    scale = float(spec.N) ** spec.gamma
    met = np.array([tr.max_separation for tr in ts.traces if tr.tau_meet is not None])
    allsep = np.array([tr.max_separation for tr in ts.traces])
    frac = float(np.mean(allsep >= scale)) if len(allsep) else float("nan")
    if len(met) == 0:
        return SeparationSummary(tuple(levels), (), 0, len(allsep), frac, scale)
    q = tuple(float(v) for v in np.quantile(met, levels))
    return SeparationSummary(tuple(levels), q, len(met), len(allsep), frac, scale)


def replay_replicate(spec: ExperimentSpec, r: int, dump=None) -> PairTrace:
    """Re-run replicate ``r`` alone (same streams as in :func:`collect_traces`), optionally dumping each step."""
    spec.check_geometry()
    root = RngStream(spec.master_seed, stream_id(spec.tag))
    rec, _ = simulate_environment(
        spec.params, spec.horizon + 1, root.substream("env", r // spec.pairs_per_environment),
        memory_budget=spec.memory_budget,
    )
    a, b = _choose_starts(rec, spec.separation)
    return trace_pair(a, b, rec, spec.params, spec.horizon, root.substream("pair", r), dump=dump)
