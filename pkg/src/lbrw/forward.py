"""Forward-in-time simulation of the logistic branching random walk on a torus.

Count fields are ``(side, side)`` arrays of ``uint16``.  A :class:`FieldRecord`
stacks consecutive generations into a read-only ``(T, side, side)`` array
that the lineage tracer walks backwards through.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IntensityOverflow, MemoryBudgetExceeded, ParameterError, PersistentExtinction, RecordFormatError
from .kernels import ModelParams, birth_intensity
from .rng import RngStream, as_generator

COUNT_DTYPE = np.uint16
COUNT_MAX = np.iinfo(COUNT_DTYPE).max
# Poisson(6e4) exceeds 65535 with probability ~1e-100
INTENSITY_LIMIT = 6.0e4
DEFAULT_MEMORY_BUDGET = 2 << 30  # bytes

RECORD_MAGIC = b"LBRWREC1"
_HEADER = struct.Struct("<8sIIqQ")


@dataclass(frozen=True)
class Extinct:
    """Reported outcome: every site was empty at ``generation``."""

    generation: int


@dataclass(frozen=True, eq=False)
class FieldRecord:
    """Space-time occupation field over a recorded window.

    ``frames[t]`` is generation ``origin_generation + t``; frame 0 is the
    earliest.
    """

    frames: np.ndarray
    origin_generation: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        fr = self.frames
        if fr.ndim != 3 or fr.shape[1] != fr.shape[2]:
            raise ParameterError(f"frames must have shape (T, side, side), got {fr.shape}")
        if fr.dtype != COUNT_DTYPE:
            raise ParameterError(f"frames must be {np.dtype(COUNT_DTYPE).name}")
        if fr.flags.writeable:
            fr.flags.writeable = False

    @property
    def side(self) -> int:
        return self.frames.shape[1]

    @property
    def generations(self) -> int:
        return self.frames.shape[0]

    def __len__(self):
        return self.generations

    def __eq__(self, other):
        if not isinstance(other, FieldRecord):
            return NotImplemented
        return (
            self.origin_generation == other.origin_generation
            and self.seed == other.seed
            and np.array_equal(self.frames, other.frames)
        )


def initial_field(params: ModelParams, rng) -> np.ndarray:
    """I.i.d. Poisson counts with the deterministic fixed-point mean."""
    gen = as_generator(rng)
    L = params.torus_side
    return _to_counts(gen.poisson(params.fixed_point, size=(L, L)))


def _to_counts(draw: np.ndarray) -> np.ndarray:
    if draw.size and draw.max() > COUNT_MAX:
        raise IntensityOverflow(f"site count {int(draw.max())} exceeds {COUNT_MAX}")
    return draw.astype(COUNT_DTYPE)


def forward_step(eta: np.ndarray, params: ModelParams, rng) -> np.ndarray:
    """Draw the next generation: independent ``Poisson(sum_y p_{yx} f(y; eta))`` per site."""
    if eta.shape != (params.torus_side, params.torus_side):
        raise ParameterError(f"field shape {eta.shape} does not match torus side {params.torus_side}")
    intensity = birth_intensity(eta, params)
    peak = float(intensity.max()) if intensity.size else 0.0
    if peak > INTENSITY_LIMIT:
        raise IntensityOverflow(f"site intensity {peak:.4g} exceeds safety bound {INTENSITY_LIMIT:g}")
    return _to_counts(as_generator(rng).poisson(intensity))


def run_burn_in(eta0: np.ndarray, params: ModelParams, rng, steps: int | None = None):
    """Apply ``params.burn_in`` forward steps (or ``steps``); returns the field or :class:`Extinct`."""
    gen = as_generator(rng)
    n = params.burn_in if steps is None else steps
    eta = np.asarray(eta0, dtype=COUNT_DTYPE)
    if not eta.any():
        return Extinct(0)
    for g in range(1, n + 1):
        eta = forward_step(eta, params, gen)
        if not eta.any():
            return Extinct(g)
    return eta


def record_window(eta_start: np.ndarray, T_rec: int, params: ModelParams, rng, *,
                  memory_budget: int = DEFAULT_MEMORY_BUDGET, origin_generation: int = 0, seed: int = 0):
    """Record ``T_rec`` consecutive generations starting with ``eta_start``.

    Returns a :class:`FieldRecord`, or :class:`Extinct` (partial frames are
    discarded) if the population dies out inside the window.
    """
    if T_rec < 2:
        raise ParameterError(f"T_rec must be >= 2, got {T_rec}")
    L = params.torus_side
    need = L * L * int(T_rec) * np.dtype(COUNT_DTYPE).itemsize
    if need > memory_budget:
        raise MemoryBudgetExceeded(f"record needs {need} bytes ({L}^2 sites x {T_rec} frames), budget is {memory_budget}")
    gen = as_generator(rng)
    frames = np.empty((T_rec, L, L), dtype=COUNT_DTYPE)
    frames[0] = eta_start
    if not frames[0].any():
        return Extinct(origin_generation)
    for t in range(1, T_rec):
        frames[t] = forward_step(frames[t - 1], params, gen)
        if not frames[t].any():
            return Extinct(origin_generation + t)
    return FieldRecord(frames, origin_generation=origin_generation, seed=seed)


def simulate_environment(params: ModelParams, T_rec: int, stream: RngStream, *,
                         max_attempts: int = 10, memory_budget: int = DEFAULT_MEMORY_BUDGET):
    """Burn in from the Poisson fixed-point start and record a window.

    Extinct attempts are discarded and redrawn on a fresh substream.  Returns
    ``(record, n_discarded)``.
    """
    L = params.torus_side
    need = L * L * int(T_rec) * np.dtype(COUNT_DTYPE).itemsize
    if need > memory_budget:
        raise MemoryBudgetExceeded(f"record needs {need} bytes ({L}^2 sites x {T_rec} frames), budget is {memory_budget}")
    for attempt in range(max_attempts):
        gen = stream.substream("environment", attempt).generator()
        eta = run_burn_in(initial_field(params, gen), params, gen)
        if isinstance(eta, Extinct):
            continue
        rec = record_window(eta, T_rec, params, gen, memory_budget=memory_budget,
                            origin_generation=params.burn_in, seed=stream.master_seed)
        if isinstance(rec, FieldRecord):
            return rec, attempt
    raise PersistentExtinction(f"population went extinct in {max_attempts} consecutive attempts")


def density_stats(rec: FieldRecord):
    """Per-frame mean and variance (population moments) of the counts."""
    if rec is None or rec.generations == 0:
        return np.empty(0), np.empty(0)
    fr = rec.frames.reshape(rec.generations, -1).astype(float)
    return fr.mean(axis=1), fr.var(axis=1)


def drift_check(means: np.ndarray, n_sigma: float = 3.0):
    """Compare the mean density of the two halves of a trace.

    Returns ``(difference, standard_error, ok)``; ``ok`` is True when
    ``|difference| <= n_sigma * standard_error``.
    """
    means = np.asarray(means, dtype=float)
    h = len(means) // 2
    a, b = means[:h], means[h:2 * h]
    diff = float(b.mean() - a.mean())
    se = float(np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b)))
    return diff, se, abs(diff) <= n_sigma * se


# binary export -------------------------------------------------------------

def save_record(rec: FieldRecord, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RECORD_MAGIC, rec.side, rec.generations, rec.origin_generation, rec.seed))
        fh.write(np.ascontiguousarray(rec.frames, dtype="<u2").tobytes())


def load_record(path) -> FieldRecord:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise RecordFormatError("file shorter than header")
    magic, side, T, origin, seed = _HEADER.unpack_from(data)
    if magic != RECORD_MAGIC:
        raise RecordFormatError(f"bad magic {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != 2 * side * side * T:
        raise RecordFormatError(f"expected {2 * side * side * T} payload bytes, found {len(body)}")
    frames = np.frombuffer(body, dtype="<u2").reshape(T, side, side).astype(COUNT_DTYPE)
    return FieldRecord(frames, origin_generation=origin, seed=seed)
