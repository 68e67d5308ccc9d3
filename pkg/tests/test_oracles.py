import math

import numpy as np
import pytest

from lbrw.analytics import SteppingStoneParams, ss_preset, stepping_stone_psi
from lbrw.errors import DomainError, NotStochastic
from lbrw.kernels import uniform_box_kernel
from lbrw.oracles import (
    SSOracleSpec,
    delayed_coalescence_times,
    eight_neighbour_kernel,
    first_events,
    rw_hitting_times,
    simulate_rw_tail,
    simulate_ss_psi,
    tail_from_times,
    walk_kernel,
)
from lbrw.rng import RngStream


def test_deme_of_one_approaches_identity_as_mutation_vanishes():
    # merging happens on co-location after at least one step, as in the series,
    # so psi(0) = G / (1 + G) rises towards 1 only logarithmically as u -> 0
    prev = 0.0
    for u in (0.1, 0.03):
        ss = SteppingStoneParams(1, u, uniform_box_kernel(1))
        est = simulate_ss_psi(SSOracleSpec(ss, (0, 0), replicates=20_000, seed=1))
        assert abs(est.mean - stepping_stone_psi((0, 0), ss)) <= 3 * est.se + est.meta["bias_bound"]
        assert est.mean > prev
        prev = est.mean


def test_high_mutation_gives_zero():
    ss = SteppingStoneParams(5, 1 - 1e-9, uniform_box_kernel(1))
    est = simulate_ss_psi(SSOracleSpec(ss, (0, 0), replicates=1000))
    assert est.mean < 1e-15


def test_step_cap_validation():
    ss = ss_preset()
    with pytest.raises(DomainError):
        SSOracleSpec(ss, (0, 0), step_cap=10)
    spec = SSOracleSpec(ss, (1, 0))
    assert spec.bias_bound < spec.tol


def test_ss_agrees_with_series():
    ss = ss_preset()
    want = stepping_stone_psi((1, 0), ss)
    est = simulate_ss_psi(SSOracleSpec(ss, (1, 0), replicates=20_000, seed=2))
    assert abs(est.mean - want) <= 3 * est.se + est.meta["bias_bound"]


def test_isolation_by_distance():
    ss = ss_preset()
    near = simulate_ss_psi(SSOracleSpec(ss, (1, 0), replicates=20_000, seed=5))
    far = simulate_ss_psi(SSOracleSpec(ss, (6, 0), replicates=20_000, seed=5))
    assert far.mean <= near.mean + 3 * math.hypot(near.se, far.se)


def test_ss_worker_invariance():
    spec = SSOracleSpec(ss_preset(), (2, 0), replicates=25_000, seed=9)
    assert simulate_ss_psi(spec, workers=1) == simulate_ss_psi(spec, workers=2)


def test_one_step_return_probability():
    # from (1, 0) exactly one of the eight steps lands on the origin
    est = simulate_rw_tail((1, 0), 1, 40_000, seed=1)
    assert abs(est.p_hat - 7 / 8) <= 4 * math.sqrt(7 / 64 / 40_000)
    assert est.ci_lo <= est.p_hat <= est.ci_hi


def test_nested_tails_from_one_sample():
    tau = rw_hitting_times((3, 0), 2000, 5000, seed=4)
    vals = [tail_from_times(tau, t, 2000).p_hat for t in (10, 100, 1000, 2000)]
    assert vals == sorted(vals, reverse=True)
    with pytest.raises(DomainError):
        tail_from_times(tau, 3000, 2000)
    with pytest.raises(DomainError):
        rw_hitting_times((0, 0), 10, 10)


def test_rw_determinism():
    a = rw_hitting_times((2, 1), 300, 12_000, seed=7)
    b = rw_hitting_times((2, 1), 300, 12_000, seed=7, workers=2)
    assert np.array_equal(a, b)


def test_first_events_against_loop():
    # a scalar walk-by-walk reference for the vectorized block scheme
    k = eight_neighbour_kernel()
    n, reps = 50, 400
    meet, merge = first_events((2, 0), k, n, 0.5, reps, RngStream(3).generator(), block=7)
    assert np.all((merge < 0) | (meet > 0))
    assert np.all((merge < 0) | (merge >= meet))
    tau, _ = first_events((1, 1), k, n, 1.0, reps, RngStream(3).generator(), two_walkers=False)
    gen = RngStream(3).generator()
    off = np.asarray(k.offsets)
    ref = []
    # same draws: blocks of 50 uniform integers per walker, walker-major
    idx = gen.integers(0, 8, size=(reps, n))
    for r in range(reps):
        x = np.array([1, 1])
        hit = -1
        for t in range(n):
            x = x + off[idx[r, t]]
            if not x.any():
                hit = t + 1
                break
        ref.append(hit)
    assert np.array_equal(tau, ref)


def test_delayed_coalescence_order():
    meet, coal = delayed_coalescence_times((3, 0), uniform_box_kernel(1), 0.2, 400, 3000, seed=1)
    both = coal > 0
    assert np.all(meet[both] > 0) and np.all(meet[both] <= coal[both])


def test_walk_kernel():
    k = walk_kernel([(1, 0), (-1, 0), (0, 1), (0, -1)], [0.25] * 4)
    assert k.total == 1.0
    with pytest.raises(NotStochastic):
        walk_kernel([(1, 0), (-1, 0)], [0.25, 0.25])
