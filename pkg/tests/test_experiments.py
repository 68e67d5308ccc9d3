import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.stats import norm

from lbrw.errors import DomainError, InfeasibleGeometry, OccupancyViolation
from lbrw.experiments import (
    ExperimentSpec,
    TraceSet,
    collect_traces,
    estimate_coal_tail,
    estimate_meet_tail,
    estimate_phi,
    nearest_occupied,
    phi_from_tail,
    replay_replicate,
    scaled_threshold,
    separation_profile,
    side_rule,
    sized_params,
    tail_profile,
    wilson_interval,
)
from lbrw.kernels import default_params
from lbrw.lineage import PairTrace


def _tiny(N=2, gammas=(1.0, 1.5), replicates=12, seed=3, **kw):
    base = default_params(torus_side=8, burn_in=20)
    g = max(gammas)
    p = sized_params(base, N, (1, 0), math.ceil(N ** (2 * g)))
    return ExperimentSpec(p, N, gamma=gammas[0], gammas=gammas, replicates=replicates, master_seed=seed, **kw)


@pytest.fixture(scope="module")
def tiny_traces():
    return collect_traces(_tiny())


# Wilson interval ---------------------------------------------------------------

def test_wilson_examples():
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    with pytest.raises(DomainError):
        wilson_interval(5, 0)
    with pytest.raises(DomainError):
        wilson_interval(11, 10)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 500).flatmap(lambda n: st.tuples(st.integers(1, n - 1) if n > 1 else st.just(0), st.just(n))))
def test_wilson_solves_score_equation(kn):
    k, n = kn
    if k == 0:
        return
    z = 1.96
    ph = k / n
    # endpoints are the roots of (ph - p)^2 = z^2 p (1 - p) / n
    g = lambda p: (ph - p) ** 2 - z * z * p * (1 - p) / n
    lo_ref = brentq(g, 1e-15, ph)
    hi_ref = brentq(g, ph, 1 - 1e-15)
    lo, hi = wilson_interval(k, n, z)
    assert lo == pytest.approx(lo_ref, abs=1e-10) and hi == pytest.approx(hi_ref, abs=1e-10)


def test_wilson_coverage():
    gen = np.random.default_rng(0)
    p, n = 0.3, 200
    ks = gen.binomial(n, p, size=10_000)
    cover = np.mean([lo <= p <= hi for lo, hi in (wilson_interval(int(k), n) for k in ks)])
    assert cover >= 0.93


# geometry ----------------------------------------------------------------------------

def test_side_rule_and_threshold():
    assert side_rule(4, (1, 0), 16, 1) == math.ceil(2 * (4 + 24))
    assert scaled_threshold(32, 1) == 1024
    assert scaled_threshold(32, 1.25) == math.floor(32 ** 2.5)
    assert scaled_threshold(2, 1.5) == 8


def test_infeasible_geometry():
    spec = ExperimentSpec(default_params(), N=32, gamma=2.0)
    with pytest.raises(InfeasibleGeometry):
        collect_traces(spec)


def test_spec_validation():
    p = default_params()
    with pytest.raises(DomainError):
        ExperimentSpec(p, N=4, gamma=0.5)
    with pytest.raises(DomainError):
        ExperimentSpec(p, N=0)
    with pytest.raises(DomainError):
        ExperimentSpec(p, N=4, horizon_factor=0.5)
    assert ExperimentSpec(p, N=4, gamma=1.5).mu == pytest.approx(4 ** -3)


def test_nearest_occupied():
    fr = np.zeros((8, 8), dtype=np.uint16)
    fr[2, 3] = 1
    fr[5, 5] = 3
    assert nearest_occupied(fr, (2, 3)) == (2, 3)
    assert nearest_occupied(fr, (2, 2)) == (2, 3)
    assert nearest_occupied(fr, (2, 3), min_count=2) == (5, 5)
    # tie at Chebyshev distance 1 resolved lexicographically by displacement
    fr2 = np.zeros((8, 8), dtype=np.uint16)
    fr2[0, 1] = fr2[1, 0] = 1
    assert nearest_occupied(fr2, (1, 1)) == (0, 1)
    with pytest.raises(OccupancyViolation):
        nearest_occupied(np.zeros((4, 4), dtype=np.uint16), (0, 0))


# tails ---------------------------------------------------------------------------------

def test_tails_nested_and_meet_below_coal(tiny_traces):
    ts = tiny_traces
    assert len(ts.traces) + ts.n_discarded >= 12
    coal = tail_profile(ts, "coal")
    meet = tail_profile(ts, "meet")
    assert [e.threshold for e in coal] == [4, 8]
    assert coal[0].p_hat >= coal[1].p_hat
    for c, m in zip(coal, meet):
        assert m.p_hat <= c.p_hat
        assert c.ci_lo <= c.p_hat <= c.ci_hi
    assert coal[1].limit == pytest.approx(1 / 1.5)
    for tr in ts.traces:
        assert tr.horizon == ts.horizon == 8
        if tr.tau_coal is not None:
            assert tr.tau_meet is not None and tr.tau_meet <= tr.tau_coal


def test_seed_determinism_and_worker_invariance(tiny_traces):
    again = collect_traces(_tiny(), workers=2)
    assert [t.to_dict() for t in again.traces] == [t.to_dict() for t in tiny_traces.traces]
    assert again.log == tiny_traces.log
    other = collect_traces(_tiny(seed=4))
    assert [t.to_dict() for t in other.traces] != [t.to_dict() for t in tiny_traces.traces]


def test_single_estimators_use_spec_gamma(tiny_traces):
    spec = tiny_traces.spec
    c = estimate_coal_tail(spec, traces=tiny_traces)
    m = estimate_meet_tail(spec, traces=tiny_traces)
    assert c.threshold == m.threshold == 4 and m.p_hat <= c.p_hat


def test_replay_matches_collected(tiny_traces):
    for r in (0, 5):
        row = tiny_traces.log[r]
        if "discarded" in row:
            continue
        tr = replay_replicate(tiny_traces.spec, r)
        assert {k: row[k] for k in tr.to_dict()} == tr.to_dict()


# identity by descent ----------------------------------------------------------------

def _synthetic(taus, horizon=4, gamma=1.0):
    spec = ExperimentSpec(default_params(torus_side=64), N=2, gamma=gamma, horizon_factor=horizon / 4)
    trs = [PairTrace((0, 0), (2, 0), t if t is not None else None, t, t or horizon, 2.0, spec.horizon) for t in taus]
    return TraceSet(spec, trs)


def test_phi_examples():
    ts = _synthetic([1] * 10)
    est = estimate_phi(ts.spec, traces=ts, mu=0.1)
    assert est.point == pytest.approx(0.81, abs=1e-15)
    assert estimate_phi(ts.spec, traces=ts, mu=0.0).point == 1.0
    assert est.reference == 0.0
    ts2 = _synthetic([1, None], gamma=2.0)
    e2 = estimate_phi(ts2.spec, traces=ts2, mu=0.0)
    # with mu = 0 every pair is identical eventually, censored or not
    assert e2.point == 1.0 and e2.reference == 0.5 and e2.n_censored == 1
    e3 = estimate_phi(ts2.spec, traces=ts2, mu=0.5)
    assert e3.point is None and e3.lo < e3.hi
    assert e3.lo == pytest.approx(0.25 / 2) and e3.hi == pytest.approx((0.25 + 0.25 ** ts2.horizon) / 2)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(st.none(), st.integers(1, 4)), min_size=1, max_size=40), st.floats(0.0, 0.9))
def test_phi_two_paths_agree(taus, mu):
    ts = _synthetic(taus)
    est = estimate_phi(ts.spec, traces=ts, mu=mu, n_boot=50)
    lo, hi = phi_from_tail(ts, mu)
    assert abs(lo - est.lo) <= 1e-12 and abs(hi - est.hi) <= 1e-12
    assert est.ci_lo <= est.lo <= est.hi <= est.ci_hi


def test_phi_on_simulated_traces(tiny_traces):
    spec = tiny_traces.spec
    est = estimate_phi(spec, traces=tiny_traces)
    lo, hi = phi_from_tail(tiny_traces, spec.mu)
    assert est.lo - 1e-12 <= lo <= hi <= est.hi + 1e-12
    assert est.mu == pytest.approx(2 ** -2)


def test_separation_profile(tiny_traces):
    s = separation_profile(tiny_traces.spec, traces=tiny_traces)
    assert s.n_total == len(tiny_traces.traces)
    if not s.empty:
        assert list(s.quantiles) == sorted(s.quantiles)
        assert s.quantiles[0] >= 1.0
    ts0 = _synthetic([None, None])
    ts0.traces = [PairTrace((0, 0), (2, 0), None, None, 0, 2.0, 0)] * 2
    e = separation_profile(ts0.spec, traces=ts0)
    assert e.empty and e.quantiles == ()


def test_bootstrap_ci_loosely_matches_normal():
    gen = np.random.default_rng(1)
    taus = list(gen.integers(1, 5, size=400))
    ts = _synthetic([int(t) for t in taus])
    est = estimate_phi(ts.spec, traces=ts, mu=0.2)
    vals = np.array([(0.8 ** 2) ** t for t in taus])
    half = norm.ppf(0.975) * vals.std(ddof=1) / math.sqrt(len(vals))
    assert (est.ci_hi - est.ci_lo) == pytest.approx(2 * half, rel=0.25)
