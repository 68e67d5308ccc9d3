"""Acceptance criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary lists
one PASS/FAIL line per criterion.
"""
import math
import time

import numpy as np
import pytest

from lbrw.analytics import (
    WM_PRESET,
    bessel_annulus_green_f,
    bessel_annulus_green_kernel,
    bessel_k0,
    erdos_taylor_tail,
    ss_preset,
    stepping_stone_psi,
    stepping_stone_psi_asymptotic,
    wm_scaling_value,
)
from lbrw.cli import run
from lbrw.config import parse_config
from lbrw.errors import NoAncestorMass
from lbrw.experiments import (
    ExperimentSpec,
    collect_traces,
    estimate_phi,
    phi_from_tail,
    scaled_threshold,
    sized_params,
    tail_estimate,
)
from lbrw.forward import density_stats, drift_check, simulate_environment
from lbrw.kernels import cml_iterate, cml_step, default_params
from lbrw.oracles import SSOracleSpec, simulate_rw_tail, simulate_ss_psi
from lbrw.rng import RngStream

from oracle_k0 import k0_quad
from pair_oracle import check_identities, matches_literal_cases, random_case
from scipy.integrate import quad


def _measured(record_property, text):
    record_property("measured", text)


@pytest.mark.criterion(1, "pair kernel exactness on 1000 random recorded configurations")
def test_criterion_01_pair_kernels(record_property):
    t0 = time.perf_counter()
    gen = np.random.default_rng(20240601)
    done = 0
    while done < 1000:
        params, rec, y1, y2 = random_case(gen)
        try:
            check_identities(params, rec, y1, y2, tol=1e-12)
        except NoAncestorMass:
            continue
        assert matches_literal_cases(params, rec, y1, y2)
        done += 1
    dt = time.perf_counter() - t0
    _measured(record_property, f"{done} configs, {dt:.1f}s")
    assert dt < 60


@pytest.mark.criterion(2, "coupled map lattice fixed point and convergence")
def test_criterion_02_fixed_point(record_property):
    worst_inv = worst_conv = 0.0
    for m in (1.5, 2.0, 2.5):
        p = default_params(m=m, torus_side=32)
        fp = p.fixed_point
        assert fp == pytest.approx((m - 1) / 0.025, rel=1e-15)
        inv = float(np.max(np.abs(cml_step(np.full((32, 32), fp), p) - fp)))
        worst_inv = max(worst_inv, inv)
        assert inv <= 1e-12
        for s in range(3):
            z0 = np.random.default_rng(s).uniform(0.01, 2 * fp, size=(32, 32))
            _, it, err = cml_iterate(z0, p, n_iter=10_000, tol=1e-8)
            worst_conv = max(worst_conv, err)
            assert err < 1e-8
    _measured(record_property, f"invariance {worst_inv:.1e}, convergence {worst_conv:.1e}")


@pytest.mark.criterion(3, "stationary density at the preset")
def test_criterion_03_stationary_density(record_property):
    p = default_params()
    rec, discarded = simulate_environment(p, 300, RngStream(3))
    means, _ = density_stats(rec)
    last = means[-100:]
    diff, se, ok = drift_check(last, 3.0)
    _measured(record_property, f"mean {last.mean():.3f}, half-difference {diff:+.3f} (se {se:.3f})")
    assert abs(last.mean() - 40) <= 4.0
    assert ok


@pytest.mark.criterion(4, "coalescence tails at N=32, 2000 replicates, gamma in {1, 1.25, 1.5, 2}")
def test_criterion_04_coalescence_tails(record_property):
    gammas = (1.0, 1.25, 1.5, 2.0)
    spec = ExperimentSpec(default_params(), N=32, gamma=1.0, gammas=gammas, replicates=2000, master_seed=4)
    sized = spec.params.replace(torus_side=spec.min_side)
    need = sized.torus_side ** 2 * (spec.horizon + 1) * 2
    _measured(record_property, f"horizon {spec.horizon}, side {spec.min_side}, {need:.2e} bytes per environment")
    ts = collect_traces(spec)
    coal = [tail_estimate(ts, scaled_threshold(32, g), "coal") for g in gammas]
    meet = [tail_estimate(ts, scaled_threshold(32, g), "meet") for g in gammas]
    p = [e.p_hat for e in coal]
    assert all(a >= b for a, b in zip(p, p[1:]))
    assert p[0] >= 0.8
    assert p[-1] <= p[0] - 0.15
    assert all(m.p_hat <= c.p_hat for m, c in zip(meet, coal))


@pytest.mark.criterion(5, "identity bracket equals the tail-sum value on the same traces")
def test_criterion_05_phi_consistency(record_property):
    base = default_params(torus_side=16, burn_in=50)
    worst = 0.0
    for N, g, hf in ((2, 1.5, 1.0), (3, 1.0, 2.0), (4, 1.0, 1.0)):
        horizon = math.ceil(hf * N ** (2 * g))
        spec = ExperimentSpec(sized_params(base, N, (1, 0), horizon), N, gamma=g, replicates=60,
                              master_seed=5, horizon_factor=hf)
        ts = collect_traces(spec)
        est = estimate_phi(spec, traces=ts)
        lo, hi = phi_from_tail(ts, est.mu)
        worst = max(worst, abs(lo - est.lo), abs(hi - est.hi))
        assert est.lo - 1e-12 <= lo <= hi <= est.hi + 1e-12
        assert abs(lo - est.lo) <= 1e-12 and abs(hi - est.hi) <= 1e-12
    _measured(record_property, f"largest difference {worst:.1e}")


@pytest.mark.criterion(6, "Wright-Malecot scaling value near 1 - 1/gamma")
def test_criterion_06_wm_scaling(record_property):
    t0 = time.perf_counter()
    vals = [wm_scaling_value(N, 2.0, 1.0, 1.0, WM_PRESET).value for N in (1e4, 1e6, 1e8)]
    dt = time.perf_counter() - t0
    _measured(record_property, ", ".join(f"{v:.4f}" for v in vals))
    assert abs(vals[-1] - 0.5) <= 0.05
    gaps = [abs(v - 0.5) for v in vals]
    assert gaps[0] > gaps[1] > gaps[2]
    assert dt < 1.0


@pytest.mark.criterion(7, "Bessel K0 against its integral form, and the ODE residual")
def test_criterion_07_bessel(record_property):
    t0 = time.perf_counter()
    ts = np.logspace(-6, math.log10(700), 200)
    err = max(abs(bessel_k0(t) / k0_quad(t) - 1) for t in ts)
    res = 0.0
    for t in np.logspace(-1, math.log10(50), 100):
        h = 1e-4 * t
        f0, fp, fm = bessel_k0(t), bessel_k0(t + h), bessel_k0(t - h)
        r = abs((fp - 2 * f0 + fm) / h ** 2 + (fp - fm) / (2 * h) / t - f0) / max(1.0, f0)
        res = max(res, r)
    dt = time.perf_counter() - t0
    _measured(record_property, f"max rel error {err:.1e}, ODE residual {res:.1e}, {dt:.1f}s")
    assert err <= 1e-9
    assert res <= 1e-5
    assert dt < 10


@pytest.mark.criterion(8, "stepping-stone series against coalescing-walk Monte Carlo")
def test_criterion_08_stepping_stone_mc(record_property):
    t0 = time.perf_counter()
    ss = ss_preset(20, 0.02)
    zs = []
    for sep in ((0, 0), (1, 0), (5, 0)):
        est = simulate_ss_psi(SSOracleSpec(ss, sep, replicates=100_000, seed=8))
        want = stepping_stone_psi(sep, ss)
        z = (est.mean - want) / est.se
        zs.append(z)
        assert est.n >= 100_000
        assert abs(est.mean - want) <= 3 * est.se
    dt = time.perf_counter() - t0
    _measured(record_property, "z = " + ", ".join(f"{z:+.2f}" for z in zs) + f", {dt:.0f}s")
    assert dt < 300


@pytest.mark.criterion(9, "stepping-stone small-u Bessel form at u=1e-3, r=10")
def test_criterion_09_stepping_stone_asymptotic(record_property):
    ss = ss_preset(20, 1e-3)
    series = stepping_stone_psi((10, 0), ss)
    asym = stepping_stone_psi_asymptotic(10.0, ss)
    gap = abs(asym - series) / series
    _measured(record_property, f"relative gap {gap:.2%}")
    assert gap <= 0.15


@pytest.mark.criterion(10, "origin-avoidance tail against the Erdos-Taylor formula")
def test_criterion_10_erdos_taylor(record_property):
    t0 = time.perf_counter()
    est = simulate_rw_tail((10, 0), 100_000, 10_000, seed=10)
    ref = erdos_taylor_tail(10.0, 100_000)
    ratio = est.p_hat / ref
    dt = time.perf_counter() - t0
    _measured(record_property, f"p_hat {est.p_hat:.4f}, formula {ref:.4f}, ratio {ratio:.3f}, {dt:.0f}s")
    assert 0.7 <= ratio <= 1.3
    assert dt < 300


@pytest.mark.criterion(11, "annulus Green function: boundary, generator, quadrature")
def test_criterion_11_green(record_property):
    a, b, beta = 2.0, 8.0, 4.0
    bnd = max(abs(bessel_annulus_green_f(a, a, b, beta)), abs(bessel_annulus_green_f(b, a, b, beta)))
    f = lambda y: bessel_annulus_green_f(y, a, b, beta)
    gen = 0.0
    for x in (3.0, (a + b) / 2, 7.0):
        h = 1e-3
        d2 = (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
        d1 = (f(x + h) - f(x - h)) / (2 * h)
        gen = max(gen, abs(0.5 * d2 + d1 / (2 * x) + x ** -beta))
    qd = 0.0
    for x in (2.5, 5.0, 7.5):
        g = lambda xi: bessel_annulus_green_kernel(x, xi, a, b) * xi ** -beta
        v = quad(g, a, x, epsabs=1e-14)[0] + quad(g, x, b, epsabs=1e-14)[0]
        qd = max(qd, abs(v - f(x)))
    _measured(record_property, f"boundary {bnd:.1e}, generator {gen:.1e}, quadrature {qd:.1e}")
    assert bnd <= 1e-10
    assert gen <= 1e-6
    assert qd <= 1e-6


REPRO = {
    "forward": "[model]\ntorus_side = 32\nburn_in = 50\n[forward]\ngenerations = 60\n",
    "trace": "[model]\ntorus_side = 16\nburn_in = 30\n[experiment]\nN = [3]\nreplicates = 16\nauto_side = true\n",
    "coal-tail": "[model]\ntorus_side = 16\nburn_in = 30\n[experiment]\nN = [2, 3]\ngammas = (1.25, 1.5)\n"
                 "replicates = 16\nauto_side = true\nlog_replicates = true\n",
    "meet-tail": "[model]\ntorus_side = 16\nburn_in = 30\n[experiment]\nN = [2, 3]\ngammas = (1.5,)\n"
                 "replicates = 16\nauto_side = true\n",
    "phi": "[model]\ntorus_side = 16\nburn_in = 30\n[experiment]\nN = [2, 3]\ngamma = 1.5\nreplicates = 16\n"
           "auto_side = true\nlog_replicates = true\n",
    "wm-table": "",
    "stepping-stone": "[stepping_stone]\nreplicates = 40000\n",
    "oracle-rw": "[oracle_rw]\nx = (4, 0)\nn = 2000\nthresholds = [100, 1000]\nreplicates = 40000\n",
}


@pytest.mark.criterion(12, "byte-identical outputs for repeated runs under 1 and 8 workers")
def test_criterion_12_reproducibility(tmp_path, record_property):
    t0 = time.perf_counter()
    compared = 0
    for command, text in REPRO.items():
        dirs = []
        for tag, workers in (("w1", 1), ("w1b", 1), ("w8", 8)):
            d = tmp_path / command / tag
            d.mkdir(parents=True)
            cfg = parse_config(text, command).with_run(seed=12, workers=workers, out=str(d))
            assert run(cfg) == 0
            dirs.append(d)
        files = sorted(p.name for p in dirs[0].iterdir() if p.suffix in (".csv", ".jsonl"))
        assert files
        for name in files:
            ref = (dirs[0] / name).read_bytes()
            for d in dirs[1:]:
                assert (d / name).read_bytes() == ref, f"{command}/{name} differs in {d.name}"
            compared += 1
    dt = time.perf_counter() - t0
    _measured(record_property, f"{compared} files across {len(REPRO)} commands, {dt:.0f}s")
    assert dt < 300
