"""``lbrw <command> --config <path> [--seed S] [--workers W] [--out DIR]``."""
from __future__ import annotations

import argparse
import io as _io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import io as out_io
from .analytics import (
    WMParams,
    erdos_taylor_tail,
    ss_preset,
    stepping_stone_psi_asymptotic,
    stepping_stone_green_many,
    wm_scaling_value,
    wright_malecot_phi,
)
from .analytics.stepping_stone import SteppingStoneParams
from .config import COMMANDS, RunConfig, parse_config, serialize
from .errors import ConfigError, LBRWError
from .experiments import (
    ExperimentSpec,
    collect_traces,
    estimate_phi,
    phi_from_tail,
    replay_replicate,
    sized_params,
    tail_profile,
)
from .forward import density_stats, drift_check, save_record, simulate_environment
from .kernels import ModelParams, kernel_from_triples, uniform_box_kernel
from .oracles import SSOracleSpec, eight_neighbour_kernel, rw_hitting_times, simulate_ss_psi, tail_from_times, walk_kernel
from .rng import RngStream, stream_id

IO_EXIT = 5


def build_kernel(value, kind: str = "migration"):
    if isinstance(value, str):
        presets = {
            "box1": lambda: uniform_box_kernel(1),
            "box2": lambda: uniform_box_kernel(2),
            "ss": lambda: ss_preset().p,
            "eight": eight_neighbour_kernel,
        }
        if kind == "walk":
            presets["srw"] = lambda: walk_kernel([(1, 0), (-1, 0), (0, 1), (0, -1)], [0.25] * 4)
        if value not in presets:
            raise ConfigError(f"unknown kernel preset {value!r}; choose from {', '.join(presets)}")
        return presets[value]()
    if kind == "walk":
        return walk_kernel([(t[0], t[1]) for t in value], [t[2] for t in value])
    return kernel_from_triples(value, kind=kind)


def build_params(cfg: RunConfig) -> ModelParams:
    s = cfg.sections["model"]
    return ModelParams(
        m=s["m"], lam=build_kernel(s["lambda"], "competition"), p=build_kernel(s["p"]),
        torus_side=s["torus_side"], burn_in=s["burn_in"],
    )


def build_specs(cfg: RunConfig) -> list[ExperimentSpec]:
    params = build_params(cfg)
    e = cfg.sections["experiment"]
    specs = []
    for N in e["N"]:
        spec = ExperimentSpec(
            params=params, N=N, gamma=e["gamma"], direction=e["direction"], mu_coefficient=e["mu_coefficient"],
            replicates=e["replicates"], master_seed=cfg.seed, horizon_factor=e["horizon_factor"],
            gammas=e["gammas"], pairs_per_environment=e["pairs_per_environment"],
            memory_budget=cfg.sections["model"]["memory_budget"], tag=f"lbrw-{cfg.command}",
        )
        if e["auto_side"]:
            from dataclasses import replace

            spec = replace(spec, params=sized_params(params, N, spec.direction, spec.horizon))
        specs.append(spec)
    return specs


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)  # schema name -> rows
    logs: dict = field(default_factory=dict)  # file name -> records
    footer: dict = field(default_factory=dict)
    blobs: dict = field(default_factory=dict)  # file name -> callable(path)


# commands -----------------------------------------------------------------------

def cmd_forward(cfg: RunConfig) -> RunResult:
    params = build_params(cfg)
    f = cfg.sections["forward"]
    stream = RngStream(cfg.seed, stream_id("lbrw-forward"))
    rec, discarded = simulate_environment(params, f["generations"], stream,
                                          memory_budget=cfg.sections["model"]["memory_budget"])
    means, variances = density_stats(rec)
    first = rec.origin_generation
    rows = [(first + t, float(mu), float(v)) for t, (mu, v) in enumerate(zip(means, variances))]
    tail = means[-100:] if len(means) >= 100 else means
    footer = {"n_discarded": discarded, "fixed_point": params.fixed_point,
              "mean_density_last": float(tail.mean())}
    if len(tail) >= 4:
        diff, se, ok = drift_check(tail)
        footer["drift"] = {"difference": diff, "standard_error": se, "within_3se": bool(ok)}
    res = RunResult({"forward": rows}, footer=footer)
    if f["save_record"]:
        res.blobs["record.bin"] = lambda path: save_record(rec, path)
    return res


def _replicate_log(specs_and_sets):
    log = []
    for spec, ts in specs_and_sets:
        for entry in ts.log:
            log.append({"N": spec.N, **entry})
    return log


def _tail_command(cfg: RunConfig, which: str) -> RunResult:
    rows, sets = [], []
    discarded = 0
    for spec in build_specs(cfg):
        ts = collect_traces(spec, cfg.workers)
        sets.append((spec, ts))
        discarded += ts.n_discarded
        for est in tail_profile(ts, which):
            rows.append((spec.N, est.gamma, est.threshold, est.p_hat, est.ci_lo, est.ci_hi,
                         est.n_effective, est.n_discarded, est.limit))
    res = RunResult({f"{which}_tail": rows}, footer={"n_discarded": discarded,
                                                     "correlated": specs_correlated(sets)})
    if cfg.sections["experiment"]["log_replicates"]:
        res.logs["replicates.jsonl"] = _replicate_log(sets)
    return res


def specs_correlated(sets) -> bool:
    return any(spec.correlated for spec, _ in sets)


def cmd_coal_tail(cfg):
    return _tail_command(cfg, "coal")


def cmd_meet_tail(cfg):
    return _tail_command(cfg, "meet")


def cmd_phi(cfg: RunConfig) -> RunResult:
    rows, sets = [], []
    discarded = 0
    for spec in build_specs(cfg):
        ts = collect_traces(spec, cfg.workers)
        sets.append((spec, ts))
        discarded += ts.n_discarded
        est = estimate_phi(spec, traces=ts)
        t_lo, t_hi = phi_from_tail(ts, est.mu)
        rows.append((spec.N, spec.gamma, est.mu, est.lo, est.hi, est.ci_lo, est.ci_hi, est.n, est.n_censored,
                     est.reference, t_lo, t_hi))
    res = RunResult({"phi": rows}, footer={"n_discarded": discarded, "correlated": specs_correlated(sets)})
    if cfg.sections["experiment"]["log_replicates"]:
        res.logs["replicates.jsonl"] = _replicate_log(sets)
    return res


def cmd_trace(cfg: RunConfig) -> RunResult:
    spec = build_specs(cfg)[0]
    ts = collect_traces(spec, cfg.workers)
    rows = [(*tr.start1, *tr.start2, tr.tau_meet, tr.tau_coal, tr.steps_taken, tr.max_separation, tr.horizon)
            for tr in ts.traces]
    buf = _io.StringIO()
    replay_replicate(spec, 0, dump=buf)
    steps = [json.loads(line) for line in buf.getvalue().splitlines()]
    return RunResult({"trace": rows}, logs={"steps.jsonl": steps}, footer={"n_discarded": ts.n_discarded})


def cmd_wm_table(cfg: RunConfig) -> RunResult:
    w = cfg.sections["wm"]
    wm = WMParams(delta=w["delta"], sigma=w["sigma"], mu=w["mu"], kappa=w["kappa"])
    phi_rows = [(r, wright_malecot_phi(r, wm)) for r in sorted(w["r"])]
    scaling = []
    for g in w["gamma"]:
        for N in w["N"]:
            sv = wm_scaling_value(N, g, w["m"], w["y_norm"], wm)
            scaling.append((N, g, sv.value, sv.limit_reference))
    return RunResult({"wm_phi": phi_rows, "wm_scaling": scaling})


def build_ss(cfg: RunConfig) -> SteppingStoneParams:
    s = cfg.sections["stepping_stone"]
    if s["kernel"] == "ss":
        return ss_preset(s["N_deme"], s["u"])
    return SteppingStoneParams(s["N_deme"], s["u"], build_kernel(s["kernel"]))


def cmd_stepping_stone(cfg: RunConfig) -> RunResult:
    s = cfg.sections["stepping_stone"]
    ss = build_ss(cfg)
    seps = list(s["separations"])
    g = stepping_stone_green_many([(0, 0), *seps], ss, s["series_tol"])
    g0 = g[0]
    rows = []
    for sep, gx in zip(seps, g[1:]):
        psi = gx / (ss.N_deme + g0)
        r = math.hypot(*sep)
        asym = stepping_stone_psi_asymptotic(r, ss) if ss.decomposed and r > 0 else None
        mc = se = z = None
        if s["monte_carlo"]:
            est = simulate_ss_psi(SSOracleSpec(ss, sep, s["replicates"], seed=cfg.seed, tol=s["bias_tol"]),
                                  cfg.workers)
            mc, se = est.mean, est.se
            z = (mc - psi) / se if se > 0 else None
        rows.append((sep[0], sep[1], r, psi, asym, mc, se, z))
    return RunResult({"stepping_stone": rows})


def cmd_oracle_rw(cfg: RunConfig) -> RunResult:
    o = cfg.sections["oracle_rw"]
    kernel = build_kernel(o["kernel"], "walk")
    n = o["n"]
    th = sorted(set(o["thresholds"]) | {n})
    if th[-1] > n:
        raise ConfigError(f"thresholds must not exceed n = {n}")
    tau = rw_hitting_times(o["x"], n, o["replicates"], cfg.seed, kernel, cfg.workers)
    xn = math.hypot(*o["x"])
    rows = []
    for t in th:
        est = tail_from_times(tau, t, n)
        et = erdos_taylor_tail(xn, t) if xn > 1 and t >= 2 else None
        rows.append((t, est.p_hat, est.ci_lo, est.ci_hi, est.n, et, est.p_hat / et if et else None))
    return RunResult({"oracle_rw": rows})


def cmd_selftest(cfg: RunConfig) -> RunResult:
    from .selftest import run_selftest

    results = run_selftest(seed=cfg.seed)
    rows = [(name, "pass" if ok else "fail", detail) for name, ok, detail in results]
    return RunResult({"selftest": rows}, footer={"failed": [r[0] for r in rows if r[1] == "fail"]})


HANDLERS = {
    "forward": cmd_forward,
    "trace": cmd_trace,
    "coal-tail": cmd_coal_tail,
    "meet-tail": cmd_meet_tail,
    "phi": cmd_phi,
    "wm-table": cmd_wm_table,
    "stepping-stone": cmd_stepping_stone,
    "oracle-rw": cmd_oracle_rw,
    "selftest": cmd_selftest,
}


# driver ---------------------------------------------------------------------------

def _header(cfg: RunConfig, tables) -> dict:
    return {
        "command": cfg.command, "version": __version__, "seed": cfg.seed, "workers": cfg.workers,
        "config": cfg.to_dict(), "schemas": {n: out_io.schema_tag(n) for n in tables},
    }


def run(cfg: RunConfig, stderr=None) -> int:
    """Execute ``cfg`` and write its artifacts; returns the process exit status."""
    stderr = stderr or sys.stderr
    out = Path(cfg.out)
    if not out.is_dir():
        err = {"error": "FileNotFoundError", "exit_code": IO_EXIT, "message": f"output directory {out} does not exist"}
        print(json.dumps(err), file=stderr)
        return IO_EXIT
    t0 = time.perf_counter()
    try:
        (out / "config.ini").write_text(serialize(cfg), encoding="utf-8")
        res = HANDLERS[cfg.command](cfg)
        for name, rows in res.tables.items():
            out_io.write_csv(out / f"{name}.csv", name, rows)
        for fname, records in res.logs.items():
            out_io.write_jsonl(out / fname, records)
        for fname, writer in res.blobs.items():
            writer(out / fname)
        status = 0
        if cfg.command == "selftest" and res.footer.get("failed"):
            status = 3
        footer = {"wall_time": time.perf_counter() - t0, "status": status, **res.footer}
        out_io.write_json(out / "meta.json", {"header": _header(cfg, res.tables), "footer": footer})
        return status
    except (LBRWError, OSError) as exc:
        code = exc.exit_code if isinstance(exc, LBRWError) else IO_EXIT
        err = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
        try:
            out_io.write_json(out / "error.json", err)
            out_io.write_json(out / "meta.json", {
                "header": _header(cfg, {}),
                "footer": {"wall_time": time.perf_counter() - t0, "status": code, "error": err},
            })
        except OSError:
            pass
        print(json.dumps(err), file=stderr)
        return code


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lbrw", description="Logistic branching random walk genealogy toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="run configuration file (default: empty, all defaults)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", help="existing output directory")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "exit_code": IO_EXIT, "message": str(exc)}), file=sys.stderr)
        return IO_EXIT
    try:
        cfg = parse_config(text, args.command).with_run(seed=args.seed, workers=args.workers, out=args.out)
    except LBRWError as exc:
        print(json.dumps({"error": type(exc).__name__, "exit_code": exc.exit_code, "message": str(exc)}),
              file=sys.stderr)
        return exc.exit_code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
