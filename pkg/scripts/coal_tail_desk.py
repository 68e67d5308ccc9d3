"""Coalescence and meeting tails in the full model at desk-sized N.

The horizon grows like N^(2 gamma) and the torus like sqrt(horizon), so
memory per environment is printed before each run.
"""
import argparse
import time
from dataclasses import replace

from lbrw.experiments import ExperimentSpec, collect_traces, sized_params, tail_profile
from lbrw.kernels import default_params


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--gammas", type=float, nargs="+", default=[1.0, 1.25, 1.5, 2.0])
    ap.add_argument("--replicates", type=int, default=200)
    ap.add_argument("--burn-in", type=int, default=100)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = default_params(torus_side=16, burn_in=args.burn_in)
    print(f"{'N':>4} {'gamma':>6} {'t':>8} {'P(coal>t)':>10} {'P(meet>t)':>10} {'1/gamma':>8}")
    for N in args.N:
        spec = ExperimentSpec(base, N, gamma=args.gammas[0], gammas=tuple(args.gammas),
                              replicates=args.replicates, master_seed=args.seed)
        spec = replace(spec, params=sized_params(base, N, spec.direction, spec.horizon))
        mb = spec.params.torus_side ** 2 * (spec.horizon + 1) * 2 / 2 ** 20
        print(f"# N={N}: horizon {spec.horizon}, side {spec.params.torus_side}, {mb:.1f} MiB per environment")
        t0 = time.perf_counter()
        ts = collect_traces(spec, args.workers)
        for c, m in zip(tail_profile(ts, "coal"), tail_profile(ts, "meet")):
            print(f"{N:4d} {c.gamma:6.2f} {c.threshold:8d} {c.p_hat:10.3f} {m.p_hat:10.3f} {c.limit:8.3f}")
        print(f"# {len(ts.traces)} traces, {ts.n_discarded} discarded, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
