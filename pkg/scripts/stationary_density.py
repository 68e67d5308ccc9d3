"""Burn in the preset model and report the recorded density trace."""
import argparse

from lbrw.forward import density_stats, drift_check, simulate_environment
from lbrw.kernels import default_params
from lbrw.rng import RngStream


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--side", type=int, default=64)
    ap.add_argument("--burn-in", type=int, default=200)
    ap.add_argument("--generations", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    p = default_params(torus_side=args.side, burn_in=args.burn_in)
    rec, discarded = simulate_environment(p, args.generations, RngStream(args.seed))
    means, variances = density_stats(rec)
    print(f"fixed point {p.fixed_point:g}, extinct attempts discarded: {discarded}")
    for t in range(0, rec.generations, max(1, rec.generations // 10)):
        print(f"  gen {rec.origin_generation + t:5d}  mean {means[t]:8.3f}  var {variances[t]:8.3f}")
    last = means[-100:]
    diff, se, ok = drift_check(last)
    print(f"last {len(last)} generations: mean {last.mean():.3f}, half-difference {diff:+.4f} (se {se:.4f})"
          f" -> {'no drift' if ok else 'DRIFT'} at 3 se")


if __name__ == "__main__":
    main()
