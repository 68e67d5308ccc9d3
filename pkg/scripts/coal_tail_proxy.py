"""Coalescence tails of two random walks that merge with probability 1/c on co-location.

A cheap stand-in for lineages in an environment of density c: it shows how
slowly P(tau > N^(2 gamma)) approaches 1/gamma as N grows.
"""
import argparse

import numpy as np

from lbrw.kernels import uniform_box_kernel
from lbrw.oracles import delayed_coalescence_times


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, nargs="+", default=[4, 8, 16, 32])
    ap.add_argument("--gammas", type=float, nargs="+", default=[1.0, 1.25, 1.5, 2.0])
    ap.add_argument("--density", type=float, default=40.0)
    ap.add_argument("--replicates", type=int, default=2000)
    ap.add_argument("--max-horizon", type=int, default=1 << 20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    k = uniform_box_kernel(1)
    for N in args.N:
        ths = [int(np.floor(N ** (2 * g) + 1e-9)) for g in args.gammas]
        horizon = min(max(ths), args.max_horizon)
        meet, coal = delayed_coalescence_times((N, 0), k, 1.0 / args.density, horizon, args.replicates, args.seed)
        cells = []
        for g, t in zip(args.gammas, ths):
            if t > horizon:
                cells.append(f"g={g:g}: beyond horizon")
                continue
            p = np.mean((coal < 0) | (coal > t))
            cells.append(f"g={g:g}: {p:.3f} (1/g={1 / g:.3f})")
        print(f"N={N:4d}  " + "  ".join(cells))


if __name__ == "__main__":
    main()
