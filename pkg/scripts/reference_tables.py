"""Closed-form reference tables: Wright-Malecot scaling and stepping-stone identity."""
import math

from lbrw.analytics import (
    WM_PRESET,
    ss_preset,
    stepping_stone_green_many,
    stepping_stone_psi_asymptotic,
    wm_scaling_value,
)


def main():
    print("Wright-Malecot value at separation N, mu = N^(-2 gamma)")
    for g in (1.0, 1.5, 2.0):
        row = [wm_scaling_value(N, g, 1.0, 1.0, WM_PRESET).value for N in (1e2, 1e4, 1e6, 1e8)]
        print(f"  gamma={g:3.1f}  " + "  ".join(f"{v:.4f}" for v in row) + f"   limit {1 - 1 / g:.4f}")

    print("stepping stone, N_deme=20: series vs small-u Bessel form")
    for u in (0.02, 1e-3):
        ss = ss_preset(20, u)
        seps = [(1, 0), (5, 0), (10, 0), (20, 0)]
        g = stepping_stone_green_many([(0, 0), *seps], ss)
        for (x, y), gx in zip(seps, g[1:]):
            psi = gx / (ss.N_deme + g[0])
            asym = stepping_stone_psi_asymptotic(math.hypot(x, y), ss)
            print(f"  u={u:<7g} r={x:3d}  series {psi:.6f}  bessel {asym:.6f}  gap {abs(asym / psi - 1):7.2%}")


if __name__ == "__main__":
    main()
