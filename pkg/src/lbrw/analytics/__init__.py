from .bessel import bessel_k0, bessel_k0e
from .hitting import (
    annulus_ansatz_f,
    bessel_annulus_green_f,
    bessel_annulus_green_kernel,
    erdos_taylor_tail,
    hitting_fraction,
)
from .malecot import (
    WM_PRESET,
    MalecotSolution,
    RadialGrid,
    ScalingValue,
    WMParams,
    malecot_recursion_iterate,
    malecot_solve,
    wm_scaling_value,
    wright_malecot_phi,
)
from .stepping_stone import (
    SteppingStoneParams,
    ss_preset,
    stepping_stone_green,
    stepping_stone_green_many,
    stepping_stone_psi,
    stepping_stone_psi_asymptotic,
    truncation_order,
)

__all__ = [
    "bessel_k0", "bessel_k0e",
    "annulus_ansatz_f", "bessel_annulus_green_f", "bessel_annulus_green_kernel", "erdos_taylor_tail",
    "hitting_fraction",
    "WM_PRESET", "MalecotSolution", "RadialGrid", "ScalingValue", "WMParams", "malecot_recursion_iterate",
    "malecot_solve", "wm_scaling_value", "wright_malecot_phi",
    "SteppingStoneParams", "ss_preset", "stepping_stone_green", "stepping_stone_green_many",
    "stepping_stone_psi", "stepping_stone_psi_asymptotic", "truncation_order",
]
