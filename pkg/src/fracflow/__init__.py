"""fracflow: a numerical laboratory for strongly nonlocal Allen-Cahn dynamics,
fractional mean curvature flow, and the layer/corrector/barrier constructions
connecting them."""

from .fracops import (
    FracConstants,
    FracOrder,
    KernelWeights,
    calibrate_spectral_symbol,
    compute_C_ns,
    frac_lap_1d,
    frac_lap_nd_direct,
    frac_lap_nd_spectral,
    kernel_weights,
    make_constants,
)
from .grids import FrontCurve, Profile1D, ScalarField, TailDescriptor
from .wells import DoubleWell, default_well

__version__ = "0.1.0"

__all__ = [
    "FracConstants",
    "FracOrder",
    "KernelWeights",
    "ScalarField",
    "Profile1D",
    "TailDescriptor",
    "FrontCurve",
    "DoubleWell",
    "default_well",
    "compute_C_ns",
    "calibrate_spectral_symbol",
    "kernel_weights",
    "frac_lap_1d",
    "frac_lap_nd_direct",
    "frac_lap_nd_spectral",
    "make_constants",
    "__version__",
]
