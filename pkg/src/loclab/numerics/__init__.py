"""Foundation layer: Jacobi eigensolver, quadrature, log-space scalars, RNG streams."""
from loclab.numerics.extreal import (
    ExtReal,
    TowerOverflowError,
    as_ext,
    ext_add,
    ext_cmp,
    ext_exp,
    ext_mul,
)
from loclab.numerics.linalg import Spectrum, SymMatrix, jacobi_spectrum
from loclab.numerics.quadrature import DivergentIntegralError, adaptive_quad
from loclab.numerics.rng import RNG_ALGORITHM, RngStream, gaussian_increments, path_noise

__all__ = [
    "ExtReal",
    "TowerOverflowError",
    "as_ext",
    "ext_add",
    "ext_cmp",
    "ext_exp",
    "ext_mul",
    "Spectrum",
    "SymMatrix",
    "jacobi_spectrum",
    "DivergentIntegralError",
    "adaptive_quad",
    "RNG_ALGORITHM",
    "RngStream",
    "gaussian_increments",
    "path_noise",
]
