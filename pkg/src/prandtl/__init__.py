"""Numerical laboratory for the 2D Prandtl boundary layer around a monotone shear flow."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .grid import Field2D, GridSpec, dx, dy, integrate_y_from_0, integrate_y_to_inf, weight_profile

__version__ = "0.1.0"

__all__ = [
    "Field2D",
    "GridSpec",
    "KERNEL_BACKEND",
    "dx",
    "dy",
    "integrate_y_from_0",
    "integrate_y_to_inf",
    "weight_profile",
    "__version__",
]
