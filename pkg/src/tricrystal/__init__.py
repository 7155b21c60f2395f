"""Stationary sine-Gordon fluxons on a tricrystal Y-junction: profiles, spectra, dynamics."""

from .graph import EdgeGrid, GraphField, YGraphSpec, bc_residual, build_grid, inner_product, sample
from .profiles import Kind, ProfileFamily, Shape, antikink_shift, kink_shift, make_family
from .spectral import OperatorSpec, assemble, growing_mode_rate, lowest_eigenpairs, spectrum

__version__ = "0.1.0"

__all__ = [
    "EdgeGrid", "GraphField", "YGraphSpec", "bc_residual", "build_grid", "inner_product", "sample",
    "Kind", "ProfileFamily", "Shape", "antikink_shift", "kink_shift", "make_family",
    "OperatorSpec", "assemble", "growing_mode_rate", "lowest_eigenpairs", "spectrum",
    "__version__",
]
