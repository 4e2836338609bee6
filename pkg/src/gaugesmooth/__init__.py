"""Smoothing rough connections with prescribed curvature on cubical grids."""
from .grid import Grid, TraceMask, build_grid, sub_box, trace_mask
from .cochains import (
    Cochain,
    LieAlgebra,
    NormReport,
    codifferential,
    constant_form,
    curvature,
    exterior_d,
    from_blocks,
    hodge_star,
    inner,
    mollify,
    norm,
    wedge,
    zeros,
)
from .elliptic import HodgeLaplacian, SolveReport, SolverError, assemble, solve

__version__ = "0.1.0"

__all__ = [
    "Cochain",
    "Grid",
    "HodgeLaplacian",
    "LieAlgebra",
    "NormReport",
    "SolveReport",
    "SolverError",
    "TraceMask",
    "assemble",
    "build_grid",
    "codifferential",
    "constant_form",
    "curvature",
    "exterior_d",
    "from_blocks",
    "hodge_star",
    "inner",
    "mollify",
    "norm",
    "solve",
    "sub_box",
    "trace_mask",
    "wedge",
    "zeros",
]
