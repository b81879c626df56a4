"""Monotonicity-based inclusion detection for time-harmonic linear elasticity."""

from .fem import AssembledSystem, assemble, assemble_load, element_mass, element_stiffness
from .linsolve import Factorization, FactorizationError, ResonanceSuspected, factor_symmetric, inertia, solve
from .materials import Box, InclusionSpec, MaterialField, TestBlock, apply_inclusions, background, test_coefficients
from .mesh import BoundaryLoadSet, Mesh, build_load_patches, build_structured_hex_mesh, tag_boundary
from .monotonicity import SweepResult, TestVerdict, make_cover, suggest_Mtilde, sweep, test_block
from .ntd import NtDMatrix, ntd_matrix
from .reconstruct import VoxelMask, assemble_mask, fill_cavities
from .spectral import compute_M0, count_negative, sym_eigenvalues
from .verify import convergence_study, manufactured_case, wavelengths

__all__ = [
    "AssembledSystem",
    "assemble",
    "assemble_load",
    "element_mass",
    "element_stiffness",
    "Factorization",
    "FactorizationError",
    "ResonanceSuspected",
    "factor_symmetric",
    "inertia",
    "solve",
    "Box",
    "InclusionSpec",
    "MaterialField",
    "TestBlock",
    "apply_inclusions",
    "background",
    "test_coefficients",
    "BoundaryLoadSet",
    "Mesh",
    "build_load_patches",
    "build_structured_hex_mesh",
    "tag_boundary",
    "SweepResult",
    "TestVerdict",
    "make_cover",
    "suggest_Mtilde",
    "sweep",
    "test_block",
    "NtDMatrix",
    "ntd_matrix",
    "VoxelMask",
    "assemble_mask",
    "fill_cavities",
    "compute_M0",
    "count_negative",
    "sym_eigenvalues",
    "convergence_study",
    "manufactured_case",
    "wavelengths",
]

__version__ = "0.1.0"
