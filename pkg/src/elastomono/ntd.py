"""Discrete Neumann-to-Dirichlet matrices ``Lambda_ij = (Lambda g_i, g_j)``."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fem import AssembledSystem, assemble
from .linsolve import DEFAULT_ZERO_PIVOT_TOL, factor_symmetric, solve
from .materials import MaterialField
from .mesh import BoundaryLoadSet, Mesh

log = logging.getLogger(__name__)

SYMMETRY_WARN = 1e-10


class NtDError(ArithmeticError):
    pass


@dataclass(frozen=True)
class NtDMatrix:
    """m x m pairing matrix in N m, with the provenance needed to compare two of them."""

    entries: np.ndarray
    omega: float
    field_fingerprint: str
    loadset_fingerprint: str
    mesh_fingerprint: str
    asymmetry: float = 0.0

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def compatible_with(self, other: "NtDMatrix") -> bool:
        return (
            self.loadset_fingerprint == other.loadset_fingerprint
            and self.mesh_fingerprint == other.mesh_fingerprint
            and self.omega == other.omega
        )

    def __sub__(self, other: "NtDMatrix") -> np.ndarray:
        if not self.compatible_with(other):
            raise NtDError("NtD matrices come from different meshes, load sets or frequencies")
        return self.entries - other.entries

    def to_csv(self, path) -> Path:
        """Row-major CSV with 17 significant digits plus a ``.json`` sidecar."""
        path = Path(path)
        np.savetxt(path, self.entries, delimiter=",", fmt="%.17g")
        meta = {
            "omega": self.omega,
            "m": self.m,
            "field_fingerprint": self.field_fingerprint,
            "loadset_fingerprint": self.loadset_fingerprint,
            "mesh_fingerprint": self.mesh_fingerprint,
            "asymmetry": self.asymmetry,
        }
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2))
        return path

    @classmethod
    def from_csv(cls, path) -> "NtDMatrix":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        entries = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(
            entries,
            float(meta["omega"]),
            meta["field_fingerprint"],
            meta["loadset_fingerprint"],
            meta["mesh_fingerprint"],
            float(meta.get("asymmetry", 0.0)),
        )


def forward_solutions(system: AssembledSystem, loads: BoundaryLoadSet, omega: float, zero_tol=DEFAULT_ZERO_PIVOT_TOL):
    """Free-dof load matrix F and displacements U with ``(K - omega^2 M) U = F``."""
    A = system.dynamic_matrix(omega)
    fac = factor_symmetric(A, zero_tol=zero_tol)
    F = system.load_matrix(loads)
    return F, solve(fac, F)


def ntd_matrix(
    system: AssembledSystem,
    loads: BoundaryLoadSet,
    omega: float,
    zero_tol: float = DEFAULT_ZERO_PIVOT_TOL,
    sym_tol: float = 1e-8,
) -> NtDMatrix:
    """Assemble ``Lambda_ij = f_j^T u_i`` and symmetrize it.

    Raises :class:`~elastomono.linsolve.ResonanceSuspected` when ``omega`` hits a
    discrete eigenfrequency of the mixed problem.
    """
    if loads.mesh_fingerprint and loads.mesh_fingerprint != system.mesh.fingerprint():
        raise NtDError("load set was built for a different mesh")
    F, U = forward_solutions(system, loads, omega, zero_tol)
    L = F.T @ U
    norm = np.linalg.norm(L)
    asym = float(np.linalg.norm(L - L.T) / norm) if norm > 0 else 0.0
    if asym > sym_tol:
        raise NtDError(f"NtD matrix asymmetry {asym:.2e} exceeds {sym_tol:.0e}")
    if asym > SYMMETRY_WARN:
        log.warning("NtD asymmetry %.2e above %.0e", asym, SYMMETRY_WARN)
    return NtDMatrix(
        0.5 * (L + L.T),
        float(omega),
        system.field_fingerprint,
        loads.fingerprint(),
        system.mesh.fingerprint(),
        asym,
    )


def ntd_for_field(mesh: Mesh, field: MaterialField, loads: BoundaryLoadSet, omega: float, **kw) -> NtDMatrix:
    return ntd_matrix(assemble(mesh, field), loads, omega, **kw)
