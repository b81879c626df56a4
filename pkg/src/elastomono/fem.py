"""Trilinear hexahedral assembly of the elastic stiffness, the mass and Neumann loads.

Nodal dofs are interleaved: dof ``3*node + c`` is displacement component ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .materials import MaterialField
from .mesh import LOCAL_NODE_OFFSETS, BoundaryLoad, BoundaryLoadSet, Mesh, MeshError, validate_load


class FemError(ValueError):
    pass


_REF = 2.0 * LOCAL_NODE_OFFSETS - 1.0  # reference-cube corners in [-1, 1]^3


def gauss_points(order: int = 2):
    """Tensor Gauss-Legendre rule on [-1, 1]^3 as (points (q, 3), weights (q,))."""
    x, w = np.polynomial.legendre.leggauss(order)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    W = np.prod(np.stack(np.meshgrid(w, w, w, indexing="ij"), axis=-1).reshape(-1, 3), axis=1)
    return X, W


def shape_functions(xi: np.ndarray):
    """Trilinear shape functions and their reference gradients at one point."""
    t = 1.0 + _REF * xi  # (8, 3)
    N = 0.125 * np.prod(t, axis=1)
    dN = np.empty((8, 3))
    dN[:, 0] = 0.125 * _REF[:, 0] * t[:, 1] * t[:, 2]
    dN[:, 1] = 0.125 * _REF[:, 1] * t[:, 0] * t[:, 2]
    dN[:, 2] = 0.125 * _REF[:, 2] * t[:, 0] * t[:, 1]
    return N, dN


def _jacobian(coords: np.ndarray, dN: np.ndarray):
    J = dN.T @ coords  # J[a, b] = d x_b / d xi_a
    det = np.linalg.det(J)
    scale = np.ptp(coords, axis=0).prod()
    if not np.isfinite(det) or det <= 1e-12 * max(scale, np.finfo(float).tiny):
        raise FemError(f"degenerate or inverted hexahedron (det J = {det:.3e})")
    return J, det


def strain_matrix(dNdx: np.ndarray) -> np.ndarray:
    """Voigt strain-displacement matrix, rows (xx, yy, zz, 2xy, 2yz, 2xz)."""
    B = np.zeros((6, 24))
    gx, gy, gz = dNdx.T
    B[0, 0::3] = gx
    B[1, 1::3] = gy
    B[2, 2::3] = gz
    B[3, 0::3] = gy
    B[3, 1::3] = gx
    B[4, 1::3] = gz
    B[4, 2::3] = gy
    B[5, 0::3] = gz
    B[5, 2::3] = gx
    return B


_VOL = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
_D_LAMBDA = np.outer(_VOL, _VOL)
_D_MU = np.diag([2.0, 2.0, 2.0, 1.0, 1.0, 1.0])


def element_stiffness(coords, lam: float, mu: float, order: int = 2) -> np.ndarray:
    """24x24 matrix of ``int 2 mu eps(u):eps(v) + lam div(u) div(v)`` over one hexahedron."""
    coords = np.asarray(coords, dtype=float)
    K = np.zeros((24, 24))
    D = lam * _D_LAMBDA + mu * _D_MU
    for xi, w in zip(*gauss_points(order)):
        _, dN = shape_functions(xi)
        J, det = _jacobian(coords, dN)
        B = strain_matrix(np.linalg.solve(J, dN.T).T)
        K += (B.T @ D @ B) * (w * det)
    return 0.5 * (K + K.T)


def element_mass(coords, rho: float, order: int = 2) -> np.ndarray:
    """Consistent 24x24 mass matrix ``int rho u.v``."""
    coords = np.asarray(coords, dtype=float)
    Ms = np.zeros((8, 8))
    for xi, w in zip(*gauss_points(order)):
        N, dN = shape_functions(xi)
        _, det = _jacobian(coords, dN)
        Ms += np.outer(N, N) * (w * det)
    M = np.zeros((24, 24))
    for c in range(3):
        M[c::3, c::3] = rho * Ms
    return 0.5 * (M + M.T)


@lru_cache(maxsize=8)
def _assembly_plan(n: int):
    """Scatter map from element-matrix entries to CSR data for an n^3 mesh."""
    m = n + 1
    ek, ej, ei = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    ei, ej, ek = ei.ravel(), ej.ravel(), ek.ravel()
    conn = np.column_stack([(ei + a) + m * (ej + b) + m * m * (ek + c) for a, b, c in LOCAL_NODE_OFFSETS])
    dofs = (3 * conn[:, :, None] + np.arange(3)).reshape(-1, 24)
    ndof = 3 * m**3
    rows = np.repeat(dofs, 24, axis=1).ravel()
    cols = np.tile(dofs, (1, 24)).ravel()
    keys, inverse = np.unique(rows * ndof + cols, return_inverse=True)
    indices = (keys % ndof).astype(np.int32)
    indptr = np.concatenate([[0], np.cumsum(np.bincount(keys // ndof, minlength=ndof))]).astype(np.int32)
    return ndof, inverse, indices, indptr


def _scatter(mesh: Mesh, per_element: np.ndarray) -> sp.csr_matrix:
    ndof, inverse, indices, indptr = _assembly_plan(mesh.n_axis)
    data = np.bincount(inverse, weights=per_element.ravel(), minlength=len(indices))
    return sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=(ndof, ndof))


@lru_cache(maxsize=16)
def _reference_matrices(spacing: tuple[float, float, float]):
    coords = LOCAL_NODE_OFFSETS * np.asarray(spacing)
    K_lam = element_stiffness(coords, 1.0, 0.0)
    K_mu = element_stiffness(coords, 0.0, 1.0)
    M_one = element_mass(coords, 1.0)
    return K_lam, K_mu, M_one


def dirichlet_dofs(mesh: Mesh) -> np.ndarray:
    nodes = mesh.dirichlet_nodes()
    return np.sort((3 * nodes[:, None] + np.arange(3)).ravel())


@dataclass(frozen=True)
class AssembledSystem:
    """Global K (Pa m) and M (kg) over all dofs plus the Dirichlet dof set."""

    mesh: Mesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    constrained_dofs: np.ndarray
    free_dofs: np.ndarray
    field_fingerprint: str

    @property
    def ndof(self) -> int:
        return self.K.shape[0]

    def dof_map(self, node: int) -> np.ndarray:
        return 3 * node + np.arange(3)

    def reduced(self):
        """(K_ff, M_ff) with Dirichlet rows and columns eliminated."""
        f = self.free_dofs
        return self.K[f][:, f].tocsc(), self.M[f][:, f].tocsc()

    def dynamic_matrix(self, omega: float) -> sp.csc_matrix:
        """``K - omega^2 M`` restricted to the free dofs."""
        # K and M share one sparsity pattern (same scatter plan)
        A = sp.csr_matrix((self.K.data - omega**2 * self.M.data, self.K.indices, self.K.indptr), shape=self.K.shape)
        f = self.free_dofs
        return A[f][:, f].tocsc()

    def load_matrix(self, loads: BoundaryLoadSet) -> np.ndarray:
        """Free-dof load vectors as columns, shape (n_free, m)."""
        F = np.zeros((self.ndof, loads.m))
        for r, g in enumerate(loads):
            F[:, r] = assemble_load(self.mesh, g)
        return F[self.free_dofs]

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Insert zeros at the Dirichlet dofs."""
        u_free = np.asarray(u_free)
        out = np.zeros((self.ndof,) + u_free.shape[1:], dtype=u_free.dtype)
        out[self.free_dofs] = u_free
        return out


def assemble(mesh: Mesh, field: MaterialField) -> AssembledSystem:
    if len(field) != mesh.n_elements:
        raise FemError(f"field has {len(field)} values for {mesh.n_elements} elements")
    K_lam, K_mu, M_one = _reference_matrices(mesh.spacing)
    K = _scatter(mesh, np.outer(field.lam, K_lam.ravel()) + np.outer(field.mu, K_mu.ravel()))
    M = _scatter(mesh, np.outer(field.rho, M_one.ravel()))
    fixed = dirichlet_dofs(mesh)
    free = np.setdiff1d(np.arange(K.shape[0]), fixed)
    return AssembledSystem(mesh, K, M, fixed, free, field.fingerprint())


def assemble_load(mesh: Mesh, load: BoundaryLoad) -> np.ndarray:
    """Consistent nodal forces (N) of a piecewise-constant traction, over all dofs.

    On an axis-aligned rectangular face each bilinear trace integrates to a
    quarter of the face area, so ``int g . N_a dS = g * area / 4`` exactly.
    """
    try:
        validate_load(mesh, load)
    except MeshError as exc:
        raise FemError(str(exc)) from exc
    bf = mesh.boundary_faces
    f = np.zeros(3 * mesh.n_nodes)
    share = (bf.area[load.faces] / 4.0)[:, None] * load.tractions  # (k, 3)
    face_nodes = bf.nodes[load.faces]  # (k, 4)
    for c in range(3):
        np.add.at(f, 3 * face_nodes + c, share[:, c:c + 1])
    return f


def export_matrix_market(path, A, comment: str = "") -> None:
    """Write a sparse matrix in Matrix Market coordinate format."""
    mmwrite(str(path), sp.coo_matrix(A), comment=comment, symmetry="symmetric" if _is_symmetric(A) else "general")


def _is_symmetric(A) -> bool:
    A = sp.csr_matrix(A)
    return (A - A.T).count_nonzero() == 0
