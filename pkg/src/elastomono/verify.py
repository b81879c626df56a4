"""Independent checks: manufactured solutions, convergence rates, wavelengths."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .fem import assemble, assemble_load, gauss_points, shape_functions
from .materials import MaterialField, background
from .mesh import BoundaryLoad, Mesh, build_structured_hex_mesh


def wavelengths(lam0: float, mu0: float, rho0: float, omega: float) -> tuple[float, float]:
    """(p-wavelength, s-wavelength) in meters of the homogeneous medium at ``omega``."""
    if omega == 0:
        raise ValueError("wavelength is undefined at omega = 0")
    v_p = np.sqrt((lam0 + 2 * mu0) / rho0)
    v_s = np.sqrt(mu0 / rho0)
    return 2 * np.pi * v_p / abs(omega), 2 * np.pi * v_s / abs(omega)


@dataclass(frozen=True)
class ManufacturedCase:
    """``u = sin(pi x/L) sin(pi y/L) sin(pi z/L) (1, 1, 1)`` with matching body force.

    ``body_force`` is ``F = -(div(C eps(u)) + omega^2 rho u)`` in closed form, so
    that ``(K - omega^2 M) u = int F . v`` with ``u = 0`` on the whole boundary.
    """

    lam: float
    mu: float
    rho: float
    omega: float
    length: float = 1.0

    @property
    def k(self) -> float:
        return np.pi / self.length

    def displacement(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        phi = np.prod(np.sin(self.k * x), axis=1)
        return np.repeat(phi[:, None], 3, axis=1)

    def body_force(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        k = self.k
        s, c = np.sin(k * x), np.cos(k * x)
        phi = s[:, 0] * s[:, 1] * s[:, 2]
        # mixed second derivatives phi_ij, i != j
        mixed = k * k * np.column_stack(
            [c[:, 0] * c[:, 1] * s[:, 2], c[:, 1] * c[:, 2] * s[:, 0], c[:, 0] * c[:, 2] * s[:, 1]]
        )
        pair = {(0, 1): 0, (1, 2): 1, (0, 2): 2}
        out = np.empty((len(x), 3))
        for i in range(3):
            grad_div = -k * k * phi + sum(mixed[:, pair[tuple(sorted((i, j)))]] for j in range(3) if j != i)
            Lu = -3 * k * k * self.mu * phi + (self.lam + self.mu) * grad_div + self.omega**2 * self.rho * phi
            out[:, i] = -Lu
        return out


def manufactured_case(mesh: Mesh, field: MaterialField, omega: float) -> ManufacturedCase:
    """Manufactured problem on a cube with a constant coefficient field."""
    if len(set(mesh.extent)) != 1:
        raise ValueError("manufactured case needs a cube")
    vals = []
    for a in (field.lam, field.mu, field.rho):
        if np.ptp(a) != 0:
            raise ValueError("manufactured case needs constant coefficients")
        vals.append(float(a[0]))
    return ManufacturedCase(*vals, omega=float(omega), length=mesh.extent[0])


def strong_operator_fd(case: ManufacturedCase, x, h: float = 1e-4) -> np.ndarray:
    """``-(div sigma(u) + omega^2 rho u)`` by nested central differences of ``u``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    eye = np.eye(3)

    def grad_u(p):
        # G[n, i, j] = d u_i / d x_j
        cols = [(case.displacement(p + h * eye[j]) - case.displacement(p - h * eye[j])) / (2 * h) for j in range(3)]
        return np.stack(cols, axis=2)

    def stress(p):
        G = grad_u(p)
        eps = 0.5 * (G + G.transpose(0, 2, 1))
        tr = np.trace(eps, axis1=1, axis2=2)
        return 2 * case.mu * eps + case.lam * tr[:, None, None] * eye

    div = np.zeros((len(x), 3))
    for j in range(3):
        div += (stress(x + h * eye[j])[:, :, j] - stress(x - h * eye[j])[:, :, j]) / (2 * h)
    return -(div + case.omega**2 * case.rho * case.displacement(x))


def _boundary_free_dofs(mesh: Mesh) -> np.ndarray:
    n = mesh.n_axis
    ijk = np.stack(np.unravel_index(np.arange(mesh.n_nodes), (n + 1,) * 3, order="F"), axis=1)
    interior = np.all((ijk > 0) & (ijk < n), axis=1)
    nodes = np.flatnonzero(interior)
    return (3 * nodes[:, None] + np.arange(3)).ravel()


def _element_quadrature(mesh: Mesh, order: int):
    """Physical quadrature points (E, q, 3), shape values (q, 8) and weights (q,)."""
    X, W = gauss_points(order)
    h = np.asarray(mesh.spacing)
    N = np.array([shape_functions(xi)[0] for xi in X])
    corner = mesh.nodes[mesh.elements[:, 0]]
    pts = corner[:, None, :] + (X[None, :, :] + 1.0) * 0.5 * h
    return pts, N, W * np.prod(h) / 8.0


def solve_manufactured(case: ManufacturedCase, n: int, order: int = 3):
    """Full-Dirichlet FEM solve of the manufactured case; returns (mesh, nodal u, L2 error)."""
    mesh = build_structured_hex_mesh(n, case.length, dirichlet=("zmin",))
    system = assemble(mesh, background(case.lam, case.mu, case.rho, mesh))
    free = _boundary_free_dofs(mesh)
    pts, N, w = _element_quadrature(mesh, order)
    E, q, _ = pts.shape
    F = case.body_force(pts.reshape(-1, 3)).reshape(E, q, 3)
    # b[3*node + c] += sum_q w N_a F_c
    contrib = np.einsum("q,qa,eqc->eac", w, N, F)
    b = np.zeros(system.ndof)
    np.add.at(b, 3 * mesh.elements[:, :, None] + np.arange(3), contrib)
    A = system.K - case.omega**2 * system.M
    A = A[free][:, free].tocsc()
    u = np.zeros(system.ndof)
    if np.any(b[free]):
        u[free] = spla.spsolve(A, b[free])
    return mesh, u, l2_error(mesh, u, case, order)


def l2_error(mesh: Mesh, u: np.ndarray, case: ManufacturedCase, order: int = 3) -> float:
    pts, N, w = _element_quadrature(mesh, order)
    E, q, _ = pts.shape
    ue = u.reshape(-1, 3)[mesh.elements]  # (E, 8, 3)
    uh = np.einsum("qa,eac->eqc", N, ue)
    ex = case.displacement(pts.reshape(-1, 3)).reshape(E, q, 3)
    return float(np.sqrt(np.einsum("q,eqc->", w, (uh - ex) ** 2)))


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    h: float
    error: float
    order: float | None


def convergence_study(case: ManufacturedCase, ns: Sequence[int] = (4, 8, 16)) -> list[ConvergenceRow]:
    """L2 errors per mesh and observed orders ``log(e_prev/e)/log(h_prev/h)``."""
    rows = []
    for n in ns:
        _, _, err = solve_manufactured(case, n)
        h = case.length / n
        order = None
        if rows and rows[-1].error > 0 and err > 0:
            order = float(np.log(rows[-1].error / err) / np.log(rows[-1].h / h))
        rows.append(ConvergenceRow(n, h, err, order))
    return rows


def write_convergence_csv(rows: Sequence[ConvergenceRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "h", "l2_error", "observed_order"])
        for r in rows:
            w.writerow([r.n, repr(r.h), repr(r.error), "" if r.order is None else repr(r.order)])
    return path


def patch_test(lam: float, mu: float, n: int = 3, grad=None, shift=(1e-3, -2e-3, 5e-4)) -> float:
    """Max relative nodal error of the static FEM solution for a linear field ``u = G x + c``.

    The clamped bottom carries ``u`` as prescribed values, the other sides the
    exact constant tractions ``sigma nu``.
    """
    G = np.array([[1.0, 0.4, -0.3], [0.2, -0.5, 0.6], [-0.7, 0.1, 0.8]]) * 1e-3 if grad is None else np.asarray(grad)
    c = np.asarray(shift, dtype=float)
    mesh = build_structured_hex_mesh(n, 1.0, dirichlet=("zmin",))
    system = assemble(mesh, background(lam, mu, 1.0, mesh))
    eps = 0.5 * (G + G.T)
    sigma = 2 * mu * eps + lam * np.trace(eps) * np.eye(3)
    bf = mesh.boundary_faces
    neumann = np.flatnonzero(~bf.dirichlet)
    load = BoundaryLoad(neumann, bf.normal[neumann] @ sigma.T, "patch")
    f = assemble_load(mesh, load)
    exact = (mesh.nodes @ G.T + c).ravel()
    fixed, free = system.constrained_dofs, system.free_dofs
    rhs = f[free] - system.K[free][:, fixed] @ exact[fixed]
    u = exact.copy()
    u[free] = spla.spsolve(system.K[free][:, free].tocsc(), rhs)
    return float(np.max(np.abs(u - exact)) / np.max(np.abs(exact)))


# nu = 1/3: far from the incompressible limit, so trilinear elements show
# their asymptotic rate already on coarse meshes
MODERATE_CASE = ManufacturedCase(lam=1.2e4, mu=6e3, rho=3e3, omega=1.0)


def oracle_report(case: ManufacturedCase, n_points: int = 50, seed: int = 0) -> dict:
    """Compare the closed-form body force with the finite-difference operator at random points."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 0.95, size=(n_points, 3)) * case.length
    exact = case.body_force(x)
    fd = strong_operator_fd(case, x, h=1e-4 * case.length)
    rel = float(np.max(np.linalg.norm(fd - exact, axis=1)) / np.max(np.linalg.norm(exact, axis=1)))
    return {"points": n_points, "seed": seed, "max_rel_diff": rel}
