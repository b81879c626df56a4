"""Symmetric eigenvalues, negative-eigenvalue counts and the bound M0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .fem import AssembledSystem
from .linsolve import DEFAULT_ZERO_PIVOT_TOL, factor_symmetric, inertia

DEFAULT_REL_TOL = 1e-10


def sym_eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a (symmetrized) dense matrix, ascending, with multiplicity."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros(0)
    return sla.eigvalsh(0.5 * (A + A.T))


def count_negative(eigs, scale: float, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Number of eigenvalues below ``-rel_tol * scale``."""
    eigs = np.asarray(eigs, dtype=float)
    return int(np.sum(eigs < -rel_tol * abs(scale)))


@dataclass(frozen=True)
class M0Result:
    m0: int
    n_zero: int
    n_pos: int
    omega: float

    @property
    def flagged(self) -> bool:
        """True when ``omega`` sits (numerically) on a discrete eigenfrequency."""
        return self.n_zero > 0

    def __int__(self) -> int:
        return self.m0


def compute_M0(system: AssembledSystem, omega: float, zero_tol: float = DEFAULT_ZERO_PIVOT_TOL) -> M0Result:
    """Count the mixed-problem eigenvalues ``theta < omega^2`` of ``K phi = theta M phi``.

    ``system`` must be assembled for the homogeneous reference coefficients
    (background, or an a-priori density bound in place of rho0). The count is
    the number of negative pivots of ``K - omega^2 M`` (Sylvester's law); zero
    pivots are excluded and flagged.
    """
    fac = factor_symmetric(system.dynamic_matrix(omega), zero_tol=zero_tol)
    neg, zero, pos = inertia(fac)
    return M0Result(neg, zero, pos, float(omega))


def generalized_eigenvalues(system: AssembledSystem) -> np.ndarray:
    """Dense ``K phi = theta M phi`` spectrum on the free dofs (oracle, small meshes only)."""
    K, M = system.reduced()
    if K.shape[0] > 6000:
        raise ValueError(f"{K.shape[0]} dofs is too many for a dense eigensolve")
    return sla.eigh(K.toarray(), M.toarray(), eigvals_only=True)


def M0_dense(system: AssembledSystem, omega: float) -> int:
    return int(np.sum(generalized_eigenvalues(system) < omega**2))
