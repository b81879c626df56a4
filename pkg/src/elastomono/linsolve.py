"""Symmetric (indefinite) factorization, solves with refinement, and inertia.

Two back ends sit behind :func:`factor_symmetric`:

* small or dense input: LAPACK Bunch-Kaufman ``sytrf`` (``scipy.linalg.ldl``),
  1x1 and 2x2 pivot blocks;
* large sparse input: SuperLU run in symmetric mode with a fill-reducing
  symmetric ordering and diagonal pivoting only, i.e. ``P A P^T = L D L^T``
  read off ``U = D L^T``.

Both produce a congruent block-diagonal factor, so the inertia is the sign
count of the pivots (Sylvester's law).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_ZERO_PIVOT_TOL = 1e-12
DENSE_LIMIT = 400
RESIDUAL_TARGET = 1e-10


class FactorizationError(ArithmeticError):
    """The matrix could not be factored (not square, structurally singular, breakdown)."""


class ResonanceSuspected(FactorizationError):
    """A pivot is numerically zero: the operator is (close to) singular."""

    def __init__(self, message: str, smallest_pivot: float = float("nan"), tolerance: float = float("nan")):
        super().__init__(message)
        self.smallest_pivot = smallest_pivot
        self.tolerance = tolerance


class SolveError(ArithmeticError):
    """Iterative refinement failed to reach the residual target."""


@dataclass
class Factorization:
    n: int
    method: str
    pivots: np.ndarray
    zero_tol: float
    A: object = field(repr=False)
    _solve: object = field(repr=False)

    @property
    def zero_threshold(self) -> float:
        return self.zero_tol * self.diag_scale

    @property
    def diag_scale(self) -> float:
        d = np.abs(self.A.diagonal())
        return float(d.max()) if d.size else 0.0

    def inertia(self) -> tuple[int, int, int]:
        return inertia(self)

    def solve(self, rhs, **kw) -> np.ndarray:
        return solve(self, rhs, **kw)

    @property
    def singular(self) -> bool:
        return bool(np.any(np.abs(self.pivots) <= self.zero_threshold))

    @property
    def smallest_pivot(self) -> float:
        return float(np.min(np.abs(self.pivots))) if self.pivots.size else float("nan")


def _block_pivots(D: np.ndarray) -> np.ndarray:
    """Pivot values of a 1x1/2x2 block-diagonal D (eigenvalues of the 2x2 blocks)."""
    n = D.shape[0]
    out = np.empty(n)
    i = 0
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0.0:
            out[i:i + 2] = np.linalg.eigvalsh(D[i:i + 2, i:i + 2])
            i += 2
        else:
            out[i] = D[i, i]
            i += 1
    return out


def _dense_factor(A: np.ndarray, zero_tol: float) -> Factorization:
    lu, D, perm = sla.ldl(A, lower=True, hermitian=True)
    Lp = lu[perm]
    d_sub = np.diag(D, -1).copy()
    band = np.zeros((3, len(D)))
    band[0, 1:] = d_sub
    band[1] = np.diag(D)
    band[2, :-1] = d_sub

    def _solve(b):
        y = sla.solve_triangular(Lp, b[perm], lower=True, unit_diagonal=True, check_finite=False)
        z = sla.solve_banded((1, 1), band, y, check_finite=False)
        x = np.empty_like(b)
        x[perm] = sla.solve_triangular(Lp.T, z, lower=False, unit_diagonal=True, check_finite=False)
        return x

    return Factorization(len(A), "dense-bunch-kaufman", _block_pivots(D), zero_tol, A, _solve)


def _sparse_factor(A: sp.csc_matrix, zero_tol: float) -> Factorization:
    lu = spla.splu(
        A,
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationError("symmetric pivot order broke down (zero diagonal pivot)")
    return Factorization(A.shape[0], "sparse-ldlt", lu.U.diagonal().copy(), zero_tol, A, lu.solve)


def factor_symmetric(A, zero_tol: float = DEFAULT_ZERO_PIVOT_TOL, dense_limit: int = DENSE_LIMIT) -> Factorization:
    """Factor a real symmetric matrix for repeated solves and inertia queries.

    A sparse input whose pattern has an empty row is rejected as structurally
    singular; dense input stores every entry and is never structurally singular.
    Numerically zero pivots are accepted here and reported by :func:`inertia`;
    :func:`solve` refuses them.
    """
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise FactorizationError(f"need a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if sp.issparse(A):
        A = sp.csc_matrix(A, dtype=float)
        A.sort_indices()
        if np.any(np.diff(A.indptr) == 0) or np.any(np.bincount(A.indices, minlength=n) == 0):
            raise FactorizationError("matrix is structurally singular (empty row or column)")
        if n > dense_limit:
            try:
                return _sparse_factor(A, zero_tol)
            except (RuntimeError, FactorizationError) as exc:
                if n > 8 * dense_limit:
                    raise FactorizationError(f"sparse LDL^T failed: {exc}") from exc
        A = A.toarray()
    A = np.array(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise FactorizationError("matrix has non-finite entries")
    return _dense_factor(A, zero_tol)


def inertia(F: Factorization) -> tuple[int, int, int]:
    """(n_neg, n_zero, n_pos); a pivot counts as zero when ``|p| <= zero_tol * max|diag A|``."""
    thr = F.zero_threshold
    p = F.pivots
    zero = np.abs(p) <= thr
    return int(np.sum((p < 0) & ~zero)), int(np.sum(zero)), int(np.sum((p > 0) & ~zero))


def solve(F: Factorization, rhs, tol: float = RESIDUAL_TARGET, max_refine: int = 6) -> np.ndarray:
    """Solve ``A x = rhs`` (vector or column block) with iterative refinement."""
    if F.singular:
        raise ResonanceSuspected(
            f"pivot {F.smallest_pivot:.3e} below the zero threshold {F.zero_threshold:.3e}",
            F.smallest_pivot,
            F.zero_threshold,
        )
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != F.n:
        raise ValueError(f"rhs has {b.shape[0]} rows, matrix has {F.n}")
    x = F._solve(b)
    bnorm = np.linalg.norm(b, axis=0)
    bnorm = np.where(bnorm == 0.0, 1.0, bnorm)
    prev = np.inf
    for _ in range(max_refine):
        r = b - F.A @ x
        rel = np.max(np.linalg.norm(r, axis=0) / bnorm)
        # stop once well below target or when refinement has stagnated
        if rel <= 0.01 * tol or (rel <= tol and rel > 0.5 * prev):
            break
        prev = rel
        x = x + F._solve(r)
    rel = np.max(np.linalg.norm(b - F.A @ x, axis=0) / bnorm)
    if not np.isfinite(rel) or rel > tol:
        raise SolveError(f"relative residual {rel:.3e} above {tol:.1e} after refinement")
    return x
