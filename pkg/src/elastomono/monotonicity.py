"""Per-block monotonicity tests and sweeps over a block cover.

For a candidate block B the test NtD matrix uses the background stiffened by
``alpha`` on B (and lightened in density). ``N_B`` is the number of negative
eigenvalues of ``Lambda_test - Lambda_measured``; B is kept when
``N_B <= M~``.
"""

from __future__ import annotations

import csv
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fem import assemble
from .linsolve import DEFAULT_ZERO_PIVOT_TOL, FactorizationError, SolveError
from .materials import Box, MaterialError, TestBlock, test_coefficients
from .mesh import BoundaryLoadSet, Mesh
from .ntd import NtDError, NtDMatrix, ntd_matrix
from .spectral import DEFAULT_REL_TOL, count_negative, sym_eigenvalues

log = logging.getLogger(__name__)


class MonotonicityError(ValueError):
    pass


@dataclass(frozen=True)
class TestVerdict:
    block_index: int
    box: Box
    n_neg: int
    m_tilde: int | None
    alpha: tuple[float, float, float]
    omega: float
    error: str | None = None

    __test__ = False

    @property
    def valid(self) -> bool:
        return self.error is None

    @property
    def inside(self) -> bool:
        return self.valid and self.m_tilde is not None and self.n_neg <= self.m_tilde

    def with_threshold(self, m_tilde: int) -> "TestVerdict":
        return TestVerdict(self.block_index, self.box, self.n_neg, int(m_tilde), self.alpha, self.omega, self.error)


@dataclass(frozen=True)
class MtildeSuggestion:
    value: int
    gap: tuple[int, int] | None
    separated: bool


@dataclass
class SweepResult:
    blocks_per_axis: tuple[int, int, int]
    verdicts: list[TestVerdict]
    omega: float
    m_tilde: int | None
    rel_tol: float
    m0: int | None = None
    suggestion: MtildeSuggestion | None = None
    extra: dict = field(default_factory=dict)

    @property
    def counts(self) -> np.ndarray:
        """N_B per block in block-index order (-1 marks a failed test)."""
        return np.array([v.n_neg if v.valid else -1 for v in self.verdicts], dtype=int)

    def inside_indices(self) -> list[int]:
        return [v.block_index for v in self.verdicts if v.inside]

    def to_dict(self) -> dict:
        return {
            "blocks_per_axis": list(self.blocks_per_axis),
            "omega": self.omega,
            "m_tilde": self.m_tilde,
            "rel_tol": self.rel_tol,
            "m0": self.m0,
            "suggestion": None if self.suggestion is None else {
                "value": self.suggestion.value,
                "gap": None if self.suggestion.gap is None else list(self.suggestion.gap),
                "separated": self.suggestion.separated,
            },
            "blocks": [
                {"index": v.block_index, "lo": list(v.box.lo), "hi": list(v.box.hi), "N_B": v.n_neg,
                 "alpha": list(v.alpha), "error": v.error}
                for v in self.verdicts
            ],
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict, m_tilde: int | None = None) -> "SweepResult":
        """Rebuild a result; ``m_tilde`` re-thresholds the stored counts."""
        thr = d["m_tilde"] if m_tilde is None else int(m_tilde)
        verdicts = [
            TestVerdict(b["index"], Box(b["lo"], b["hi"]), b["N_B"], thr, tuple(b["alpha"]), d["omega"], b["error"])
            for b in d["blocks"]
        ]
        sug = d.get("suggestion")
        suggestion = None if sug is None else MtildeSuggestion(
            sug["value"], None if sug["gap"] is None else tuple(sug["gap"]), sug["separated"])
        return cls(tuple(d["blocks_per_axis"]), verdicts, d["omega"], thr, d["rel_tol"], d.get("m0"),
                   suggestion, d.get("extra", {}))

    def write_eigencount_csv(self, path) -> Path:
        path = Path(path)
        b = self.blocks_per_axis
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["block_index", "i", "j", "k", "N_B", "verdict"])
            for v in self.verdicts:
                i, j, k = block_ijk(v.block_index, b)
                verdict = "invalid" if not v.valid else ("inside" if v.inside else "outside")
                w.writerow([v.block_index, i, j, k, v.n_neg if v.valid else "", verdict])
        return path

    def write_verdict_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["block_index", "lo_i", "lo_j", "lo_k", "hi_i", "hi_j", "hi_k", "N_B", "m_tilde",
                 "inside", "alpha_lambda", "alpha_mu", "alpha_rho", "omega", "error"]
            )
            for v in self.verdicts:
                w.writerow(
                    [v.block_index, *v.box.lo, *v.box.hi, v.n_neg if v.valid else "", v.m_tilde,
                     int(v.inside), *(repr(a) for a in v.alpha), repr(v.omega), v.error or ""]
                )
        return path


def block_ijk(index: int, dims) -> tuple[int, int, int]:
    bx, by, _ = dims
    return index % bx, (index // bx) % by, index // (bx * by)


def make_cover(mesh: Mesh, blocks_per_axis: int, alpha) -> list[TestBlock]:
    """Disjoint blocks tiling the mesh, indexed ``i + b*j + b*b*k``."""
    b = int(blocks_per_axis)
    n = mesh.n_axis
    if b < 1 or n % b:
        raise MonotonicityError(f"{b} blocks per axis do not tile a mesh with n={n}")
    s = n // b
    cover = []
    for k, j, i in itertools.product(range(b), repeat=3):
        lo = (i * s, j * s, k * s)
        cover.append(TestBlock(Box(lo, tuple(x + s for x in lo)), alpha, index=i + b * j + b * b * k))
    return cover


def alpha_variants(bounds, subsets: bool = False) -> list[tuple[float, float, float]]:
    """Full-bound triple, or one triple per nonempty index subset (bounds on I, 0 elsewhere)."""
    bounds = tuple(float(a) for a in bounds)
    if not subsets:
        return [bounds]
    out = []
    for r in (1, 2, 3):
        for I in itertools.combinations(range(3), r):
            alpha = tuple(bounds[j] if j in I else 0.0 for j in range(3))
            if any(alpha):
                out.append(alpha)
    return out


def _spectral_norm(A: np.ndarray) -> float:
    ev = sym_eigenvalues(A)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def test_ntd(mesh: Mesh, loads: BoundaryLoadSet, background, block: TestBlock, omega: float,
             zero_tol: float = DEFAULT_ZERO_PIVOT_TOL) -> NtDMatrix:
    field_b = test_coefficients(*background, block, mesh)
    return ntd_matrix(assemble(mesh, field_b), loads, omega, zero_tol=zero_tol)


test_ntd.__test__ = False


def negative_count(test: NtDMatrix, measured: NtDMatrix, rel_tol: float = DEFAULT_REL_TOL,
                   measured_norm: float | None = None) -> int:
    """Negative eigenvalues of ``test - measured`` relative to the operands' magnitude."""
    diff = test - measured
    if measured_norm is None:
        measured_norm = _spectral_norm(measured.entries)
    scale = max(measured_norm, _spectral_norm(test.entries))
    return count_negative(sym_eigenvalues(diff), scale, rel_tol)


def test_block(
    measured: NtDMatrix,
    block: TestBlock,
    background,
    omega: float,
    m_tilde: int | None,
    mesh: Mesh,
    loads: BoundaryLoadSet,
    rel_tol: float = DEFAULT_REL_TOL,
    zero_tol: float = DEFAULT_ZERO_PIVOT_TOL,
    measured_norm: float | None = None,
) -> TestVerdict:
    """Run the monotonicity test for one block and one alpha."""
    if not any(block.alpha):
        raise MonotonicityError("alpha must not vanish identically")
    if block.alpha[2] >= background[2]:
        raise MonotonicityError("alpha_rho must stay below the background density")
    if measured.loadset_fingerprint != loads.fingerprint() or measured.mesh_fingerprint != mesh.fingerprint():
        raise MonotonicityError("measured NtD matrix was built with a different mesh or load set")
    if float(measured.omega) != float(omega):
        raise MonotonicityError(f"measured NtD is at omega={measured.omega}, test requested omega={omega}")
    test = test_ntd(mesh, loads, background, block, omega, zero_tol)
    n_neg = negative_count(test, measured, rel_tol, measured_norm)
    return TestVerdict(block.index, block.box, n_neg, None if m_tilde is None else int(m_tilde),
                       block.alpha, float(omega))


test_block.__test__ = False


def suggest_Mtilde(counts: Sequence[int]) -> MtildeSuggestion:
    """Low edge of the widest gap between sorted distinct counts (ties: lower gap)."""
    distinct = sorted({int(c) for c in counts if c >= 0})
    if not distinct:
        raise MonotonicityError("no valid counts to inspect")
    if len(distinct) < 2:
        return MtildeSuggestion(distinct[-1], None, False)
    gaps = np.diff(distinct)
    at = int(np.argmax(gaps))  # first maximum -> smaller value on ties
    return MtildeSuggestion(distinct[at], (distinct[at], distinct[at + 1]), True)


def sweep(
    measured: NtDMatrix,
    cover: Sequence[TestBlock],
    alpha_spec: Sequence[tuple[float, float, float]] | None,
    omega: float,
    m_tilde: int | str | None,
    mesh: Mesh,
    loads: BoundaryLoadSet,
    background,
    rel_tol: float = DEFAULT_REL_TOL,
    zero_tol: float = DEFAULT_ZERO_PIVOT_TOL,
    threads: int = 1,
    m0: int | None = None,
    blocks_per_axis=None,
) -> SweepResult:
    """Test every block, keeping per block the smallest count over ``alpha_spec``.

    ``m_tilde="auto"`` (or ``None``) picks the threshold with
    :func:`suggest_Mtilde` after all counts are known. Failing blocks are
    recorded with their error and never count as inside.
    """
    if blocks_per_axis is None:
        b = round(len(cover) ** (1 / 3))
        blocks_per_axis = (b, b, b) if b**3 == len(cover) else (len(cover), 1, 1)
    measured_norm = _spectral_norm(measured.entries)

    def run(block: TestBlock) -> TestVerdict:
        variants = alpha_spec or [block.alpha]
        best = None
        try:
            for alpha in variants:
                v = test_block(measured, block.with_alpha(alpha), background, omega, None, mesh, loads,
                               rel_tol, zero_tol, measured_norm)
                if best is None or v.n_neg < best.n_neg:
                    best = v
        except (FactorizationError, SolveError, NtDError, MaterialError) as exc:
            log.warning("block %d failed: %s", block.index, exc)
            return TestVerdict(block.index, block.box, -1, None, block.alpha, float(omega),
                               f"{type(exc).__name__}: {exc}")
        return best

    if threads > 1 and len(cover) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            verdicts = list(pool.map(run, cover))
    else:
        verdicts = [run(b) for b in cover]

    suggestion = None
    if m_tilde is None or m_tilde == "auto":
        valid = [v.n_neg for v in verdicts if v.valid]
        if valid:
            suggestion = suggest_Mtilde(valid)
            m_tilde = suggestion.value
            log.info("auto M~ = %d (gap %s, separated=%s)", m_tilde, suggestion.gap, suggestion.separated)
        else:
            m_tilde = None
    if m_tilde is not None:
        verdicts = [v.with_threshold(m_tilde) for v in verdicts]
    return SweepResult(tuple(blocks_per_axis), verdicts, float(omega),
                       None if m_tilde is None else int(m_tilde), rel_tol, m0, suggestion)
