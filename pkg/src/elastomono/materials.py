"""Piecewise-constant Lamé/density fields, inclusion phantoms and test coefficients."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mesh import Mesh


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Axis-aligned range of elements, ``lo`` inclusive, ``hi`` exclusive, per axis."""

    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def __post_init__(self):
        lo = tuple(int(x) for x in self.lo)
        hi = tuple(int(x) for x in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise MaterialError("box corners need three indices")
        if any(a >= b for a, b in zip(lo, hi)):
            raise MaterialError(f"empty box {lo}..{hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_coords(cls, mesh: Mesh, lo, hi, atol: float = 1e-9) -> "Box":
        """Convert physical corners (m) to element ranges; corners must sit on grid planes."""
        h = np.asarray(mesh.spacing)
        out = []
        for corner in (lo, hi):
            idx = np.asarray(corner, dtype=float) / h
            r = np.rint(idx)
            if np.any(np.abs(idx - r) > atol * max(1.0, mesh.n_axis)):
                raise MaterialError(f"box corner {list(corner)} is not aligned with the element grid")
            out.append(tuple(int(x) for x in r))
        return cls(*out)

    def check_inside(self, mesh: Mesh) -> None:
        if min(self.lo) < 0 or max(self.hi) > mesh.n_axis:
            raise MaterialError(f"box {self.lo}..{self.hi} exceeds the {mesh.n_axis}^3 mesh")

    def element_mask(self, mesh: Mesh) -> np.ndarray:
        self.check_inside(mesh)
        n = mesh.n_axis
        k, j, i = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        inside = np.ones(i.shape, dtype=bool)
        for ax, coord in enumerate((i, j, k)):
            inside &= (coord >= self.lo[ax]) & (coord < self.hi[ax])
        return inside.ravel()

    def contains(self, other: "Box") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def intersects(self, other: "Box") -> bool:
        return all(max(a, c) < min(b, d) for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))


@dataclass(frozen=True)
class MaterialField:
    """Element-wise lambda [Pa], mu [Pa] and rho [kg/m^3]."""

    lam: np.ndarray
    mu: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        arrays = []
        for name in ("lam", "mu", "rho"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim != 1:
                raise MaterialError(f"{name} must be one value per element")
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise MaterialError(f"{name} must be finite and strictly positive on every element")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrays.append(a)
        if len({len(a) for a in arrays}) != 1:
            raise MaterialError("lam, mu and rho must have the same length")

    def __len__(self) -> int:
        return len(self.lam)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.lam, self.mu, self.rho):
            h.update(a.tobytes())
        return h.hexdigest()

    def replace(self, lam=None, mu=None, rho=None) -> "MaterialField":
        return MaterialField(
            self.lam if lam is None else lam,
            self.mu if mu is None else mu,
            self.rho if rho is None else rho,
        )


@dataclass(frozen=True)
class InclusionSpec:
    """Perturbation on a box: lambda and mu go up by the deltas, rho goes down by ``d_rho``.

    A negative ``d_rho`` raises the density; M0 then needs an a-priori density
    bound in place of rho0.
    """

    box: Box
    d_lambda: float = 0.0
    d_mu: float = 0.0
    d_rho: float = 0.0

    def __post_init__(self):
        if min(self.d_lambda, self.d_mu) < 0:
            raise MaterialError("lambda and mu inclusion deltas must be >= 0")


@dataclass(frozen=True)
class TestBlock:
    """Candidate block B with test contrasts ``alpha = (a_lambda, a_mu, a_rho)``."""

    box: Box
    alpha: tuple[float, float, float]
    index: int = 0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != 3 or min(alpha) < 0:
            raise MaterialError(f"alpha must be three nonnegative numbers, got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    def with_alpha(self, alpha) -> "TestBlock":
        return TestBlock(self.box, alpha, self.index)


def background(lam0: float, mu0: float, rho0: float, mesh: Mesh) -> MaterialField:
    for name, v in (("lambda", lam0), ("mu", mu0), ("rho", rho0)):
        if not np.isfinite(v) or v <= 0:
            raise MaterialError(f"background {name} must be positive, got {v!r}")
    ne = mesh.n_elements
    return MaterialField(np.full(ne, float(lam0)), np.full(ne, float(mu0)), np.full(ne, float(rho0)))


def apply_inclusions(field: MaterialField, specs: Sequence[InclusionSpec], mesh: Mesh) -> MaterialField:
    """Stiffen (lambda, mu) and lighten (rho) the field on each inclusion box."""
    if not specs:
        return field
    lam, mu, rho = field.lam.copy(), field.mu.copy(), field.rho.copy()
    for spec in specs:
        mask = spec.box.element_mask(mesh)
        lam[mask] += spec.d_lambda
        mu[mask] += spec.d_mu
        rho[mask] -= spec.d_rho
    if np.any(rho <= 0):
        raise MaterialError("inclusion density decrease drives rho to zero or below")
    return MaterialField(lam, mu, rho)


def test_coefficients(lam0: float, mu0: float, rho0: float, block: TestBlock, mesh: Mesh) -> MaterialField:
    """Background plus ``alpha`` on the block: (lam0 + a1, mu0 + a2, rho0 - a3) inside B."""
    a1, a2, a3 = block.alpha
    if a3 >= rho0:
        raise MaterialError(f"alpha_rho={a3} must stay below the background density {rho0}")
    base = background(lam0, mu0, rho0, mesh)
    mask = block.box.element_mask(mesh)
    return MaterialField(base.lam + a1 * mask, base.mu + a2 * mask, base.rho - a3 * mask)


test_coefficients.__test__ = False
