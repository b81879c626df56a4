"""Structured hexahedral meshes of a box, boundary tagging and surface load patches.

Numbering conventions (fixed, every other module relies on them):

* node ``(i, j, k)`` on the lattice has global index ``i + (n+1)*j + (n+1)**2*k``;
* element ``(i, j, k)`` has global index ``i + n*j + n**2*k``;
* the 8 local nodes of an element follow the VTK_HEXAHEDRON order, i.e. the
  lattice offsets in :data:`LOCAL_NODE_OFFSETS`;
* the six sides of the box are named by :data:`SIDE_NAMES` (``zmin`` is the
  bottom); the same names are used for the six local faces of an element.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

LOCAL_NODE_OFFSETS = np.array(
    [
        [0, 0, 0],
        [1, 0, 0],
        [1, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [1, 1, 1],
        [0, 1, 1],
    ],
    dtype=np.int64,
)

SIDE_NAMES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")

# side -> (normal axis, 0 for min / 1 for max)
_SIDE_AXIS = {name: (idx // 2, idx % 2) for idx, name in enumerate(SIDE_NAMES)}

# local face (same index as SIDE_NAMES) -> its 4 local nodes
LOCAL_FACE_NODES = np.array(
    [
        [0, 3, 7, 4],
        [1, 2, 6, 5],
        [0, 1, 5, 4],
        [3, 2, 6, 7],
        [0, 1, 2, 3],
        [4, 5, 6, 7],
    ],
    dtype=np.int64,
)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


class MeshError(ValueError):
    """Invalid mesh, tagging or load-patch request."""


@dataclass(frozen=True)
class BoundaryFaces:
    """Exterior element faces, stored column-wise.

    ``side`` indexes :data:`SIDE_NAMES`; ``plane_index`` holds the two in-plane
    element coordinates of the face (ascending axis order), which is what the
    load patches are cut from.
    """

    element: np.ndarray
    local_face: np.ndarray
    side: np.ndarray
    plane_index: np.ndarray
    nodes: np.ndarray
    normal: np.ndarray
    area: np.ndarray
    dirichlet: np.ndarray

    def __len__(self) -> int:
        return len(self.element)

    @property
    def tags(self) -> list[str]:
        return [DIRICHLET if d else NEUMANN for d in self.dirichlet]


@dataclass(frozen=True)
class Mesh:
    """Uniform hexahedral voxelization of ``[0, Lx] x [0, Ly] x [0, Lz]``."""

    n_axis: int
    extent: tuple[float, float, float]
    nodes: np.ndarray
    elements: np.ndarray
    boundary_faces: BoundaryFaces

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / self.n_axis for L in self.extent)

    @property
    def dirichlet_sides(self) -> tuple[str, ...]:
        bf = self.boundary_faces
        return tuple(s for i, s in enumerate(SIDE_NAMES) if np.any(bf.dirichlet[bf.side == i]))

    @property
    def neumann_sides(self) -> tuple[str, ...]:
        bf = self.boundary_faces
        return tuple(s for i, s in enumerate(SIDE_NAMES) if not np.any(bf.dirichlet[bf.side == i]))

    def element_index(self, i, j, k):
        n = self.n_axis
        return np.asarray(i) + n * np.asarray(j) + n * n * np.asarray(k)

    def element_centers(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def element_nodes(self, e: int) -> np.ndarray:
        """Coordinates of the 8 nodes of element ``e``, shape (8, 3)."""
        return self.nodes[self.elements[e]]

    def dirichlet_nodes(self) -> np.ndarray:
        bf = self.boundary_faces
        return np.unique(bf.nodes[bf.dirichlet])

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray([self.n_axis], dtype=np.int64).tobytes())
        h.update(np.asarray(self.extent, dtype=np.float64).tobytes())
        h.update(self.boundary_faces.dirichlet.astype(np.uint8).tobytes())
        return h.hexdigest()

    def vtk_metadata(self) -> dict:
        """Header fields of a legacy-VTK STRUCTURED_POINTS dataset on the node lattice."""
        return {
            "dimensions": (self.n_axis + 1,) * 3,
            "spacing": self.spacing,
            "origin": (0.0, 0.0, 0.0),
        }


def _as_extent(edge_length) -> tuple[float, float, float]:
    ext = np.broadcast_to(np.asarray(edge_length, dtype=float), (3,))
    if np.any(~np.isfinite(ext)) or np.any(ext <= 0):
        raise MeshError(f"edge lengths must be positive, got {edge_length!r}")
    return tuple(float(x) for x in ext)


def build_structured_hex_mesh(n: int, edge_length=1.0, dirichlet: Iterable[str] = ("zmin",)) -> Mesh:
    """Build an ``n x n x n`` trilinear hex mesh of a box.

    Parameters
    ----------
    n : int
        Subdivisions per axis, at least 2.
    edge_length : float or sequence of 3 floats
        Box edge lengths in meters.
    dirichlet : iterable of str
        Sides clamped (Gamma_D); every other exterior face is Neumann.
    """
    if int(n) != n or n < 2:
        raise MeshError(f"need at least 2 subdivisions per axis, got {n!r}")
    n = int(n)
    extent = _as_extent(edge_length)

    ticks = [np.linspace(0.0, L, n + 1) for L in extent]
    kk, jj, ii = np.meshgrid(np.arange(n + 1), np.arange(n + 1), np.arange(n + 1), indexing="ij")
    nodes = np.column_stack([ticks[0][ii.ravel()], ticks[1][jj.ravel()], ticks[2][kk.ravel()]])

    ek, ej, ei = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    ei, ej, ek = ei.ravel(), ej.ravel(), ek.ravel()
    m = n + 1
    elements = np.column_stack(
        [(ei + a) + m * (ej + b) + m * m * (ek + c) for a, b, c in LOCAL_NODE_OFFSETS]
    )

    h = np.asarray(extent) / n
    cols = {key: [] for key in ("element", "local_face", "side", "plane_index", "normal", "area")}
    coords = np.column_stack([ei, ej, ek])
    for s, name in enumerate(SIDE_NAMES):
        axis, upper = _SIDE_AXIS[name]
        sel = np.flatnonzero(coords[:, axis] == (n - 1 if upper else 0))
        in_plane = [a for a in range(3) if a != axis]
        normal = np.zeros(3)
        normal[axis] = 1.0 if upper else -1.0
        cols["element"].append(sel)
        cols["local_face"].append(np.full(len(sel), s))
        cols["side"].append(np.full(len(sel), s))
        cols["plane_index"].append(coords[sel][:, in_plane])
        cols["normal"].append(np.tile(normal, (len(sel), 1)))
        cols["area"].append(np.full(len(sel), h[in_plane[0]] * h[in_plane[1]]))
    element = np.concatenate(cols["element"])
    local_face = np.concatenate(cols["local_face"])
    faces = BoundaryFaces(
        element=element,
        local_face=local_face,
        side=np.concatenate(cols["side"]),
        plane_index=np.concatenate(cols["plane_index"]),
        nodes=elements[element[:, None], LOCAL_FACE_NODES[local_face]],
        normal=np.concatenate(cols["normal"]),
        area=np.concatenate(cols["area"]),
        dirichlet=np.zeros(len(element), dtype=bool),
    )
    for arr in (nodes, elements):
        arr.setflags(write=False)
    mesh = Mesh(n_axis=n, extent=extent, nodes=nodes, elements=elements, boundary_faces=faces)
    return tag_boundary(mesh, dirichlet)


def tag_boundary(mesh: Mesh, dirichlet_spec: Iterable[str] = ("zmin",)) -> Mesh:
    """Return a copy of ``mesh`` whose named sides are Dirichlet, all others Neumann.

    An empty selector gives a pure traction problem. Clamping all six sides is
    rejected since the Neumann part of the boundary must not be empty.
    """
    if isinstance(dirichlet_spec, str):
        dirichlet_spec = (dirichlet_spec,)
    chosen = set(dirichlet_spec)
    unknown = chosen - set(SIDE_NAMES)
    if unknown:
        raise MeshError(f"unknown side(s) {sorted(unknown)}; expected a subset of {SIDE_NAMES}")
    if chosen == set(SIDE_NAMES):
        raise MeshError("all sides Dirichlet: the Neumann boundary would be empty")
    ids = [SIDE_NAMES.index(s) for s in chosen]
    bf = mesh.boundary_faces
    tags = np.isin(bf.side, ids)
    tags.setflags(write=False)
    new_faces = BoundaryFaces(**{**bf.__dict__, "dirichlet": tags})
    return Mesh(
        n_axis=mesh.n_axis,
        extent=mesh.extent,
        nodes=mesh.nodes,
        elements=mesh.elements,
        boundary_faces=new_faces,
    )


@dataclass(frozen=True)
class BoundaryLoad:
    """Piecewise-constant traction on a set of Neumann faces (N/m^2 per face)."""

    faces: np.ndarray
    tractions: np.ndarray
    label: str

    @classmethod
    def uniform(cls, faces, traction, label: str) -> "BoundaryLoad":
        faces = np.asarray(faces, dtype=np.int64)
        tr = np.tile(np.asarray(traction, dtype=float), (len(faces), 1))
        return cls(faces=faces, tractions=tr, label=label)


@dataclass(frozen=True)
class BoundaryLoadSet:
    """Ordered family of boundary loads g_1 ... g_m."""

    loads: tuple[BoundaryLoad, ...]
    mesh_fingerprint: str = ""

    @property
    def m(self) -> int:
        return len(self.loads)

    def __len__(self) -> int:
        return len(self.loads)

    def __iter__(self):
        return iter(self.loads)

    def __getitem__(self, idx) -> BoundaryLoad:
        return self.loads[idx]

    @property
    def labels(self) -> list[str]:
        return [g.label for g in self.loads]

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.mesh_fingerprint.encode())
        for g in self.loads:
            h.update(g.faces.astype(np.int64).tobytes())
            h.update(np.ascontiguousarray(g.tractions, dtype=np.float64).tobytes())
        return h.hexdigest()

    def scaled(self, factor: float) -> "BoundaryLoadSet":
        loads = tuple(BoundaryLoad(g.faces, g.tractions * factor, g.label) for g in self.loads)
        return BoundaryLoadSet(loads, self.mesh_fingerprint)

    def l2_gram(self, mesh: Mesh) -> np.ndarray:
        """Exact surface integrals ``int_{Gamma_N} g_i . g_j dS``."""
        n_faces = len(mesh.boundary_faces)
        G = np.zeros((self.m, n_faces, 3))
        for r, g in enumerate(self.loads):
            G[r, g.faces] += g.tractions
        w = mesh.boundary_faces.area
        return np.einsum("ifk,jfk,f->ij", G, G, w)


def build_load_patches(
    mesh: Mesh,
    patches_per_edge: int,
    magnitude: float = 100.0,
    directions: str = "normal",
) -> BoundaryLoadSet:
    """Cut every Neumann side into ``p x p`` square patches and load each one.

    ``directions="normal"`` gives one load per patch (traction ``magnitude * nu``);
    ``"full"`` adds the two in-plane unit tractions, tripling the count. Loads
    are ordered side by side (``SIDE_NAMES`` order), then by patch (first
    in-plane index fastest), then by direction.
    """
    if directions in ("normal+tangential", "normal_tangential"):
        directions = "full"
    if directions not in ("normal", "full"):
        raise MeshError(f"directions must be 'normal' or 'full', got {directions!r}")
    p = int(patches_per_edge)
    n = mesh.n_axis
    if p < 1 or n % p:
        raise MeshError(f"patches_per_edge={patches_per_edge} must divide n={n}")
    bf = mesh.boundary_faces
    per = n // p
    loads = []
    for s, name in enumerate(SIDE_NAMES):
        on_side = bf.side == s
        if not np.any(on_side):
            continue
        if np.any(bf.dirichlet[on_side]):
            continue
        axis, _ = _SIDE_AXIS[name]
        in_plane = [a for a in range(3) if a != axis]
        normal = bf.normal[np.flatnonzero(on_side)[0]]
        dirs = [("n", magnitude * normal)]
        if directions == "full":
            for a in in_plane:
                t = np.zeros(3)
                t[a] = magnitude
                dirs.append(("t" + "xyz"[a], t))
        patch_of = bf.plane_index // per
        for b in range(p):
            for a in range(p):
                faces = np.flatnonzero(on_side & (patch_of[:, 0] == a) & (patch_of[:, 1] == b))
                for tag, traction in dirs:
                    loads.append(BoundaryLoad.uniform(faces, traction, f"{name}[{a},{b}]:{tag}"))
    if not loads:
        raise MeshError("mesh has no fully Neumann side to carry load patches")
    return BoundaryLoadSet(tuple(loads), mesh.fingerprint())


def side_faces(mesh: Mesh, side: str) -> np.ndarray:
    """Boundary-face indices lying on the named side."""
    return np.flatnonzero(mesh.boundary_faces.side == SIDE_NAMES.index(side))


def validate_load(mesh: Mesh, load: BoundaryLoad) -> None:
    faces = np.asarray(load.faces)
    if faces.size and (faces.min() < 0 or faces.max() >= len(mesh.boundary_faces)):
        raise MeshError(f"load {load.label!r} references faces outside the mesh")
    if np.any(mesh.boundary_faces.dirichlet[faces]):
        raise MeshError(f"load {load.label!r} touches the Dirichlet boundary")
    if load.tractions.shape != (len(faces), 3):
        raise MeshError(f"load {load.label!r}: tractions must have shape ({len(faces)}, 3)")


def sides_selector(names: Sequence[str] | str | None) -> tuple[str, ...]:
    if names is None:
        return ()
    if isinstance(names, str):
        return tuple(x for x in names.replace(",", " ").split() if x)
    return tuple(names)
