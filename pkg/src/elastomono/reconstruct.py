"""Voxel masks from sweep verdicts and internal-cavity filling."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .monotonicity import SweepResult
from .vtkio import write_structured_points

# face adjacency only
_SIX = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True)
class VoxelMask:
    """Boolean per cover block, array indexed ``[i, j, k]``."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 3:
            raise ValueError("voxel mask must be 3-D")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.mask.shape

    def block_indices(self) -> list[int]:
        """True voxels as block indices ``i + b*j + b*b*k``."""
        return [int(x) for x in np.flatnonzero(self.mask.ravel(order="F"))]

    @classmethod
    def from_indices(cls, indices, dims) -> "VoxelMask":
        flat = np.zeros(int(np.prod(dims)), dtype=bool)
        flat[list(indices)] = True
        return cls(flat.reshape(dims, order="F"))

    def __eq__(self, other) -> bool:
        return isinstance(other, VoxelMask) and self.dims == other.dims and bool(np.all(self.mask == other.mask))

    def __hash__(self):
        return hash((self.dims, self.mask.tobytes()))

    def write_vtk(self, path, block_size=(1.0, 1.0, 1.0), name: str = "inside") -> Path:
        dims = [d + 1 for d in self.dims]
        return write_structured_points(
            path, dims, block_size, cell_scalars={name: self.mask.ravel(order="F").astype(int)}
        )

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["block_index", "i", "j", "k"])
            for idx in self.block_indices():
                i, j, k = np.unravel_index(idx, self.dims, order="F")
                w.writerow([idx, int(i), int(j), int(k)])
        return path


def assemble_mask(result: SweepResult) -> VoxelMask:
    return VoxelMask.from_indices(result.inside_indices(), result.blocks_per_axis)


def fill_cavities(mask: VoxelMask) -> VoxelMask:
    """Set every false component (6-connected) that does not reach the grid boundary."""
    m = mask.mask
    labels, count = ndimage.label(~m, structure=_SIX)
    if count == 0:
        return mask
    border = np.zeros_like(m)
    border[[0, -1], :, :] = True
    border[:, [0, -1], :] = True
    border[:, :, [0, -1]] = True
    outer = np.unique(labels[border & ~m])
    cavity = (labels > 0) & ~np.isin(labels, outer)
    return VoxelMask(m | cavity)


def reconstruct(result: SweepResult) -> VoxelMask:
    return fill_cavities(assemble_mask(result))
