"""Independent reference implementations shared by the test modules."""

from collections import deque

import numpy as np


def flood_fill_oracle(mask):
    """Brute-force BFS from every false border voxel; unreached false voxels are cavities."""
    m = np.asarray(mask, dtype=bool)
    dims = m.shape
    seen = np.zeros(dims, dtype=bool)
    queue = deque()
    for idx in np.ndindex(*dims):
        on_border = any(c == 0 or c == d - 1 for c, d in zip(idx, dims))
        if on_border and not m[idx]:
            seen[idx] = True
            queue.append(idx)
    steps = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    while queue:
        i, j, k = queue.popleft()
        for di, dj, dk in steps:
            q = (i + di, j + dj, k + dk)
            if all(0 <= c < d for c, d in zip(q, dims)) and not m[q] and not seen[q]:
                seen[q] = True
                queue.append(q)
    return m | ~seen


def eig_signs(A, tol=1e-9):
    """(neg, zero, pos) from a dense symmetric eigendecomposition."""
    ev = np.linalg.eigvalsh(A)
    t = tol * np.abs(ev).max() if ev.size else 0.0
    return int(np.sum(ev < -t)), int(np.sum(np.abs(ev) <= t)), int(np.sum(ev > t))


def rigid_modes(points):
    """Nodal samples of the 3 translations and 3 infinitesimal rotations, shape (6, 3 * len(points))."""
    points = np.asarray(points, dtype=float)
    modes = [np.tile(np.eye(3)[c], len(points)) for c in range(3)]
    for A in ([[0, -1, 0], [1, 0, 0], [0, 0, 0]], [[0, 0, 1], [0, 0, 0], [-1, 0, 0]],
              [[0, 0, 0], [0, 0, -1], [0, 1, 0]]):
        modes.append((points @ np.array(A, float).T).ravel())
    return np.array(modes)
