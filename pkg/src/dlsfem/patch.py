"""Element patches: the stencil of each element's reconstruction.

A patch is grown by repeated face-neighbor closure until it holds at least
the requested number of elements, then trimmed to the elements whose
barycenters are nearest the center element's barycenter.  Ties in distance
break by ascending element id so patches are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

# per-degree patch cardinality used throughout (2D)
_PATCH_SIZE = {1: 4, 2: 8, 3: 13, 4: 19, 5: 26}


def default_patch_size(m: int) -> int:
    """Patch cardinality for reconstruction degree ``m`` (1..5)."""
    if m not in _PATCH_SIZE:
        raise ValueError(f"degree {m} outside the supported range 1..5")
    return _PATCH_SIZE[m]


@dataclass(frozen=True)
class ElementPatch:
    """Stencil of one element: member ids and their collocation points.

    ``members[0]`` is the center element; the remaining members are ordered
    by (distance to the center barycenter, element id).  ``points`` are the
    member barycenters in the same order.
    """

    center: int
    members: tuple[int, ...]
    points: np.ndarray
    threshold: int
    graph_radius: int  # closure depth at which growth stopped

    def __len__(self) -> int:
        return len(self.members)


def build_patch(mesh: Mesh, k: int, threshold: int) -> ElementPatch:
    """Grow and trim the patch of element ``k`` to exactly ``threshold`` members."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    current = {k}
    depth = 0
    while len(current) < threshold:
        grown = set(current)
        for c in current:
            grown.update(mesh.cell_neighbors[c])
        if grown == current:
            raise ValueError(
                f"patch of element {k} cannot reach {threshold} elements "
                f"(only {len(current)} reachable)"
            )
        current = grown
        depth += 1

    center = mesh.barycenter[k]
    candidates = np.fromiter(current, dtype=np.int64)
    dist = np.hypot(*(mesh.barycenter[candidates] - center).T)
    order = np.lexsort((candidates, dist))
    chosen = candidates[order[:threshold]]
    return ElementPatch(
        center=k,
        members=tuple(int(c) for c in chosen),
        points=mesh.barycenter[chosen].copy(),
        threshold=threshold,
        graph_radius=depth,
    )


def build_all_patches(mesh: Mesh, threshold: int) -> list[ElementPatch]:
    """Patches for every element, cached on the mesh per threshold."""
    key = ("patches", threshold)
    if key not in mesh._cache:
        mesh._cache[key] = [build_patch(mesh, k, threshold) for k in range(mesh.n_cells)]
    return mesh._cache[key]
