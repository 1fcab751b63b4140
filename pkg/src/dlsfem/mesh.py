"""2D polygonal meshes of the unit square.

Cells are convex polygons given as counterclockwise vertex loops.  Faces
carry the connectivity needed by the discontinuous solver: the two adjacent
cells, a unit normal oriented outward from the first of them, and a boundary
tag (Dirichlet or Neumann).  Meshes are immutable after construction and may
be shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# face kinds
INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2

_COLLINEAR_TOL = 1e-12


@dataclass(frozen=True)
class Face:
    """Single mesh face (an edge in 2D)."""

    vertices: tuple[int, int]
    cells: tuple[int, int]  # (first adjacent cell, second adjacent or -1)
    normal: np.ndarray  # unit, outward from cells[0]
    length: float
    kind: int

    @property
    def is_boundary(self) -> bool:
        return self.cells[1] < 0


class Mesh:
    """Conforming partition of a rectangular domain into convex polygons.

    Parameters
    ----------
    vertices : (nv, 2) array of point coordinates.
    cells : sequence of vertex-index loops, counterclockwise.
    nominal_h : grid parameter recorded by structured generators (1/n);
        defaults to the maximum cell diameter.
    """

    def __init__(self, vertices, cells, nominal_h=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must be an (nv, 2) array")
        self.cells = tuple(tuple(int(v) for v in c) for c in cells)
        if any(len(c) < 3 for c in self.cells):
            raise ValueError("every cell needs at least 3 vertices")

        self._build_geometry()
        self._build_faces()
        self.domain = (
            float(self.vertices[:, 0].min()),
            float(self.vertices[:, 1].min()),
            float(self.vertices[:, 0].max()),
            float(self.vertices[:, 1].max()),
        )
        self.nominal_h = float(nominal_h) if nominal_h else float(self.diameter.max())
        self.neumann_rule_str = None
        self._cache = {}

    # -- construction ----------------------------------------------------

    def _build_geometry(self):
        n = len(self.cells)
        self.area = np.empty(n)
        self.barycenter = np.empty((n, 2))
        self.diameter = np.empty(n)
        for i, cell in enumerate(self.cells):
            pts = self.vertices[list(cell)]
            x, y = pts[:, 0], pts[:, 1]
            cross = x * np.roll(y, -1) - np.roll(x, -1) * y
            area = 0.5 * cross.sum()
            scale = max(np.abs(pts).max(), 1.0)
            if area <= _COLLINEAR_TOL * scale**2:
                raise ValueError(f"cell {i} is not counterclockwise with positive area")
            # convexity: every corner turns left (within collinearity tolerance)
            e = np.roll(pts, -1, axis=0) - pts
            turn = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
            if (turn < -_COLLINEAR_TOL * scale**2).any():
                raise ValueError(f"cell {i} is not convex")
            self.area[i] = area
            # area centroid of the polygon, not the vertex average
            cx = ((x + np.roll(x, -1)) * cross).sum() / (6.0 * area)
            cy = ((y + np.roll(y, -1)) * cross).sum() / (6.0 * area)
            self.barycenter[i] = (cx, cy)
            d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
            self.diameter[i] = np.sqrt(d2.max())

    def _build_faces(self):
        edge_map: dict[tuple[int, int], int] = {}
        faces: list[Face] = []
        cell_to_faces: list[list[int]] = [[] for _ in self.cells]
        second_cell: list[int] = []
        for ci, cell in enumerate(self.cells):
            for k in range(len(cell)):
                a, b = cell[k], cell[(k + 1) % len(cell)]
                key = (a, b) if a < b else (b, a)
                if key in edge_map:
                    fi = edge_map[key]
                    if second_cell[fi] >= 0:
                        raise ValueError(f"edge {key} shared by more than two cells")
                    second_cell[fi] = ci
                else:
                    fi = len(faces)
                    edge_map[key] = fi
                    pa, pb = self.vertices[a], self.vertices[b]
                    d = pb - pa
                    length = float(np.hypot(d[0], d[1]))
                    if length <= 0.0:
                        raise ValueError(f"zero-length edge {key}")
                    # cell loop is CCW, so (dy, -dx) points out of cell ci
                    normal = np.array([d[1], -d[0]]) / length
                    faces.append(Face((a, b), (ci, -1), normal, length, INTERIOR))
                    second_cell.append(-1)
                cell_to_faces[ci].append(fi)

        self.faces = [
            Face(f.vertices, (f.cells[0], second_cell[i]), f.normal, f.length,
                 INTERIOR if second_cell[i] >= 0 else DIRICHLET)
            for i, f in enumerate(faces)
        ]
        self.cell_to_faces = tuple(tuple(fs) for fs in cell_to_faces)
        neighbors: list[list[int]] = [[] for _ in self.cells]
        for f in self.faces:
            c0, c1 = f.cells
            if c1 >= 0:
                neighbors[c0].append(c1)
                neighbors[c1].append(c0)
        self.cell_neighbors = tuple(tuple(ns) for ns in neighbors)

    # -- queries -----------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def cell_points(self, i) -> np.ndarray:
        return self.vertices[list(self.cells[i])]

    def sub_triangles(self, i) -> np.ndarray:
        """Fan triangulation (v0, vk, vk+1) of cell i, shape (ntri, 3, 2)."""
        pts = self.cell_points(i)
        n = len(pts)
        tris = np.empty((n - 2, 3, 2))
        tris[:, 0] = pts[0]
        tris[:, 1] = pts[1:-1]
        tris[:, 2] = pts[2:]
        return tris

    def face_midpoint(self, f: Face) -> np.ndarray:
        a, b = f.vertices
        return 0.5 * (self.vertices[a] + self.vertices[b])

    def boundary_faces(self):
        return [f for f in self.faces if f.is_boundary]

    def faces_of_kind(self, kind):
        return [f for f in self.faces if f.kind == kind]

    def _with_face_kinds(self, kinds, rule_str=None) -> "Mesh":
        out = Mesh.__new__(Mesh)
        out.__dict__.update(self.__dict__)
        out.faces = [
            Face(f.vertices, f.cells, f.normal, f.length, int(k))
            for f, k in zip(self.faces, kinds)
        ]
        out.neumann_rule_str = rule_str
        out._cache = {}
        return out


def classify_boundary(mesh: Mesh, rule, rule_str=None) -> Mesh:
    """Tag boundary faces: Neumann where ``rule(midpoint)`` holds, else Dirichlet.

    Interior faces are untouched.  Raises if the rule labels every boundary
    face Neumann, because the method requires a non-empty Dirichlet boundary.
    """
    kinds = []
    n_dirichlet = 0
    for f in mesh.faces:
        if not f.is_boundary:
            kinds.append(INTERIOR)
        elif rule(mesh.face_midpoint(f)):
            kinds.append(NEUMANN)
        else:
            kinds.append(DIRICHLET)
            n_dirichlet += 1
    if n_dirichlet == 0:
        raise ValueError(
            "boundary classification left no Dirichlet faces; "
            "the method needs a non-empty Dirichlet part of the boundary"
        )
    return mesh._with_face_kinds(kinds, rule_str)


def boundary_rule(expr: str):
    """Parse a boundary-rule string such as ``"x==1"`` into a midpoint predicate.

    Supported forms: ``x==VALUE``, ``y==VALUE`` (matched within 1e-12),
    ``never`` (all Dirichlet).
    """
    expr = expr.strip().replace(" ", "")
    if expr == "never":
        return lambda p: False
    for axis, idx in (("x", 0), ("y", 1)):
        if expr.startswith(axis + "=="):
            value = float(expr[len(axis) + 2:])
            return lambda p, i=idx, v=value: abs(p[i] - v) <= 1e-12
    raise ValueError(f"unsupported boundary rule {expr!r}")


# -- generators -------------------------------------------------------------


def generate_unit_square_triangular(n: int) -> Mesh:
    """Structured triangulation of [0,1]^2: n-by-n squares, each cut by the
    same diagonal, giving 2*n**2 triangles."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    vid = lambda i, j: i * (n + 1) + j
    verts = np.array([(xs[i], xs[j]) for i in range(n + 1) for j in range(n + 1)])
    cells = []
    for i in range(n):
        for j in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    return Mesh(verts, cells, nominal_h=1.0 / n)


def _clip_halfplane(poly, a, b, c):
    """Sutherland-Hodgman clip of polygon ``poly`` against a*x + b*y <= c."""
    d = poly[:, 0] * a + poly[:, 1] * b - c
    if (d <= 0.0).all():
        return poly
    out = []
    m = len(poly)
    for i in range(m):
        j = (i + 1) % m
        di, dj = d[i], d[j]
        if di <= 0.0:
            out.append(poly[i])
        if (di < 0.0) != (dj < 0.0) and di != dj:
            t = di / (di - dj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out) if len(out) >= 3 else np.empty((0, 2))


def _voronoi_cell(seeds, i, order):
    """Voronoi cell of seed i clipped to the unit square, by successive
    half-plane cuts against bisectors with the other seeds (nearest first)."""
    s = seeds[i]
    poly = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    for j in order:
        if j == i:
            continue
        diff = seeds[j] - s
        dist = np.hypot(diff[0], diff[1])
        # no later (more distant) seed can cut the current polygon
        radius = np.sqrt(((poly - s) ** 2).sum(axis=1).max())
        if dist > 2.0 * radius:
            break
        mid = 0.5 * (seeds[j] + s)
        poly = _clip_halfplane(poly, diff[0], diff[1], diff @ mid)
        if len(poly) == 0:
            raise ValueError(f"seed {i} produced an empty Voronoi cell")
    return poly


def _polygon_centroid(poly):
    x, y = poly[:, 0], poly[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * cross.sum()
    cx = ((x + np.roll(x, -1)) * cross).sum() / (6.0 * area)
    cy = ((y + np.roll(y, -1)) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def _dedupe_collinear(poly, tol=1e-10):
    """Drop repeated vertices (clipping can emit near-duplicates)."""
    keep = []
    m = len(poly)
    for i in range(m):
        if np.hypot(*(poly[i] - poly[(i - 1) % m])) > tol:
            keep.append(i)
    return poly[keep]


def generate_voronoi_polygonal(n_seeds: int, n_lloyd: int = 0, rng_seed: int = 0) -> Mesh:
    """Clipped Voronoi mesh of [0,1]^2 from ``n_seeds`` random seeds,
    optionally smoothed by ``n_lloyd`` sweeps of centroid relaxation.

    Deterministic for a fixed ``rng_seed``.
    """
    from scipy.spatial import cKDTree

    if n_seeds < 4:
        raise ValueError("need at least 4 seeds")
    rng = np.random.default_rng(rng_seed)
    seeds = rng.uniform(0.05 / np.sqrt(n_seeds), 1.0 - 0.05 / np.sqrt(n_seeds),
                        size=(n_seeds, 2))

    for sweep in range(n_lloyd + 1):
        tree = cKDTree(seeds)
        k = min(n_seeds, 48)
        _, neighbor_idx = tree.query(seeds, k=k)
        pairs = tree.query_pairs(r=1e-12)
        if pairs:
            raise ValueError(f"coincident seeds: {sorted(pairs)[0]}")
        polys = []
        for i in range(n_seeds):
            order = neighbor_idx[i]
            poly = _voronoi_cell(seeds, i, order)
            # rare: the k nearest neighbors were not enough to close the cell
            radius = np.sqrt(((poly - seeds[i]) ** 2).sum(axis=1).max())
            if k < n_seeds and np.hypot(*(seeds[order[-1]] - seeds[i])) < 2 * radius:
                d = ((seeds - seeds[i]) ** 2).sum(axis=1)
                poly = _voronoi_cell(seeds, i, np.argsort(d))
            polys.append(_dedupe_collinear(poly))
        if sweep < n_lloyd:
            seeds = np.array([_polygon_centroid(p) for p in polys])

    return _mesh_from_polygons(polys, nominal_h=1.0 / np.sqrt(n_seeds))


def _mesh_from_polygons(polys, nominal_h=None, weld_tol=1e-9):
    """Weld per-cell polygon soup into a conforming Mesh."""
    from scipy.spatial import cKDTree

    counts = [len(p) for p in polys]
    allv = np.concatenate(polys, axis=0)
    tree = cKDTree(allv)
    parent = np.arange(len(allv))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in sorted(tree.query_pairs(r=weld_tol)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    roots = np.array([find(a) for a in range(len(allv))])
    unique_roots, inverse = np.unique(roots, return_inverse=True)
    verts = allv[unique_roots]
    cells = []
    pos = 0
    for c in counts:
        loop = []
        for k in range(c):
            v = int(inverse[pos + k])
            if not loop or loop[-1] != v:
                loop.append(v)
        if loop[0] == loop[-1]:
            loop.pop()
        cells.append(tuple(loop))
        pos += c
    return Mesh(verts, cells, nominal_h=nominal_h)


# -- diagnostics -------------------------------------------------------------


@dataclass(frozen=True)
class MeshQuality:
    """Per-cell shape diagnostics."""

    h: np.ndarray  # cell diameters
    rho: np.ndarray  # inscribed-radius lower bound
    ratio: np.ndarray  # h / rho
    min_face_ratio: np.ndarray  # min over faces of h_e / rho

    @property
    def max_ratio(self) -> float:
        return float(self.ratio.max())


def quality_metrics(mesh: Mesh) -> MeshQuality:
    """Shape-regularity report: diameters, inscribed radii and their ratios.

    The inscribed radius is the distance from the barycenter to the nearest
    edge line; for a convex cell a ball of that radius around the barycenter
    lies inside the cell, so setting it as rho is a cheap lower bound on the
    true inradius (exact for squares).
    """
    n = mesh.n_cells
    rho = np.empty(n)
    min_face_ratio = np.empty(n)
    for i in range(n):
        pts = mesh.cell_points(i)
        nxt = np.roll(pts, -1, axis=0)
        e = nxt - pts
        lengths = np.hypot(e[:, 0], e[:, 1])
        # distance from barycenter to each edge line
        rel = mesh.barycenter[i] - pts
        dist = np.abs(e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]) / lengths
        rho[i] = dist.min()
        min_face_ratio[i] = (lengths / rho[i]).min()
    return MeshQuality(mesh.diameter.copy(), rho, mesh.diameter / rho, min_face_ratio)


def validate(mesh: Mesh, rtol=1e-10):
    """Raise AssertionError if the mesh violates a structural invariant."""
    xmin, ymin, xmax, ymax = mesh.domain
    domain_area = (xmax - xmin) * (ymax - ymin)
    assert abs(mesh.area.sum() - domain_area) <= rtol * domain_area, "area mismatch"
    for f in mesh.faces:
        assert abs(np.hypot(*f.normal) - 1.0) <= 1e-14, "normal not unit"
        assert f.length > 0
        assert (f.kind == INTERIOR) == (not f.is_boundary)
    for i in range(mesh.n_cells):
        per = sum(mesh.faces[fi].length for fi in mesh.cell_to_faces[i])
        pts = mesh.cell_points(i)
        e = np.roll(pts, -1, axis=0) - pts
        true_per = np.hypot(e[:, 0], e[:, 1]).sum()
        assert abs(per - true_per) <= 1e-12 * true_per, "face partition broken"
        tri = mesh.sub_triangles(i)
        d1 = tri[:, 1] - tri[:, 0]
        d2 = tri[:, 2] - tri[:, 0]
        tri_area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]).sum()
        assert abs(tri_area - mesh.area[i]) <= 1e-12 * mesh.area[i], "fan mismatch"
    return True


# -- file format --------------------------------------------------------------


def save_mesh(mesh: Mesh, path):
    """Write the JSON mesh format (vertices, cells, boundary tags)."""
    neumann = [list(f.vertices) for f in mesh.faces if f.kind == NEUMANN]
    doc = {
        "vertices": mesh.vertices.tolist(),
        "cells": [list(c) for c in mesh.cells],
        "boundary": {
            "neumann_rule": mesh.neumann_rule_str,
            "neumann_faces": neumann,
        },
        "nominal_h": mesh.nominal_h,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_mesh(path) -> Mesh:
    with open(path) as fh:
        doc = json.load(fh)
    mesh = Mesh(np.asarray(doc["vertices"]), doc["cells"],
                nominal_h=doc.get("nominal_h"))
    boundary = doc.get("boundary") or {}
    rule_str = boundary.get("neumann_rule")
    explicit = boundary.get("neumann_faces")
    if explicit:
        wanted = {tuple(sorted(e)) for e in explicit}
        kinds = []
        for f in mesh.faces:
            if not f.is_boundary:
                kinds.append(INTERIOR)
            elif tuple(sorted(f.vertices)) in wanted:
                kinds.append(NEUMANN)
            else:
                kinds.append(DIRICHLET)
        mesh = mesh._with_face_kinds(kinds, rule_str)
    elif rule_str:
        mesh = classify_boundary(mesh, boundary_rule(rule_str), rule_str)
    return mesh
