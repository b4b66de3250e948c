"""Structured triangle meshes with boundary-part labels and a brittle edge set.

The mesh is the fixed reference configuration of the crack model: a rectangle
triangulated into positively oriented triangles.  Every edge is classified as
interior (two adjacent triangles) or boundary (one), boundary edges carry
exactly one of the labels DIRICHLET / NEUMANN / SURFACE_FORCE, and a per-edge
``brittle`` flag marks the region where cracks are allowed to live.  Surface
forces and the brittle region must not meet, so cracked edges never interfere
with the traction data.

Meshes are immutable after construction; all queries are pure functions and
safe to share across threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

__all__ = [
    "BoundaryLabel",
    "EdgeGeometry",
    "Mesh",
    "MeshError",
    "build_structured_mesh",
    "crackable_edges",
    "edge_geometry",
    "mesh_fingerprint",
]

_SIDES = ("left", "right", "bottom", "top")
_GEOM_TOL = 1e-12


class MeshError(ValueError):
    """Raised when mesh construction or validation fails."""


class BoundaryLabel(IntEnum):
    """Edge classification; INTERIOR is used for non-boundary edges."""

    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2
    SURFACE_FORCE = 3


@dataclass(frozen=True)
class EdgeGeometry:
    """Geometric data of a single edge.

    The unit normal of an interior edge points from the lower-index adjacent
    triangle toward the higher-index one; on boundary edges it points outward.
    """

    edge_id: int
    length: float
    unit_normal: np.ndarray
    midpoint: np.ndarray


@dataclass
class Mesh:
    """Immutable triangulated rectangle with labeled boundary decomposition.

    Attributes
    ----------
    vertices : (n_vertices, 2) float array of positions.
    triangles : (n_triangles, 3) int array, positively oriented vertex triples.
    edges : (n_edges, 2) int array of vertex pairs, each row sorted, rows in
        lexicographic order (this fixes the edge ids).
    edge_tris : (n_edges, 2) int array of adjacent triangle ids in increasing
        order; the second entry is -1 for boundary edges.
    boundary_label : (n_edges,) int array of ``BoundaryLabel`` codes.
    brittle : (n_edges,) bool array, True where the edge lies in the brittle
        region.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tris: np.ndarray
    boundary_label: np.ndarray
    brittle: np.ndarray

    # derived geometry, filled in __post_init__
    tri_area: np.ndarray = field(init=False, repr=False)
    tri_centroid: np.ndarray = field(init=False, repr=False)
    grad_op: np.ndarray = field(init=False, repr=False)
    edge_length: np.ndarray = field(init=False, repr=False)
    edge_midpoint: np.ndarray = field(init=False, repr=False)
    edge_normal: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.edges = np.asarray(self.edges, dtype=int)
        self.edge_tris = np.asarray(self.edge_tris, dtype=int)
        self.boundary_label = np.asarray(self.boundary_label, dtype=int)
        self.brittle = np.asarray(self.brittle, dtype=bool)

        p = self.vertices[self.triangles]  # (m, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        self.tri_area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        self.tri_centroid = p.mean(axis=1)
        if np.any(self.tri_area <= 0):
            bad = np.flatnonzero(self.tri_area <= 0)
            raise MeshError(f"non-positive triangle areas at {bad.tolist()}")

        # P1 shape-function gradients: grad u|_T = grad_op[T] @ corner values
        m = len(self.triangles)
        g = np.empty((m, 2, 3))
        for i in range(3):
            e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            g[:, 0, i] = -e[:, 1]
            g[:, 1, i] = e[:, 0]
        g /= (2.0 * self.tri_area)[:, None, None]
        self.grad_op = g

        ep = self.vertices[self.edges]  # (E, 2, 2)
        tangent = ep[:, 1] - ep[:, 0]
        self.edge_length = np.hypot(tangent[:, 0], tangent[:, 1])
        self.edge_midpoint = ep.mean(axis=1)

        normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        normal /= self.edge_length[:, None]
        # orient: interior edges low->high adjacent triangle, boundary outward
        ref_tri = np.where(self.edge_tris[:, 1] >= 0, self.edge_tris[:, 1], self.edge_tris[:, 0])
        toward = self.tri_centroid[ref_tri] - self.edge_midpoint
        sign = np.sign(np.einsum("ij,ij->i", toward, normal))
        sign = np.where(self.edge_tris[:, 1] >= 0, sign, -sign)
        self.edge_normal = normal * sign[:, None]

        for arr in (self.vertices, self.triangles, self.edges, self.edge_tris,
                    self.boundary_label, self.brittle, self.tri_area,
                    self.tri_centroid, self.grad_op, self.edge_length,
                    self.edge_midpoint, self.edge_normal):
            arr.setflags(write=False)

    # -- queries -----------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tris[:, 1] >= 0)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tris[:, 1] < 0)

    def edges_with_label(self, label: BoundaryLabel) -> np.ndarray:
        return np.flatnonzero(self.boundary_label == int(label))

    @property
    def dirichlet_edges(self) -> np.ndarray:
        return self.edges_with_label(BoundaryLabel.DIRICHLET)

    @property
    def surface_edges(self) -> np.ndarray:
        return self.edges_with_label(BoundaryLabel.SURFACE_FORCE)

    def validate(self) -> None:
        """Check all structural invariants; raise ``MeshError`` on failure."""
        if np.any(self.tri_area <= 0):
            bad = np.flatnonzero(self.tri_area <= 0)
            raise MeshError(f"non-positive triangle areas at {bad.tolist()}")
        if np.any(self.edge_length <= 0):
            raise MeshError("edge of zero length")

        counts = np.where(self.edge_tris[:, 1] >= 0, 2, 1)
        # every triangle side must appear exactly once in the edge table
        side_count = np.zeros(self.n_edges, dtype=int)
        lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}
        for t, tri in enumerate(self.triangles):
            for i in range(3):
                a, b = sorted((int(tri[i]), int(tri[(i + 1) % 3])))
                eid = lookup.get((a, b))
                if eid is None:
                    raise MeshError(f"triangle {t} has side ({a},{b}) missing from edge table")
                side_count[eid] += 1
        if np.any(side_count != counts):
            raise MeshError("edge/triangle adjacency counts are inconsistent")

        interior = self.edge_tris[:, 1] >= 0
        lbl = self.boundary_label
        if np.any(lbl[interior] != BoundaryLabel.INTERIOR):
            raise MeshError("interior edge carries a boundary label")
        if np.any(lbl[~interior] == BoundaryLabel.INTERIOR):
            raise MeshError("boundary edge without a label")

        clash = self.brittle & (lbl == BoundaryLabel.SURFACE_FORCE)
        if np.any(clash):
            raise MeshError(
                "brittle region meets the surface-force boundary at edges "
                f"{np.flatnonzero(clash).tolist()}"
            )

        norms = np.hypot(self.edge_normal[:, 0], self.edge_normal[:, 1])
        if np.any(np.abs(norms - 1.0) > _GEOM_TOL):
            raise MeshError("edge normal not unit length")

        for e in self.interior_edges:
            t1, t2 = self.edge_tris[e]
            shared = set(self.triangles[t1]) & set(self.triangles[t2])
            if shared != set(self.edges[e]):
                raise MeshError(f"triangles adjacent to edge {e} do not share exactly its endpoints")


def _resolve_sides(value) -> tuple[str, ...]:
    if value is None:
        return ()
    if value == "all":
        return _SIDES
    if isinstance(value, str):
        value = [s.strip() for s in value.split(",") if s.strip()]
    sides = tuple(value)
    for s in sides:
        if s not in _SIDES:
            raise MeshError(f"unknown boundary side {s!r}; expected one of {_SIDES}")
    return sides


def _edge_side(mesh_pts: np.ndarray, width: float, height: float) -> dict[str, np.ndarray]:
    """Classify boundary edges by the rectangle side both endpoints lie on."""
    x, y = mesh_pts[..., 0], mesh_pts[..., 1]
    tol = _GEOM_TOL * (1.0 + max(width, height))
    return {
        "left": np.all(np.abs(x) <= tol, axis=1),
        "right": np.all(np.abs(x - width) <= tol, axis=1),
        "bottom": np.all(np.abs(y) <= tol, axis=1),
        "top": np.all(np.abs(y - height) <= tol, axis=1),
    }


def build_structured_mesh(
    nx: int,
    ny: int,
    width: float,
    height: float,
    labeling: dict | None = None,
    brittle="all",
    diagonal: str = "main",
) -> Mesh:
    """Triangulate the rectangle [0,width]x[0,height] on an nx-by-ny cell grid.

    Parameters
    ----------
    labeling : dict with optional keys ``dirichlet`` and ``surface``, each a
        side list (subset of left/right/bottom/top) or ``"all"``.  Sides not
        listed under either key are labeled NEUMANN.  Default: all Dirichlet.
    brittle : ``"all"``, ``"none"``, ``("rect", (x0, y0, x1, y1))`` tagging
        edges with both endpoints inside the closed rectangle, or
        ``("edges", ids)``.
    diagonal : ``"main"`` (one diagonal per cell, lower-left to upper-right)
        or ``"crossed"`` (four triangles per cell around a center vertex).
    """
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    if width <= 0 or height <= 0:
        raise MeshError("width and height must be positive")
    if diagonal not in ("main", "crossed"):
        raise MeshError(f"unknown diagonal rule {diagonal!r}")

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    if diagonal == "main":
        for j in range(ny):
            for i in range(nx):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
    else:
        centers = []
        base = len(verts)
        for j in range(ny):
            for i in range(nx):
                centers.append([(xs[i] + xs[i + 1]) / 2.0, (ys[j] + ys[j + 1]) / 2.0])
                c = base + j * nx + i
                v00, v10 = vid(i, j), vid(i + 1, j)
                v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
                tris.append((v00, v10, c))
                tris.append((v10, v11, c))
                tris.append((v11, v01, c))
                tris.append((v01, v00, c))
        verts = np.vstack([verts, np.asarray(centers)])

    triangles = np.asarray(tris, dtype=int)

    raw = np.sort(
        np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]),
        axis=1,
    )
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    edge_tris = np.full((len(edges), 2), -1, dtype=int)
    for side_idx, eid in enumerate(inverse):
        t = side_idx % len(triangles)
        if edge_tris[eid, 0] < 0:
            edge_tris[eid, 0] = t
        elif edge_tris[eid, 1] < 0:
            a, b = sorted((edge_tris[eid, 0], t))
            edge_tris[eid, 0], edge_tris[eid, 1] = a, b
        else:
            raise MeshError(f"edge {eid} adjacent to more than two triangles")

    labeling = dict(labeling or {"dirichlet": "all"})
    unknown = set(labeling) - {"dirichlet", "surface"}
    if unknown:
        raise MeshError(f"unknown labeling keys {sorted(unknown)}")
    dir_sides = _resolve_sides(labeling.get("dirichlet"))
    surf_sides = _resolve_sides(labeling.get("surface"))
    overlap = set(dir_sides) & set(surf_sides)
    if overlap:
        raise MeshError(f"sides {sorted(overlap)} listed both as dirichlet and surface")

    boundary = edge_tris[:, 1] < 0
    side_of = _edge_side(verts[edges], width, height)
    label = np.full(len(edges), int(BoundaryLabel.INTERIOR))
    label[boundary] = int(BoundaryLabel.NEUMANN)
    for s in dir_sides:
        label[boundary & side_of[s]] = int(BoundaryLabel.DIRICHLET)
    for s in surf_sides:
        label[boundary & side_of[s]] = int(BoundaryLabel.SURFACE_FORCE)

    brittle_mask = _resolve_brittle(brittle, verts, edges)

    mesh = Mesh(
        vertices=verts,
        triangles=triangles,
        edges=edges,
        edge_tris=edge_tris,
        boundary_label=label,
        brittle=brittle_mask,
    )
    mesh.validate()
    return mesh


def _resolve_brittle(spec, verts: np.ndarray, edges: np.ndarray) -> np.ndarray:
    n = len(edges)
    if isinstance(spec, str):
        if spec == "all":
            return np.ones(n, dtype=bool)
        if spec == "none":
            return np.zeros(n, dtype=bool)
        raise MeshError(f"unknown brittle spec {spec!r}")
    kind, payload = spec
    if kind == "rect":
        x0, y0, x1, y1 = payload
        tol = _GEOM_TOL
        p = verts[edges]  # (E, 2, 2)
        inside = (
            (p[..., 0] >= x0 - tol) & (p[..., 0] <= x1 + tol)
            & (p[..., 1] >= y0 - tol) & (p[..., 1] <= y1 + tol)
        )
        return np.all(inside, axis=1)
    if kind == "edges":
        mask = np.zeros(n, dtype=bool)
        ids = np.asarray(list(payload), dtype=int)
        if np.any((ids < 0) | (ids >= n)):
            raise MeshError(f"brittle edge ids out of range: {ids.tolist()}")
        mask[ids] = True
        return mask
    raise MeshError(f"unknown brittle spec kind {kind!r}")


def crackable_edges(mesh: Mesh) -> np.ndarray:
    """Edges where a crack may open: brittle interior or brittle Dirichlet edges.

    Neumann and surface-force boundary edges are excluded: a crack inside the
    traction-free boundary would change no energy term and would only create
    spurious tied minimizers.
    """
    lbl = mesh.boundary_label
    eligible = (lbl == BoundaryLabel.INTERIOR) | (lbl == BoundaryLabel.DIRICHLET)
    return np.flatnonzero(mesh.brittle & eligible)


def edge_geometry(mesh: Mesh, edge_id: int) -> EdgeGeometry:
    """Length, oriented unit normal and midpoint of one edge."""
    if not 0 <= edge_id < mesh.n_edges:
        raise MeshError(f"unknown edge id {edge_id}")
    return EdgeGeometry(
        edge_id=int(edge_id),
        length=float(mesh.edge_length[edge_id]),
        unit_normal=mesh.edge_normal[edge_id].copy(),
        midpoint=mesh.edge_midpoint[edge_id].copy(),
    )


def mesh_fingerprint(mesh: Mesh) -> str:
    """Deterministic hex digest of the full mesh content."""
    h = hashlib.sha256()
    for arr in (mesh.vertices, mesh.triangles, mesh.edges,
                mesh.boundary_label, mesh.brittle.astype(np.uint8)):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()
