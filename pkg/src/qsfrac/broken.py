"""Piecewise-linear fields that may jump exactly across cracked edges.

A crack set is a subset of the mesh's crackable edges.  Given a crack set,
corner degrees of freedom of the triangles are merged around every vertex
through the uncracked interior edges, which yields the finest partition for
which every representable field is continuous across uncracked edges.  Corner
groups touching an uncracked Dirichlet edge are pinned to the boundary datum.
A vertex where a crack ends mid-fan keeps a single degree of freedom: an
isolated endpoint does not split the field.  Whole Dirichlet edges are either
constrained or, when cracked, released; partial release of an edge is not
representable with linear elements.

Topologies and fields are immutable snapshots; all queries are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .mesh import BoundaryLabel, Mesh, crackable_edges

__all__ = [
    "CrackSet",
    "DofTopology",
    "BrokenField",
    "build_topology",
    "gradient",
    "jump_across_edge",
    "jump_support",
    "trace_on_surface_part",
    "embed_field",
    "default_jump_tol",
]


@dataclass(frozen=True)
class CrackSet:
    """Sorted, deduplicated set of cracked edge ids; equality is set equality."""

    edge_ids: tuple[int, ...] = ()

    @classmethod
    def of(cls, ids: Iterable[int]) -> "CrackSet":
        return cls(tuple(sorted({int(i) for i in ids})))

    @classmethod
    def empty(cls) -> "CrackSet":
        return cls(())

    def union(self, ids: Iterable[int]) -> "CrackSet":
        return CrackSet.of(set(self.edge_ids) | {int(i) for i in ids})

    def issubset(self, other: "CrackSet") -> bool:
        return set(self.edge_ids) <= set(other.edge_ids)

    def as_set(self) -> frozenset:
        return frozenset(self.edge_ids)

    def __contains__(self, edge_id: int) -> bool:
        return int(edge_id) in set(self.edge_ids)

    def __iter__(self):
        return iter(self.edge_ids)

    def __len__(self) -> int:
        return len(self.edge_ids)

    def total_length(self, mesh: Mesh) -> float:
        return float(np.sum(mesh.edge_length[list(self.edge_ids)])) if self.edge_ids else 0.0


class _DSU:
    """Union-find over corner indices with deterministic root selection."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass
class DofTopology:
    """Degree-of-freedom layout of the broken space for one crack set.

    ``corner_dof[t, i]`` is the DOF index of corner ``i`` of triangle ``t``.
    DOF numbering is deterministic (first occurrence scanning triangles in
    index order), so identical inputs always yield identical layouts.
    """

    mesh: Mesh
    crack: CrackSet
    corner_dof: np.ndarray          # (n_triangles, 3) int
    n_dofs: int
    dof_vertex: np.ndarray          # (n_dofs,) vertex id of each DOF
    constrained: np.ndarray         # (n_dofs,) bool
    psi_nodal: np.ndarray           # (n_vertices,) boundary datum used for pinning
    dirichlet_values: np.ndarray    # (n_dofs,) pinned value where constrained, else 0

    _free: np.ndarray = field(init=False, repr=False)
    _cons: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._free = np.flatnonzero(~self.constrained)
        self._cons = np.flatnonzero(self.constrained)

    @property
    def free_dofs(self) -> np.ndarray:
        return self._free

    @property
    def constrained_dofs(self) -> np.ndarray:
        return self._cons

    @property
    def n_free(self) -> int:
        return len(self._free)


def _corner_structure(mesh: Mesh, crack: CrackSet):
    """Merge triangle corners through uncracked interior edges.

    Returns (corner_dof, n_dofs, dof_vertex, constrained_mask); independent of
    the boundary datum, so callers may cache it per crack set.
    """
    tris = mesh.triangles
    m = len(tris)
    dsu = _DSU(3 * m)

    corner_of = {}
    for t in range(m):
        for i in range(3):
            corner_of[(t, int(tris[t, i]))] = 3 * t + i

    cracked = crack.as_set()
    for e in mesh.interior_edges:
        if int(e) in cracked:
            continue
        t1, t2 = mesh.edge_tris[e]
        a, b = mesh.edges[e]
        dsu.union(corner_of[(t1, int(a))], corner_of[(t2, int(a))])
        dsu.union(corner_of[(t1, int(b))], corner_of[(t2, int(b))])

    roots = np.fromiter((dsu.find(c) for c in range(3 * m)), dtype=int, count=3 * m)
    dof_of_root: dict[int, int] = {}
    corner_dof = np.empty(3 * m, dtype=int)
    dof_vertex = []
    for c in range(3 * m):
        r = int(roots[c])
        if r not in dof_of_root:
            dof_of_root[r] = len(dof_vertex)
            dof_vertex.append(int(tris[c // 3, c % 3]))
        corner_dof[c] = dof_of_root[r]
    corner_dof = corner_dof.reshape(m, 3)
    n_dofs = len(dof_vertex)

    constrained = np.zeros(n_dofs, dtype=bool)
    for e in mesh.dirichlet_edges:
        if int(e) in cracked:
            continue
        t = int(mesh.edge_tris[e, 0])
        for v in mesh.edges[e]:
            constrained[corner_dof[t, _local_corner(tris, t, int(v))]] = True

    return corner_dof, n_dofs, np.asarray(dof_vertex), constrained


def _local_corner(tris: np.ndarray, t: int, v: int) -> int:
    row = tris[t]
    for i in range(3):
        if row[i] == v:
            return i
    raise ValueError(f"vertex {v} not a corner of triangle {t}")


def _nodal_array(mesh: Mesh, psi) -> np.ndarray:
    if psi is None:
        return np.zeros(mesh.n_vertices)
    if callable(psi):
        return np.asarray(psi(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float)
    arr = np.asarray(psi, dtype=float)
    if arr.ndim == 0:
        return np.full(mesh.n_vertices, float(arr))
    if arr.shape != (mesh.n_vertices,):
        raise ValueError(f"boundary datum has shape {arr.shape}, expected ({mesh.n_vertices},)")
    return arr


def build_topology(mesh: Mesh, crack: CrackSet, psi=None, _structure=None) -> DofTopology:
    """Build the DOF layout for ``crack`` with boundary datum ``psi``.

    ``psi`` may be a nodal array, a callable of (x, y), a scalar, or None
    (zero datum).  Raises if the crack set leaves the crackable edge set.
    """
    allowed = set(crackable_edges(mesh).tolist())
    extra = set(crack.edge_ids) - allowed
    if extra:
        raise ValueError(f"crack contains non-crackable edges {sorted(extra)}")

    psi_nodal = _nodal_array(mesh, psi)
    if _structure is None:
        _structure = _corner_structure(mesh, crack)
    corner_dof, n_dofs, dof_vertex, constrained = _structure
    values = np.where(constrained, psi_nodal[dof_vertex], 0.0)
    return DofTopology(
        mesh=mesh,
        crack=crack,
        corner_dof=corner_dof,
        n_dofs=n_dofs,
        dof_vertex=dof_vertex,
        constrained=constrained,
        psi_nodal=psi_nodal,
        dirichlet_values=values,
    )


@dataclass
class BrokenField:
    """Scalar field over a ``DofTopology``: one value per degree of freedom."""

    topology: DofTopology
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.topology.n_dofs,):
            raise ValueError("DOF value array does not match topology")

    @classmethod
    def zeros(cls, topology: DofTopology) -> "BrokenField":
        # free DOFs at zero, pinned DOFs at their boundary values
        return cls(topology, topology.dirichlet_values.copy())

    @classmethod
    def from_nodal(cls, topology: DofTopology, nodal) -> "BrokenField":
        arr = _nodal_array(topology.mesh, nodal)
        return cls(topology, arr[topology.dof_vertex])

    def with_values(self, values: np.ndarray) -> "BrokenField":
        return BrokenField(self.topology, np.asarray(values, dtype=float))

    def corner_values(self) -> np.ndarray:
        return self.values[self.topology.corner_dof]

    def tri_means(self) -> np.ndarray:
        return self.corner_values().mean(axis=1)

    def gradients(self) -> np.ndarray:
        cv = self.corner_values()
        return np.einsum("tki,ti->tk", self.topology.mesh.grad_op, cv)


def gradient(u: BrokenField) -> np.ndarray:
    """Per-triangle constant gradient vectors of the broken field."""
    return u.gradients()


def jump_across_edge(u: BrokenField, edge_id: int, psi_nodal=None) -> tuple[float, float]:
    """Jump of ``u`` across one edge at its two endpoints (sorted vertex order).

    Interior edges: trace from the higher-index adjacent triangle minus the
    trace from the lower-index one (the direction of the edge normal).
    Dirichlet edges: single-sided trace minus the boundary datum.  Uncracked
    interior edges return exactly (0, 0) because the corners share DOFs.
    """
    mesh = u.topology.mesh
    if not 0 <= edge_id < mesh.n_edges:
        raise ValueError(f"unknown edge id {edge_id}")
    t1, t2 = mesh.edge_tris[edge_id]
    a, b = (int(v) for v in mesh.edges[edge_id])
    tris = mesh.triangles
    cd = u.topology.corner_dof
    if t2 >= 0:
        ja = u.values[cd[t2, _local_corner(tris, t2, a)]] - u.values[cd[t1, _local_corner(tris, t1, a)]]
        jb = u.values[cd[t2, _local_corner(tris, t2, b)]] - u.values[cd[t1, _local_corner(tris, t1, b)]]
        return float(ja), float(jb)
    if mesh.boundary_label[edge_id] != BoundaryLabel.DIRICHLET:
        raise ValueError(f"edge {edge_id} is not interior and not Dirichlet; jump undefined")
    psi = u.topology.psi_nodal if psi_nodal is None else _nodal_array(mesh, psi_nodal)
    ja = u.values[cd[t1, _local_corner(tris, t1, a)]] - psi[a]
    jb = u.values[cd[t1, _local_corner(tris, t1, b)]] - psi[b]
    return float(ja), float(jb)


def default_jump_tol(psi_nodal: np.ndarray) -> float:
    """Separates exact-zero shared-DOF jumps from genuine opening."""
    scale = float(np.max(np.abs(psi_nodal))) if len(psi_nodal) else 0.0
    return 1e-9 * (1.0 + scale)


def jump_support(u: BrokenField, psi_nodal=None, tol: float | None = None) -> CrackSet:
    """Edges where the field actually jumps (or departs from the Dirichlet
    datum on released boundary edges) by more than ``tol``.

    Only cracked edges can carry a nonzero jump, so the support is always a
    subset of the field's crack set.
    """
    mesh = u.topology.mesh
    psi = u.topology.psi_nodal if psi_nodal is None else _nodal_array(mesh, psi_nodal)
    if tol is None:
        tol = default_jump_tol(psi)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    open_edges = []
    for e in u.topology.crack:
        ja, jb = jump_across_edge(u, e, psi)
        if max(abs(ja), abs(jb)) > tol:
            open_edges.append(e)
    return CrackSet.of(open_edges)


def trace_on_surface_part(u: BrokenField) -> np.ndarray:
    """Midpoint trace values on the surface-force edges (single-sided).

    Surface-force edges are never crackable, so the trace is unambiguous.
    Ordered like ``mesh.surface_edges``.
    """
    mesh = u.topology.mesh
    cd = u.topology.corner_dof
    tris = mesh.triangles
    out = np.empty(len(mesh.surface_edges))
    for k, e in enumerate(mesh.surface_edges):
        t = int(mesh.edge_tris[e, 0])
        a, b = (int(v) for v in mesh.edges[e])
        out[k] = 0.5 * (
            u.values[cd[t, _local_corner(tris, t, a)]]
            + u.values[cd[t, _local_corner(tris, t, b)]]
        )
    return out


def embed_field(u: BrokenField, target: DofTopology) -> BrokenField:
    """Re-express ``u`` on the topology of a larger crack set.

    Valid whenever the target crack contains the source crack: the target DOF
    partition then refines the source partition, so values, gradients and
    jumps are all preserved.
    """
    if not u.topology.crack.issubset(target.crack):
        raise ValueError("target topology must crack a superset of the source edges")
    if target.mesh is not u.topology.mesh:
        raise ValueError("topologies live on different meshes")
    src = u.values[u.topology.corner_dof].ravel()
    values = np.zeros(target.n_dofs)
    values[target.corner_dof.ravel()] = src  # consistent: partition refinement
    return BrokenField(target, values)
