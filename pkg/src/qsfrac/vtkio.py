"""Legacy-VTK ASCII writers for meshes and broken fields.

The mesh dump contains the triangles and all edges as separate cells, with
cell data carrying the boundary labels and the brittle tag, so external
viewers can color the boundary decomposition.  Broken fields are written
with duplicated corner points (three points per triangle) because the data
is discontinuous across cracked edges; continuous regions simply repeat the
shared values.
"""

from __future__ import annotations

from .broken import BrokenField
from .mesh import Mesh

__all__ = ["write_mesh_vtk", "write_field_vtk"]

_HEADER = "# vtk DataFile Version 2.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n"


def write_mesh_vtk(mesh: Mesh, path, title: str = "qsfrac mesh") -> None:
    n_tri = mesh.n_triangles
    n_edge = mesh.n_edges
    with open(path, "w") as fh:
        fh.write(_HEADER.format(title=title))
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        size = 4 * n_tri + 3 * n_edge
        fh.write(f"CELLS {n_tri + n_edge} {size}\n")
        for tri in mesh.triangles:
            fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
        for a, b in mesh.edges:
            fh.write(f"2 {a} {b}\n")
        fh.write(f"CELL_TYPES {n_tri + n_edge}\n")
        fh.write("5\n" * n_tri)
        fh.write("3\n" * n_edge)
        fh.write(f"CELL_DATA {n_tri + n_edge}\n")
        fh.write("SCALARS boundary_label int 1\nLOOKUP_TABLE default\n")
        fh.write("-1\n" * n_tri)
        for lbl in mesh.boundary_label:
            fh.write(f"{int(lbl)}\n")
        fh.write("SCALARS brittle int 1\nLOOKUP_TABLE default\n")
        fh.write("0\n" * n_tri)
        for b in mesh.brittle:
            fh.write(f"{int(b)}\n")


def write_field_vtk(field: BrokenField, path, name: str = "u",
                    title: str = "qsfrac field") -> None:
    mesh = field.topology.mesh
    corners = field.corner_values()
    pts = mesh.vertices[mesh.triangles]  # (m, 3, 2)
    m = mesh.n_triangles
    with open(path, "w") as fh:
        fh.write(_HEADER.format(title=title))
        fh.write(f"POINTS {3 * m} double\n")
        for t in range(m):
            for i in range(3):
                fh.write(f"{pts[t, i, 0]:.17g} {pts[t, i, 1]:.17g} 0\n")
        fh.write(f"CELLS {m} {4 * m}\n")
        for t in range(m):
            fh.write(f"3 {3 * t} {3 * t + 1} {3 * t + 2}\n")
        fh.write(f"CELL_TYPES {m}\n")
        fh.write("5\n" * m)
        fh.write(f"POINT_DATA {3 * m}\n")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for t in range(m):
            for i in range(3):
                fh.write(f"{corners[t, i]:.17g}\n")
