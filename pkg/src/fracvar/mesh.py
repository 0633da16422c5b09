"""Triangulations of the unit square, newest-vertex bisection, graded
interval meshes and the tensor-product prism mesh of the cylinder.

Triangle storage convention: counterclockwise vertex triples with a
per-triangle refinement edge given as a local index r in {0,1,2}; the
refinement edge is the edge opposite local vertex r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray  # (nv, 2) float64
    triangles: np.ndarray  # (nt, 3) int, counterclockwise
    refinement_edge: np.ndarray  # (nt,) int in {0,1,2}
    parent: np.ndarray  # (nt,) int, -1 for no parent

    def __post_init__(self):
        for name in ("vertices", "triangles", "refinement_edge", "parent"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angles.append(np.arccos(np.clip(cosang, -1, 1)))
        return float(np.min(angles))


def _edge(tri: np.ndarray, local: int) -> tuple[int, int]:
    """Sorted vertex pair of the edge opposite local vertex `local`."""
    a = int(tri[(local + 1) % 3])
    b = int(tri[(local + 2) % 3])
    return (a, b) if a < b else (b, a)


def edge_to_triangles(mesh: TriMesh) -> dict[tuple[int, int], list[int]]:
    emap: dict[tuple[int, int], list[int]] = {}
    for t in range(mesh.num_triangles):
        for k in range(3):
            emap.setdefault(_edge(mesh.triangles[t], k), []).append(t)
    return emap


def check_conforming(mesh: TriMesh) -> bool:
    """Positive CCW areas, interior edges shared by exactly two triangles
    (an edge seen once must lie on the boundary of the unit square), and
    total area 1. A hanging node leaves an interior edge seen only once."""
    areas = mesh.areas()
    if not np.all(areas > 0):
        return False
    if abs(float(areas.sum()) - 1.0) > 1e-12:
        return False
    emap = edge_to_triangles(mesh)
    verts = mesh.vertices
    for (a, b), ts in emap.items():
        if len(ts) > 2:
            return False
        if len(ts) == 1:
            va, vb = verts[a], verts[b]
            on_boundary = any(
                va[ax] == vb[ax] and va[ax] in (0.0, 1.0) for ax in (0, 1)
            )
            if not on_boundary:
                return False
    return True


def uniform_tri_mesh(m: int) -> TriMesh:
    """Uniform lattice of (0,1)^2 with 2*m^2 right triangles; the
    hypotenuse is the refinement edge."""
    if m < 1:
        raise ValueError("m must be >= 1")
    xs = np.linspace(0.0, 1.0, m + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])
    tris = []
    refs = []
    for iy in range(m):
        for ix in range(m):
            a = iy * (m + 1) + ix
            b = a + 1
            c = b + (m + 1)
            d = a + (m + 1)
            tris.append((a, b, c))  # hypotenuse a-c opposite b
            refs.append(1)
            tris.append((a, c, d))  # hypotenuse a-c opposite d
            refs.append(2)
    nt = len(tris)
    return TriMesh(
        vertices=vertices,
        triangles=np.array(tris, dtype=np.intp),
        refinement_edge=np.array(refs, dtype=np.intp),
        parent=np.full(nt, -1, dtype=np.intp),
    )


def bisect(mesh: TriMesh, marked) -> TriMesh:
    """Newest-vertex bisection of the marked triangles with recursive
    compatibility closure (no hanging nodes in the result)."""
    marked = set(int(t) for t in marked)
    if not marked:
        return TriMesh(
            vertices=mesh.vertices,
            triangles=mesh.triangles,
            refinement_edge=mesh.refinement_edge,
            parent=np.arange(mesh.num_triangles, dtype=np.intp),
        )
    if marked - set(range(mesh.num_triangles)):
        raise ValueError("marked contains out-of-range triangle indices")

    tris = mesh.triangles
    refs = mesh.refinement_edge

    # closure: an element with any marked edge must have its own
    # refinement edge marked as well
    marked_edges = {_edge(tris[t], int(refs[t])) for t in marked}
    changed = True
    while changed:
        changed = False
        for t in range(mesh.num_triangles):
            re = _edge(tris[t], int(refs[t]))
            if re in marked_edges:
                continue
            if any(_edge(tris[t], k) in marked_edges for k in range(3)):
                marked_edges.add(re)
                changed = True

    vertices = [tuple(v) for v in mesh.vertices]
    midpoint: dict[tuple[int, int], int] = {}
    for e in sorted(marked_edges):
        mid = 0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]])
        midpoint[e] = len(vertices)
        vertices.append((float(mid[0]), float(mid[1])))

    out_tris: list[tuple[int, int, int]] = []
    out_refs: list[int] = []
    out_parent: list[int] = []

    def emit(verts: tuple[int, int, int], ref: int, parent: int):
        e = _edge(np.asarray(verts), ref)
        if e in marked_edges:
            r = ref
            p = verts[r]
            a = verts[(r + 1) % 3]
            b = verts[(r + 2) % 3]
            mid = midpoint[e]
            # new vertex mid becomes the peak of both children
            emit((p, a, mid), 2, parent)
            emit((p, mid, b), 1, parent)
        else:
            out_tris.append(verts)
            out_refs.append(ref)
            out_parent.append(parent)

    for t in range(mesh.num_triangles):
        emit(tuple(int(v) for v in tris[t]), int(refs[t]), t)

    return TriMesh(
        vertices=np.array(vertices, dtype=np.float64),
        triangles=np.array(out_tris, dtype=np.intp),
        refinement_edge=np.array(out_refs, dtype=np.intp),
        parent=np.array(out_parent, dtype=np.intp),
    )


@dataclass(frozen=True)
class GradedIntervalMesh:
    nodes: np.ndarray  # y_0 .. y_K increasing
    tau: float
    gamma: float

    def __post_init__(self):
        arr = np.asarray(self.nodes, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "nodes", arr)

    @property
    def num_intervals(self) -> int:
        return len(self.nodes) - 1


def graded_interval_mesh(K: int, gamma: float, tau: float) -> GradedIntervalMesh:
    """Nodes y_k = tau * (k/K)^gamma, concentrating resolution at y=0."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    if tau <= 0:
        raise ValueError("tau must be positive")
    k = np.arange(K + 1, dtype=np.float64)
    return GradedIntervalMesh(nodes=tau * (k / K) ** gamma, tau=tau, gamma=gamma)


@dataclass(frozen=True)
class PrismMesh:
    """Tensor product of a surface triangulation and a graded interval mesh.

    Dof (vertex i, layer k) maps to k*Nv + i, so the y=0 trace dofs are
    exactly 0 .. Nv-1.
    """

    tri: TriMesh
    interval: GradedIntervalMesh

    @property
    def num_layers(self) -> int:
        return self.interval.num_intervals

    @property
    def num_dofs(self) -> int:
        return (self.num_layers + 1) * self.tri.num_vertices


def cylinder_dof(prism: PrismMesh, vertex: int, layer: int) -> int:
    nv = prism.tri.num_vertices
    if not 0 <= vertex < nv:
        raise ValueError(f"vertex index {vertex} out of range [0, {nv})")
    if not 0 <= layer <= prism.num_layers:
        raise ValueError(f"layer index {layer} out of range [0, {prism.num_layers}]")
    return layer * nv + vertex


def write_vtk(mesh: TriMesh, path, cell_data: dict | None = None,
              point_data: dict | None = None) -> None:
    """Legacy ASCII VTK unstructured grid with optional scalar fields."""
    lines = [
        "# vtk DataFile Version 3.0",
        "fracvar mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.17g} {v[1]:.17g} 0")
    nt = mesh.num_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    for t in mesh.triangles:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    if cell_data:
        lines.append(f"CELL_DATA {nt}")
        for name, values in cell_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.17g}" for v in np.asarray(values))
    if point_data:
        lines.append(f"POINT_DATA {mesh.num_vertices}")
        for name, values in point_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.17g}" for v in np.asarray(values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
