"""Triangle mesh container and structural validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import IndexOutOfRange, ParseError

AREA_FLOOR = 1e-12  # m^2; faces at or below this are degenerate


@dataclass
class TriangleMesh:
    """Vertices and faces of an object model.

    ``vertices`` is (N, 3) float64 in meters; ``faces`` is (F, 3) int32 with
    counter-clockwise winding as stored in the source file.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        self.faces = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int32))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ParseError(f"vertices must be (N, 3), got {self.vertices.shape}")
        if self.faces.size == 0:
            self.faces = self.faces.reshape(0, 3)
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ParseError(f"faces must be (F, 3), got {self.faces.shape}")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise IndexOutOfRange(
                    f"face index out of range (vertex count {len(self.vertices)})"
                )
            same = (
                (self.faces[:, 0] == self.faces[:, 1])
                | (self.faces[:, 1] == self.faces[:, 2])
                | (self.faces[:, 0] == self.faces[:, 2])
            )
            if same.any():
                raise ParseError(f"face {int(np.nonzero(same)[0][0])} repeats a vertex")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit normals per face (right-hand rule over the stored winding)."""
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        n = np.cross(b - a, c - a)
        norms = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.maximum(norms, 1e-300)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def edges_unique(self) -> np.ndarray:
        """Undirected edge list (E, 2), each row sorted, unique."""
        e = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)


@dataclass
class MeshReport:
    """Structural summary produced by :func:`validate_mesh`."""

    n_vertices: int
    n_faces: int
    n_boundary_edges: int
    n_nonmanifold_edges: int
    n_components: int
    min_face_area: float
    obtuse_fraction: float
    degenerate_faces: list = field(default_factory=list)

    @property
    def is_closed(self) -> bool:
        return self.n_boundary_edges == 0 and self.n_nonmanifold_edges == 0

    def to_dict(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "n_faces": self.n_faces,
            "n_boundary_edges": self.n_boundary_edges,
            "n_nonmanifold_edges": self.n_nonmanifold_edges,
            "n_components": self.n_components,
            "min_face_area": self.min_face_area,
            "obtuse_fraction": self.obtuse_fraction,
            "degenerate_faces": list(self.degenerate_faces),
        }


def _component_count(mesh: TriangleMesh) -> int:
    """Connected components of the vertex graph; unreferenced vertices count alone."""
    n = mesh.n_vertices
    if n == 0:
        return 0
    parent = np.arange(n)

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for i, j in mesh.edges_unique():
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(n)})


def validate_mesh(mesh: TriangleMesh) -> MeshReport:
    """Compute a structural report; never mutates or rejects the mesh."""
    areas = mesh.face_areas() if mesh.n_faces else np.zeros(0)
    degenerate = np.nonzero(areas <= AREA_FLOOR)[0].tolist() if mesh.n_faces else []

    if mesh.n_faces:
        e = np.concatenate(
            [mesh.faces[:, [0, 1]], mesh.faces[:, [1, 2]], mesh.faces[:, [2, 0]]]
        )
        e = np.sort(e, axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        boundary = int((counts == 1).sum())
        nonmanifold = int((counts > 2).sum())
    else:
        boundary = nonmanifold = 0

    obtuse = 0.0
    if mesh.n_faces:
        a, b, c = (mesh.vertices[mesh.faces[:, k]] for k in range(3))
        # A triangle is obtuse iff some squared side exceeds the sum of the others.
        l2 = np.stack(
            [
                ((b - c) ** 2).sum(axis=1),
                ((a - c) ** 2).sum(axis=1),
                ((a - b) ** 2).sum(axis=1),
            ],
            axis=1,
        )
        tot = l2.sum(axis=1)
        obtuse = float((2 * l2.max(axis=1) > tot + 1e-18).mean())

    return MeshReport(
        n_vertices=mesh.n_vertices,
        n_faces=mesh.n_faces,
        n_boundary_edges=boundary,
        n_nonmanifold_edges=nonmanifold,
        n_components=_component_count(mesh),
        min_face_area=float(areas.min()) if mesh.n_faces else 0.0,
        obtuse_fraction=obtuse,
        degenerate_faces=degenerate,
    )
