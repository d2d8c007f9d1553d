"""Discrete Laplacian and connectivity diagonal for triangle meshes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DegenerateFace, EmptyMesh
from .core import AREA_FLOOR, TriangleMesh


@dataclass
class LaplacianPair:
    """Sparse symmetric PSD Laplacian ``L`` with the diagonal connectivity ``C``.

    ``L = C_deg - A`` where ``A`` holds the symmetric edge weights and
    ``C_deg`` their row sums. ``c_diag`` is the diagonal actually used as the
    constraint metric in the eigenproblem: the degree by default, or the
    barycentric lumped vertex mass when requested.
    """

    L: sp.csr_matrix
    c_diag: np.ndarray
    weighting: str
    mass: str = "degree"
    clamped_fallback: bool = False

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def c_matrix(self) -> sp.csr_matrix:
        return sp.diags(self.c_diag, format="csr")


def _face_cotangents(mesh: TriangleMesh) -> np.ndarray:
    """(F, 3) cotangent of the interior angle at each face corner."""
    v = mesh.vertices
    f = mesh.faces
    cots = np.empty((len(f), 3))
    for k in range(3):
        p = v[f[:, k]]
        q = v[f[:, (k + 1) % 3]]
        r = v[f[:, (k + 2) % 3]]
        u, w = q - p, r - p
        cross = np.linalg.norm(np.cross(u, w), axis=1)
        cots[:, k] = (u * w).sum(axis=1) / np.maximum(cross, 1e-300)
    return cots


def _assemble(mesh: TriangleMesh, half_cots: np.ndarray) -> sp.csr_matrix:
    """Symmetric weight matrix from per-corner half-cotangent contributions.

    The corner at local index k contributes to the opposite edge (k+1, k+2).
    Coordinate triplets are summed on conversion to CSR, which both merges the
    two faces of an interior edge and canonicalizes storage.
    """
    f = mesh.faces
    rows, cols, vals = [], [], []
    for k in range(3):
        i = f[:, (k + 1) % 3]
        j = f[:, (k + 2) % 3]
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([half_cots[:, k], half_cots[:, k]])
    n = mesh.n_vertices
    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return a.tocsr()


def _uniform_adjacency(mesh: TriangleMesh) -> sp.csr_matrix:
    e = mesh.edges_unique()
    n = mesh.n_vertices
    data = np.ones(2 * len(e))
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def barycentric_masses(mesh: TriangleMesh) -> np.ndarray:
    """Per-vertex lumped mass: one third of the incident face areas."""
    areas = mesh.face_areas()
    m = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(m, mesh.faces[:, k], areas / 3.0)
    return m


def build_laplacian(mesh: TriangleMesh, weighting: str = "cotangent",
                    mass: str = "degree") -> LaplacianPair:
    """Build ``L = C - A`` with cotangent or uniform edge weights.

    Cotangent weights are ``(cot a + cot b) / 2`` over the one or two angles
    opposite each edge; negative weights from obtuse triangles are kept unless
    they drive some degree ``C_ii`` to zero or below, in which case the build
    retries with negative weights clamped to zero and flags the fallback.
    """
    if weighting not in ("cotangent", "uniform"):
        raise ValueError(f"unknown weighting {weighting!r}")
    if mass not in ("degree", "barycentric"):
        raise ValueError(f"unknown mass mode {mass!r}")
    if mesh.n_faces == 0:
        raise EmptyMesh("mesh has no faces")
    areas = mesh.face_areas()
    bad = np.nonzero(areas <= AREA_FLOOR)[0]
    if bad.size:
        raise DegenerateFace(f"face {int(bad[0])} has area {areas[bad[0]]:.3e} m^2")

    clamped = False
    if weighting == "uniform":
        a = _uniform_adjacency(mesh)
    else:
        half = 0.5 * _face_cotangents(mesh)
        a = _assemble(mesh, half)
        degrees = np.asarray(a.sum(axis=1)).ravel()
        if (degrees <= 0).any():
            a = _assemble(mesh, np.maximum(half, 0.0))
            clamped = True

    degrees = np.asarray(a.sum(axis=1)).ravel()
    lap = (sp.diags(degrees) - a).tocsr()
    lap = ((lap + lap.T) * 0.5).tocsr()  # enforce exact stored symmetry

    c = degrees if mass == "degree" else barycentric_masses(mesh)
    return LaplacianPair(L=lap, c_diag=np.asarray(c, dtype=np.float64),
                         weighting=weighting, mass=mass,
                         clamped_fallback=clamped)
