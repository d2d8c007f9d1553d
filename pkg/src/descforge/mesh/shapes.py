"""Closed-mesh generators used as test fixtures and CLI shapes.

All generators produce counter-clockwise (outward) winding and closed,
manifold surfaces. The torus vertex order is ``i * m + j`` for azimuth step i
and tube step j, so the rotation by one azimuth step is the exact index
permutation ``(i, j) -> (i + 1 mod n, j)``.
"""

from __future__ import annotations

import numpy as np

from .core import TriangleMesh


def _grid_quads(i0: np.ndarray, i1: np.ndarray, j0: np.ndarray, j1: np.ndarray,
                index) -> np.ndarray:
    """Two triangles per (i, j) quad over index grids, (dθ, dv)-oriented."""
    faces = []
    for i_a, i_b in zip(i0, i1):
        for j_a, j_b in zip(j0, j1):
            v00 = index(i_a, j_a)
            v10 = index(i_b, j_a)
            v01 = index(i_a, j_b)
            v11 = index(i_b, j_b)
            faces.append([v00, v10, v11])
            faces.append([v00, v11, v01])
    return np.asarray(faces, dtype=np.int64)


def torus(major_radius: float, minor_radius: float, n: int, m: int) -> TriangleMesh:
    """Torus with ``n`` azimuth and ``m`` tube steps: n*m vertices, 2*n*m faces."""
    if n < 3 or m < 3:
        raise ValueError("torus needs n >= 3 and m >= 3")
    if minor_radius <= 0 or major_radius <= minor_radius:
        raise ValueError("torus needs 0 < minor_radius < major_radius")
    theta = 2 * np.pi * np.arange(n) / n
    phi = 2 * np.pi * np.arange(m) / m
    ring = major_radius + minor_radius * np.cos(phi)  # (m,)
    x = np.outer(np.cos(theta), ring)
    y = np.outer(np.sin(theta), ring)
    z = np.broadcast_to(minor_radius * np.sin(phi), (n, m))
    verts = np.stack([x, y, z], axis=-1).reshape(-1, 3)

    ii = np.arange(n)
    jj = np.arange(m)
    faces = _grid_quads(ii, (ii + 1) % n, jj, (jj + 1) % m,
                        lambda i, j: i * m + j)
    return TriangleMesh(verts, faces)


def torus_rotation_permutation(n: int, m: int, steps: int = 1) -> np.ndarray:
    """Vertex permutation realizing the 2*pi*steps/n rotation of :func:`torus`."""
    i, j = np.divmod(np.arange(n * m), m)
    return ((i + steps) % n) * m + j


def uv_sphere(radius: float, n: int, m: int) -> TriangleMesh:
    """Longitude/latitude sphere: ``n`` azimuth steps, ``m`` latitude bands."""
    if n < 3 or m < 2:
        raise ValueError("uv_sphere needs n >= 3 and m >= 2")
    if radius <= 0:
        raise ValueError("uv_sphere needs radius > 0")
    theta = 2 * np.pi * np.arange(n) / n
    phi = np.pi * np.arange(1, m) / m  # interior rings, poles added separately
    x = radius * np.outer(np.cos(theta), np.sin(phi))
    y = radius * np.outer(np.sin(theta), np.sin(phi))
    z = np.broadcast_to(radius * np.cos(phi), (n, m - 1))
    verts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    north = len(verts)
    south = north + 1
    verts = np.vstack([verts, [0.0, 0.0, radius], [0.0, 0.0, -radius]])

    def index(i, j):
        return (i % n) * (m - 1) + j

    faces = []
    for i in range(n):
        faces.append([north, index(i + 1, 0), index(i, 0)])
        faces.append([south, index(i, m - 2), index(i + 1, m - 2)])
    # (dθ, dφ) on this parametrization is inward, so quads are flipped.
    for i in range(n):
        for j in range(m - 2):
            v00 = index(i, j)
            v10 = index(i + 1, j)
            v01 = index(i, j + 1)
            v11 = index(i + 1, j + 1)
            faces.append([v00, v11, v10])
            faces.append([v00, v01, v11])
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def cylinder(radius: float, height: float, n: int, m: int = 1) -> TriangleMesh:
    """Closed cylinder: ``n`` sides, ``m`` height segments, capped with fans."""
    if n < 3 or m < 1:
        raise ValueError("cylinder needs n >= 3 and m >= 1")
    if radius <= 0 or height <= 0:
        raise ValueError("cylinder needs positive radius and height")
    theta = 2 * np.pi * np.arange(n) / n
    zs = np.linspace(-height / 2, height / 2, m + 1)
    x = radius * np.outer(np.cos(theta), np.ones(m + 1))
    y = radius * np.outer(np.sin(theta), np.ones(m + 1))
    z = np.broadcast_to(zs, (n, m + 1))
    verts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    bottom_c = len(verts)
    top_c = bottom_c + 1
    verts = np.vstack([verts, [0.0, 0.0, -height / 2], [0.0, 0.0, height / 2]])

    def index(i, j):
        return (i % n) * (m + 1) + j

    ii = np.arange(n)
    jj = np.arange(m)
    faces = _grid_quads(ii, ii + 1, jj, jj + 1, index).tolist()
    for i in range(n):
        faces.append([index(i, m), index(i + 1, m), top_c])
        faces.append([index(i + 1, 0), index(i, 0), bottom_c])
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def box(sx: float, sy: float, sz: float) -> TriangleMesh:
    """Axis-aligned box centered at the origin: 8 vertices, 12 triangles."""
    if min(sx, sy, sz) <= 0:
        raise ValueError("box needs positive extents")
    hx, hy, hz = sx / 2, sy / 2, sz / 2
    verts = np.array(
        [[x, y, z] for x in (-hx, hx) for y in (-hy, hy) for z in (-hz, hz)]
    )
    # index bits: x*4 + y*2 + z
    faces = np.array([
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 6, 7], [4, 7, 5],  # +x
        [0, 4, 5], [0, 5, 1],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ], dtype=np.int64)
    return TriangleMesh(verts, faces)


def blob(radius: float, n: int, m: int, seed: int = 0,
         amplitude: float = 0.18) -> TriangleMesh:
    """Smoothly bumped sphere: an asymmetric star-shaped test body."""
    base = uv_sphere(1.0, n, m)
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=(4, 3))
    p = base.vertices
    g = np.zeros(len(p))
    for k, (ax, ay, az) in enumerate(coeffs, start=1):
        g += (ax * np.sin(k * p[:, 0] * 2.1 + k)
              + ay * np.cos(k * p[:, 1] * 1.7 - k)
              + az * np.sin(k * p[:, 2] * 2.6 + 0.5 * k)) / (k * len(coeffs))
    g = g / max(1e-12, np.abs(g).max())
    scale = radius * (1.0 + amplitude * g)
    return TriangleMesh(p * scale[:, None], base.faces.copy())
