"""Pinhole camera model and rigid transforms.

Conventions: camera looks down +z; pixel (u, v) = (column, row) samples the
image plane at (u + 0.5, v + 0.5); extrinsics are camera-to-world poses, so a
world point is ``T_c . p_cam``. Depth images store z in 100 um integer
quanta with 0 meaning invalid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

DEPTH_QUANTUM = 1e-4  # meters per depth unit
DEPTH_MAX = 65535


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]),
                   cy=float(d["cy"]), width=int(d["width"]), height=int(d["height"]))


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) element with validated rotation."""

    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1 within 1e-9")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self . other`` (apply ``other`` first)."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


def object_in_camera(camera: RigidTransform, obj: RigidTransform) -> RigidTransform:
    """Pose of the object in the camera frame: ``T_c^{-1} . T_o``."""
    return camera.inverse().compose(obj)


def rotation_about_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def look_at(eye: np.ndarray, target: np.ndarray,
            world_up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """Camera-to-world pose with +z toward ``target`` and image-up near world up."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("eye and target coincide")
    forward = forward / norm
    up = np.asarray(world_up, dtype=np.float64)
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:  # looking straight along up: pick a fallback
        right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(right) < 1e-9:
            right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward], axis=1)
    # orthonormalize against rounding so RigidTransform validation passes
    u, _, vt = np.linalg.svd(rot)
    return RigidTransform(u @ vt, eye)


def project(points_cam: np.ndarray, intr: CameraIntrinsics) -> Tuple[np.ndarray, np.ndarray]:
    """Continuous image coordinates (u, v) and camera depth z for camera-frame points."""
    pts = np.atleast_2d(np.asarray(points_cam, dtype=np.float64))
    z = pts[:, 2]
    u = intr.fx * pts[:, 0] / z + intr.cx
    v = intr.fy * pts[:, 1] / z + intr.cy
    return np.stack([u, v], axis=1), z


def unproject_pixel(u, v, depth_m, intr: CameraIntrinsics) -> np.ndarray:
    """Camera-frame point for pixel indices (u, v), sampled at the pixel center."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(depth_m, dtype=np.float64)
    x = (u + 0.5 - intr.cx) / intr.fx * z
    y = (v + 0.5 - intr.cy) / intr.fy * z
    return np.stack([x, y, z], axis=-1)
