"""Grasp pose construction from tracked surface points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import unproject_pixel
from .errors import DegeneratePair, NoValidDepth, ParallelAxis
from .render import DescriptorImage

MIN_PAIR_DISTANCE = 1e-6      # m
MIN_AXIS_ANGLE_DEG = 1.0


@dataclass
class GraspPose:
    position: np.ndarray  # (3,) meters
    rotation: np.ndarray  # (3, 3), columns = gripper x, y, z axes

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "rotation": [[float(v) for v in row] for row in self.rotation],
        }


def axis_grasp(p1: np.ndarray, p2: np.ndarray, reference_axis: np.ndarray,
               blend: float = 0.5) -> GraspPose:
    """Two-point grasp: position blends the points, x aligns with their difference.

    The grasp z axis is the reference axis made orthogonal to x; y completes
    the right-handed frame via the cross product.
    """
    p1 = np.asarray(p1, dtype=np.float64).reshape(3)
    p2 = np.asarray(p2, dtype=np.float64).reshape(3)
    axis = np.asarray(reference_axis, dtype=np.float64).reshape(3)
    if not 0.0 <= blend <= 1.0:
        raise ValueError("blend must be in [0, 1]")
    diff = p1 - p2
    norm = np.linalg.norm(diff)
    if norm <= MIN_PAIR_DISTANCE:
        raise DegeneratePair(f"anchor points are {norm:.2e} m apart")
    axis_norm = np.linalg.norm(axis)
    if axis_norm < 1e-12:
        raise ValueError("reference axis has zero length")
    x = diff / norm
    a = axis / axis_norm
    cos_angle = abs(float(a @ x))
    if cos_angle > np.cos(np.deg2rad(MIN_AXIS_ANGLE_DEG)):
        raise ParallelAxis(
            f"reference axis within {MIN_AXIS_ANGLE_DEG} deg of the anchor direction"
        )
    z = a - (a @ x) * x
    z = z / np.linalg.norm(z)
    y = np.cross(z, x)
    position = blend * p1 + (1.0 - blend) * p2
    return GraspPose(position=position, rotation=np.stack([x, y, z], axis=1))


def top_down_grasp(ref_descriptor: np.ndarray, image: DescriptorImage) -> np.ndarray:
    """World point of the depth-valid pixel closest to the descriptor."""
    ref = np.asarray(ref_descriptor, dtype=np.float64).reshape(-1)
    if ref.shape[0] != image.dim:
        raise ValueError(f"descriptor has {ref.shape[0]} dims, image has {image.dim}")
    valid = image.depth > 0
    if not valid.any():
        raise NoValidDepth("image has no depth-valid pixel")
    h, w = valid.shape
    d2 = ((image.descriptors.astype(np.float64) - ref) ** 2).sum(axis=2)
    d2[~valid] = np.inf
    flat = int(np.argmin(d2))
    v, u = divmod(flat, w)
    cam = unproject_pixel(u, v, image.depth_m()[v, u], image.intrinsics)
    return image.extrinsic.apply(cam)
