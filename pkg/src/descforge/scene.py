"""Synthetic multi-view scene datasets: orbit sampling, shading, disk layout.

Dataset directory layout:
  scene.json                  intrinsics, object pose, descriptor metadata,
                              per-frame extrinsics (4x4 row-major) and file names
  rgb_%05d.png                8-bit RGB synthetic render
  depth_%05d.png              16-bit grayscale, 100 um units, 0 invalid
  mask_%05d.png               8-bit, 0/255
  desc_%05d.dimg              binary descriptor image (magic DDIF)
  preview_%05d.png            8-bit RGB preview of descriptor dims 1-3
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Union

import numpy as np
from PIL import Image

from .camera import CameraIntrinsics, RigidTransform, look_at
from .descriptors import DescriptorField
from .errors import DatasetFormatError, DegenerateTrajectory
from .mesh.core import TriangleMesh
from .render import DescriptorImage, apply_mask_ramp, blend_edges, rasterize

DIMG_MAGIC = b"DDIF"
DIMG_VERSION = 1

_LIGHT = np.array([0.408248290463863, 0.408248290463863, 0.816496580927726])
_ALBEDO = np.array([0.82, 0.80, 0.76])
_BG_COLOR = np.array([46, 46, 52], dtype=np.uint8)


@dataclass(frozen=True)
class Trajectory:
    """View-sphere spec: cameras look at the object centroid."""

    radius_min: float
    radius_max: float
    elevation_min: float = 0.35   # radians
    elevation_max: float = 1.15

    def __post_init__(self):
        if self.radius_min <= 0 or self.radius_max < self.radius_min:
            raise DegenerateTrajectory(
                f"invalid radius range [{self.radius_min}, {self.radius_max}]"
            )


@dataclass
class Frame:
    rgb: np.ndarray              # (h, w, 3) uint8
    image: DescriptorImage
    extrinsic: RigidTransform


@dataclass
class SceneDataset:
    intrinsics: CameraIntrinsics
    object_pose: RigidTransform
    frames: List[Frame]
    background: np.ndarray
    dim: int
    view_dependent: str = "none"
    band_px: int = 0

    def __len__(self) -> int:
        return len(self.frames)


def sample_orbit_poses(center: np.ndarray, trajectory: Trajectory, count: int,
                       seed: int) -> List[RigidTransform]:
    """Deterministic look-at poses on the view sphere."""
    if count < 1:
        raise ValueError("need at least one frame")
    rng = np.random.default_rng(seed)
    poses = []
    for _ in range(count):
        azimuth = rng.uniform(0.0, 2 * np.pi)
        elevation = rng.uniform(trajectory.elevation_min, trajectory.elevation_max)
        radius = rng.uniform(trajectory.radius_min, trajectory.radius_max)
        eye = center + radius * np.array([
            np.cos(elevation) * np.cos(azimuth),
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
        ])
        poses.append(look_at(eye, center))
    return poses


def vertex_normals(mesh: TriangleMesh) -> np.ndarray:
    """Area-weighted per-vertex unit normals."""
    a, b, c = (mesh.vertices[mesh.faces[:, k]] for k in range(3))
    face_n = np.cross(b - a, c - a)  # area-weighted
    out = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(out, mesh.faces[:, k], face_n)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    return out / np.maximum(norms, 1e-300)


def shade_frame(mesh: TriangleMesh, image: DescriptorImage, object_pose: RigidTransform,
                shading: str = "lambert",
                background_color: Optional[np.ndarray] = None) -> np.ndarray:
    """Synthetic RGB from the renderer's exact channels.

    ``lambert`` flat-shades per face under a fixed light; ``normal_colors``
    encodes the smoothly interpolated world normal in RGB, a surface-fixed
    cue that makes the frames a learnable regression input.
    """
    h, w = image.mask.shape
    bg = _BG_COLOR if background_color is None else np.asarray(background_color, dtype=np.uint8)
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[:] = bg
    if image.tri_ids is None or not image.mask.any():
        return rgb
    on = image.mask
    if shading == "lambert":
        normals = mesh.face_normals() @ object_pose.rotation.T
        lum = 0.22 + 0.73 * np.abs(normals @ _LIGHT)
        colors = np.clip(lum[:, None] * _ALBEDO * 255.0, 0, 255).astype(np.uint8)
        rgb[on] = colors[image.tri_ids[on]]
    elif shading == "normal_colors":
        if image.barycentrics is None:
            raise ValueError("normal_colors shading needs the barycentric channel")
        vn = vertex_normals(mesh) @ object_pose.rotation.T
        verts = mesh.faces[image.tri_ids[on]]         # (M, 3)
        bary = image.barycentrics[on].astype(np.float64)
        n = (vn[verts] * bary[:, :, None]).sum(axis=1)
        n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)
        coded = 0.5 + 0.5 * n
        rgb[on] = np.clip(np.round(coded * 255.0), 0, 255).astype(np.uint8)
    else:
        raise ValueError(f"unknown shading {shading!r}")
    return rgb


def render_frame(mesh: TriangleMesh, field: DescriptorField, intr: CameraIntrinsics,
                 object_pose: RigidTransform, extrinsic: RigidTransform,
                 view_dependent: str = "none", band_px: int = 4) -> DescriptorImage:
    """Rasterize one frame and apply the requested view-dependent variant."""
    obj_in_cam = extrinsic.inverse().compose(object_pose)
    image = rasterize(mesh, field, intr, obj_in_cam,
                      extrinsic=extrinsic, object_pose=object_pose)
    if view_dependent == "edge_blend":
        image = blend_edges(image, band_px)
    elif view_dependent == "mask_ramp":
        if image.mask.any():
            image = apply_mask_ramp(image, mode="replace_last")
    elif view_dependent != "none":
        raise ValueError(f"unknown view-dependent mode {view_dependent!r}")
    return image


def generate_scene(mesh: TriangleMesh, field: DescriptorField, intr: CameraIntrinsics,
                   object_pose: RigidTransform, trajectory: Trajectory, count: int,
                   seed: int, view_dependent: str = "none", band_px: int = 4,
                   shading: str = "lambert", randomize_background: bool = False,
                   out_dir: Optional[Union[str, Path]] = None) -> SceneDataset:
    """Render ``count`` orbit frames; stream to ``out_dir`` when given.

    With an output directory the returned dataset holds only metadata and the
    frames land on disk (use :func:`load_dataset` to read them back); without
    one, frames stay in memory.
    """
    center = object_pose.apply(mesh.centroid())
    poses = sample_orbit_poses(center, trajectory, count, seed)
    rng = np.random.default_rng(seed + 1)

    bg = np.asarray(field.background if field.background is not None
                    else np.zeros(field.dim), dtype=np.float64).copy()
    if view_dependent == "mask_ramp":
        bg[-1] = 0.0  # the ramp channel is zero on background pixels
    writer = (_DatasetWriter(out_dir, intr, object_pose, field.dim, bg,
                             view_dependent, band_px)
              if out_dir is not None else None)
    frames: List[Frame] = []
    for extrinsic in poses:
        image = render_frame(mesh, field, intr, object_pose, extrinsic,
                             view_dependent, band_px)
        bg_color = rng.integers(0, 256, size=3).astype(np.uint8) if randomize_background else None
        rgb = shade_frame(mesh, image, object_pose, shading, bg_color)
        if writer is not None:
            writer.add(rgb, image, extrinsic)
        else:
            frames.append(Frame(rgb=rgb, image=image, extrinsic=extrinsic))
    dataset = SceneDataset(
        intrinsics=intr, object_pose=object_pose, frames=frames,
        background=bg, dim=field.dim,
        view_dependent=view_dependent, band_px=band_px,
    )
    if writer is not None:
        writer.finish()
    return dataset


# -- .dimg format -------------------------------------------------------------

def save_descriptor_image(image_desc: np.ndarray, path: Union[str, Path]) -> None:
    """Write (h, w, D) float32 descriptors as a .dimg file."""
    arr = np.ascontiguousarray(image_desc, dtype="<f4")
    h, w, d = arr.shape
    with open(path, "wb") as fh:
        fh.write(DIMG_MAGIC)
        fh.write(struct.pack("<IIII", DIMG_VERSION, h, w, d))
        fh.write(arr.tobytes())


def load_descriptor_image(path: Union[str, Path]) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != DIMG_MAGIC:
        raise DatasetFormatError(f"{path}: not a .dimg file")
    version, h, w, d = struct.unpack_from("<IIII", raw, 4)
    if version != DIMG_VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    data = np.frombuffer(raw, dtype="<f4", count=h * w * d, offset=20)
    return data.reshape(h, w, d).copy()


def descriptor_preview(image_desc: np.ndarray) -> np.ndarray:
    """8-bit RGB preview of the first three descriptor channels."""
    h, w, d = image_desc.shape
    rgb = np.zeros((h, w, 3), dtype=np.float32)
    for c in range(min(3, d)):
        rgb[..., c] = image_desc[..., c]
    if d == 1:
        rgb[..., 1] = rgb[..., 2] = rgb[..., 0]
    return np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)


class _DatasetWriter:
    def __init__(self, out_dir, intr, object_pose, dim, background,
                 view_dependent, band_px):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.intr = intr
        self.object_pose = object_pose
        self.background = background
        self.dim = dim
        self.view_dependent = view_dependent
        self.band_px = band_px
        self.frames: List[dict] = []

    def add(self, rgb: np.ndarray, image: DescriptorImage, extrinsic: RigidTransform):
        i = len(self.frames)
        names = {
            "rgb": f"rgb_{i:05d}.png",
            "depth": f"depth_{i:05d}.png",
            "mask": f"mask_{i:05d}.png",
            "descriptors": f"desc_{i:05d}.dimg",
            "preview": f"preview_{i:05d}.png",
        }
        Image.fromarray(rgb, mode="RGB").save(self.dir / names["rgb"])
        depth = Image.fromarray(image.depth.astype(np.uint16))  # mode I;16
        depth.save(self.dir / names["depth"])
        mask = Image.fromarray((image.mask * np.uint8(255)), mode="L")
        mask.save(self.dir / names["mask"])
        save_descriptor_image(image.descriptors, self.dir / names["descriptors"])
        Image.fromarray(descriptor_preview(image.descriptors), mode="RGB").save(
            self.dir / names["preview"])
        self.frames.append({
            "files": names,
            "extrinsic": [[float(v) for v in row] for row in extrinsic.matrix()],
        })

    def finish(self):
        bg = self.background
        meta = {
            "schema": "descforge-scene/1",
            "intrinsics": self.intr.to_dict(),
            "object_pose": [[float(v) for v in row] for row in self.object_pose.matrix()],
            "descriptor": {
                "dim": int(self.dim),
                "background": [float(v) for v in bg] if bg is not None else None,
                "view_dependent": self.view_dependent,
                "band_px": int(self.band_px),
            },
            "frames": self.frames,
        }
        with open(self.dir / "scene.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def save_dataset(dataset: SceneDataset, out_dir: Union[str, Path]) -> None:
    """Write an in-memory dataset using the standard layout."""
    writer = _DatasetWriter(out_dir, dataset.intrinsics, dataset.object_pose,
                            dataset.dim, dataset.background,
                            dataset.view_dependent, dataset.band_px)
    for frame in dataset.frames:
        writer.add(frame.rgb, frame.image, frame.extrinsic)
    writer.finish()


class LazyDataset:
    """Read-side view of a dataset directory; frames load on demand."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        meta_path = self.root / "scene.json"
        if not meta_path.exists():
            raise DatasetFormatError(f"{self.root}: missing scene.json")
        try:
            meta = json.loads(meta_path.read_text())
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{meta_path}: invalid JSON") from exc
        try:
            self.intrinsics = CameraIntrinsics.from_dict(meta["intrinsics"])
            self.object_pose = RigidTransform.from_matrix(np.asarray(meta["object_pose"]))
            desc = meta["descriptor"]
            self.dim = int(desc["dim"])
            self.background = (np.asarray(desc["background"], dtype=np.float64)
                               if desc.get("background") is not None else None)
            self.view_dependent = desc.get("view_dependent", "none")
            self.meta_frames = meta["frames"]
        except (KeyError, TypeError) as exc:
            raise DatasetFormatError(f"{meta_path}: missing field {exc}") from exc

    def __len__(self) -> int:
        return len(self.meta_frames)

    def extrinsic(self, i: int) -> RigidTransform:
        return RigidTransform.from_matrix(np.asarray(self.meta_frames[i]["extrinsic"]))

    def rgb(self, i: int) -> np.ndarray:
        return np.asarray(Image.open(self.root / self.meta_frames[i]["files"]["rgb"]))

    def frame(self, i: int) -> DescriptorImage:
        files = self.meta_frames[i]["files"]
        desc = load_descriptor_image(self.root / files["descriptors"])
        depth = np.asarray(Image.open(self.root / files["depth"]), dtype=np.uint16)
        mask = np.asarray(Image.open(self.root / files["mask"])) > 127
        if desc.shape[:2] != depth.shape or desc.shape[:2] != mask.shape:
            raise DatasetFormatError(f"frame {i}: inconsistent channel shapes")
        return DescriptorImage(
            descriptors=desc.astype(np.float32),
            mask=mask,
            depth=depth,
            intrinsics=self.intrinsics,
            extrinsic=self.extrinsic(i),
            object_pose=self.object_pose,
        )

    def frames(self) -> Iterator[DescriptorImage]:
        for i in range(len(self)):
            yield self.frame(i)


def load_dataset(root: Union[str, Path]) -> LazyDataset:
    return LazyDataset(root)
