"""Software rasterization of descriptor-space images.

The rasterizer projects the mesh through a pinhole model, resolves visibility
with a per-pixel z-buffer (nearest depth, then lowest triangle index), and
interpolates vertex descriptors with perspective-correct barycentrics. Pixel
(u, v) samples at (u + 0.5, v + 0.5); shared edges are owned under a top-left
fill rule; back faces are rendered (descriptors belong to the surface, not
its orientation). Triangles containing a vertex with camera z <= 1e-6 m are
dropped whole rather than clipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .camera import DEPTH_MAX, DEPTH_QUANTUM, CameraIntrinsics, RigidTransform
from .descriptors import DescriptorField
from .errors import EmptyMask, MissingBackground, UnnormalizedField
from .mesh.core import TriangleMesh

NEAR_CLIP = 1e-6
_CHUNK_CANDIDATES = 4_000_000


@dataclass
class DescriptorImage:
    """Rendered target: descriptors, object mask, quantized depth, metadata.

    ``tri_ids``/``barycentrics`` are the renderer's exact visibility channels
    (synthetic ground truth); they are not part of the serialized format.
    """

    descriptors: np.ndarray            # (h, w, D) float32 in [0, 1]
    mask: np.ndarray                   # (h, w) bool
    depth: np.ndarray                  # (h, w) uint16, 100 um units, 0 invalid
    intrinsics: CameraIntrinsics
    extrinsic: RigidTransform          # camera-to-world
    object_pose: RigidTransform        # object-to-world
    tri_ids: Optional[np.ndarray] = None        # (h, w) int32, -1 background
    barycentrics: Optional[np.ndarray] = None   # (h, w, 3) float32

    @property
    def shape(self):
        return self.descriptors.shape

    @property
    def dim(self) -> int:
        return self.descriptors.shape[2]

    def depth_m(self) -> np.ndarray:
        return self.depth.astype(np.float64) * DEPTH_QUANTUM

    def copy_with(self, **kw) -> "DescriptorImage":
        base = dict(
            descriptors=self.descriptors, mask=self.mask, depth=self.depth,
            intrinsics=self.intrinsics, extrinsic=self.extrinsic,
            object_pose=self.object_pose, tri_ids=self.tri_ids,
            barycentrics=self.barycentrics,
        )
        base.update(kw)
        return DescriptorImage(**base)


def _edge_owns(ax, ay, bx, by):
    """Top-left rule for a directed edge with the interior on its +side."""
    horizontal = ay == by
    return np.where(horizontal, bx > ax, by < ay)


def rasterize(mesh: TriangleMesh, field: DescriptorField, intr: CameraIntrinsics,
              obj_in_cam: RigidTransform,
              extrinsic: Optional[RigidTransform] = None,
              object_pose: Optional[RigidTransform] = None) -> DescriptorImage:
    """Render the descriptor-space image of ``mesh`` under ``field``.

    Uncovered pixels carry the background descriptor, zero depth, and zero
    mask. Requires a normalized field with its background descriptor set.
    ``extrinsic``/``object_pose`` are frame metadata only; geometry is driven
    by ``obj_in_cam``.
    """
    if not field.normalized:
        raise UnnormalizedField("rasterize needs a [0,1]-normalized field")
    if field.background is None:
        raise MissingBackground("rasterize needs the background descriptor")
    if field.n_vertices != mesh.n_vertices:
        raise ValueError("field / mesh vertex count mismatch")
    extrinsic = extrinsic or RigidTransform.identity()
    object_pose = object_pose or RigidTransform.identity()

    h, w, d = intr.height, intr.width, field.dim
    desc_img = np.empty((h, w, d), dtype=np.float32)
    desc_img[:] = np.asarray(field.background, dtype=np.float32)
    depth_q = np.zeros((h, w), dtype=np.uint16)
    tri_ids = np.full((h, w), -1, dtype=np.int32)
    bary_img = np.zeros((h, w, 3), dtype=np.float32)

    cam_pts = obj_in_cam.apply(mesh.vertices)
    z = cam_pts[:, 2]
    tri = mesh.faces
    keep = np.all(z[tri] > NEAR_CLIP, axis=1)
    if not keep.any():
        return DescriptorImage(desc_img, np.zeros((h, w), bool), depth_q,
                               intr, extrinsic, object_pose,
                               tri_ids, bary_img)

    sx = intr.fx * cam_pts[:, 0] / z + intr.cx
    sy = intr.fy * cam_pts[:, 1] / z + intr.cy
    inv_z = 1.0 / z

    face_idx_all = np.nonzero(keep)[0].astype(np.int32)
    tri_kept = tri[keep]
    vx = sx[tri_kept]  # (F, 3)
    vy = sy[tri_kept]

    # pixel-center coverage bounds per face
    u0 = np.maximum(0, np.ceil(vx.min(axis=1) - 0.5).astype(np.int64))
    u1 = np.minimum(w - 1, np.floor(vx.max(axis=1) - 0.5).astype(np.int64))
    v0 = np.maximum(0, np.ceil(vy.min(axis=1) - 0.5).astype(np.int64))
    v1 = np.minimum(h - 1, np.floor(vy.max(axis=1) - 0.5).astype(np.int64))
    nx = np.maximum(0, u1 - u0 + 1)
    ny = np.maximum(0, v1 - v0 + 1)
    counts = nx * ny
    alive = counts > 0

    # winner buffers, merged deterministically across face chunks
    zbuf = np.full(h * w, np.inf)
    facebuf = np.full(h * w, np.iinfo(np.int32).max, dtype=np.int32)
    b0buf = np.zeros(h * w)
    b1buf = np.zeros(h * w)
    localbuf = np.full(h * w, -1, dtype=np.int64)  # index into kept-face arrays

    order = np.nonzero(alive)[0]
    start = 0
    while start < len(order):
        stop = start
        total = 0
        while stop < len(order) and (total == 0 or total + counts[order[stop]] <= _CHUNK_CANDIDATES):
            total += counts[order[stop]]
            stop += 1
        sel = order[start:stop]
        start = stop

        m = counts[sel]
        rep = np.repeat(np.arange(len(sel)), m)          # candidate -> face slot
        offs = np.arange(int(m.sum())) - np.repeat(np.cumsum(m) - m, m)
        fx_ = sel[rep]
        px = u0[fx_] + offs % nx[fx_]
        py = v0[fx_] + offs // nx[fx_]
        cxs = px + 0.5
        cys = py + 0.5

        ax, bx_, cx_ = (vx[fx_, k] for k in range(3))
        ay, by_, cy_ = (vy[fx_, k] for k in range(3))
        # edge functions: w_i is zero on the edge opposite vertex i
        w0 = (cx_ - bx_) * (cys - by_) - (cy_ - by_) * (cxs - bx_)
        w1 = (ax - cx_) * (cys - cy_) - (ay - cy_) * (cxs - cx_)
        w2 = (bx_ - ax) * (cys - ay) - (by_ - ay) * (cxs - ax)
        area2 = (bx_ - ax) * (cy_ - ay) - (by_ - ay) * (cx_ - ax)
        flip = area2 < 0
        sgn = np.where(flip, -1.0, 1.0)
        w0 *= sgn
        w1 *= sgn
        w2 *= sgn
        area_abs = area2 * sgn

        # ownership of exact-zero edges under the (possibly flipped) traversal
        def owns(pax, pay, pbx, pby):
            return np.where(flip, _edge_owns(pbx, pby, pax, pay),
                            _edge_owns(pax, pay, pbx, pby))

        cover = (
            (area_abs > 0)
            & ((w0 > 0) | ((w0 == 0) & owns(bx_, by_, cx_, cy_)))
            & ((w1 > 0) | ((w1 == 0) & owns(cx_, cy_, ax, ay)))
            & ((w2 > 0) | ((w2 == 0) & owns(ax, ay, bx_, by_)))
        )
        if not cover.any():
            continue
        w0, w1, w2 = w0[cover], w1[cover], w2[cover]
        area_c = area_abs[cover]
        fx_ = fx_[cover]
        pix = (py[cover] * w + px[cover]).astype(np.int64)

        b0 = w0 / area_c
        b1 = w1 / area_c
        b2 = w2 / area_c
        izs = inv_z[tri_kept[fx_]]
        denom = b0 * izs[:, 0] + b1 * izs[:, 1] + b2 * izs[:, 2]
        zpix = 1.0 / denom
        gfaces = face_idx_all[fx_]

        # nearest depth wins; equal depth resolves to the lowest face index
        srt = np.lexsort((gfaces, zpix, pix))
        pix_s = pix[srt]
        first = np.ones(len(pix_s), dtype=bool)
        first[1:] = pix_s[1:] != pix_s[:-1]
        srt = srt[first]
        pix_f = pix[srt]
        z_f = zpix[srt]
        f_f = gfaces[srt]
        better = (z_f < zbuf[pix_f]) | ((z_f == zbuf[pix_f]) & (f_f < facebuf[pix_f]))
        upd = srt[better]
        tgt = pix[upd]
        zbuf[tgt] = zpix[upd]
        facebuf[tgt] = gfaces[upd]
        b0buf[tgt] = b0[upd]
        b1buf[tgt] = b1[upd]
        localbuf[tgt] = fx_[upd]

    covered = np.nonzero(localbuf >= 0)[0]
    mask = np.zeros(h * w, dtype=bool)
    mask[covered] = True
    if covered.size:
        loc = localbuf[covered]
        verts = tri_kept[loc]                       # (M, 3) vertex ids
        b0 = b0buf[covered]
        b1 = b1buf[covered]
        b2 = 1.0 - b0 - b1
        izs = inv_z[verts]
        denom = b0 * izs[:, 0] + b1 * izs[:, 1] + b2 * izs[:, 2]
        beta0 = b0 * izs[:, 0] / denom
        beta1 = b1 * izs[:, 1] / denom
        beta2 = b2 * izs[:, 2] / denom
        desc = field.descriptors                    # (D, N)
        vals = (desc[:, verts[:, 0]] * beta0
                + desc[:, verts[:, 1]] * beta1
                + desc[:, verts[:, 2]] * beta2)     # (D, M)
        flat = desc_img.reshape(-1, d)
        flat[covered] = vals.T.astype(np.float32)
        q = np.round(zbuf[covered] / DEPTH_QUANTUM)
        depth_q.reshape(-1)[covered] = np.minimum(q, DEPTH_MAX).astype(np.uint16)
        # a covered pixel must stay depth-valid after quantization
        depth_q.reshape(-1)[covered] = np.maximum(depth_q.reshape(-1)[covered], 1)
        tri_ids.reshape(-1)[covered] = facebuf[covered]
        bary_img.reshape(-1, 3)[covered, 0] = beta0
        bary_img.reshape(-1, 3)[covered, 1] = beta1
        bary_img.reshape(-1, 3)[covered, 2] = beta2

    return DescriptorImage(
        descriptors=desc_img,
        mask=mask.reshape(h, w),
        depth=depth_q,
        intrinsics=intr,
        extrinsic=extrinsic,
        object_pose=object_pose,
        tri_ids=tri_ids,
        barycentrics=bary_img,
    )


def blend_edges(image: DescriptorImage, band_px: int) -> DescriptorImage:
    """Blend object pixels near the silhouette toward the background descriptor.

    An object pixel at chessboard distance t <= band_px from the background
    gets ``alpha * object + (1 - alpha) * background`` with
    ``alpha = t / (band_px + 1)``. Mask and depth are untouched.
    """
    if band_px < 1:
        raise ValueError("band_px must be >= 1")
    mask = image.mask
    if not mask.any() or mask.all():
        return image.copy_with(descriptors=image.descriptors.copy())
    dist = ndimage.distance_transform_cdt(mask, metric="chessboard")
    background = _image_background(image)
    out = image.descriptors.copy()
    band = mask & (dist <= band_px)
    alpha = (dist[band] / float(band_px + 1)).astype(np.float32)[:, None]
    out[band] = alpha * image.descriptors[band] + (1.0 - alpha) * background
    return image.copy_with(descriptors=out)


def mask_ramp(image: DescriptorImage) -> np.ndarray:
    """Normalized Euclidean distance-to-background ramp over the object.

    Zero outside the object; exactly 1 at the distance-transform maximum. The
    frame border counts as background, which also defines the full-frame-mask
    case. Use :func:`apply_mask_ramp` to splice it into the descriptors.
    """
    mask = image.mask
    if not mask.any():
        raise EmptyMask("mask ramp needs a non-empty mask")
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    peak = dist.max()
    ramp = (dist / peak).astype(np.float32)
    ramp[~mask] = 0.0
    return ramp


def apply_mask_ramp(image: DescriptorImage, mode: str = "append") -> DescriptorImage:
    """Append the ramp as a new channel or replace the last one."""
    ramp = mask_ramp(image)
    if mode == "append":
        desc = np.concatenate([image.descriptors, ramp[..., None]], axis=2)
    elif mode == "replace_last":
        desc = image.descriptors.copy()
        desc[..., -1] = ramp
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return image.copy_with(descriptors=desc)


def _image_background(image: DescriptorImage) -> np.ndarray:
    """Background descriptor as rendered: any off-mask pixel, else zeros."""
    off = ~image.mask
    if off.any():
        idx = np.argmax(off.reshape(-1))
        return image.descriptors.reshape(-1, image.dim)[idx].copy()
    return np.zeros(image.dim, dtype=np.float32)
