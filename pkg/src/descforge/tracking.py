"""Reference-descriptor tracking and error statistics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .camera import project, unproject_pixel
from .errors import (DimensionMismatch, InvalidDepth, NoValidSamples,
                     OffObjectPixel)
from .render import DescriptorImage

VISIBILITY_DEPTH_TOL = 1e-3      # m; geometric visibility check
DESCRIPTOR_VIS_THRESHOLD = 0.2   # fallback visibility flag


@dataclass
class ReferenceSet:
    """Recorded descriptors and world coordinates of chosen object pixels."""

    descriptors: np.ndarray  # (n, D)
    points: np.ndarray       # (n, 3) world, meters
    pixels: np.ndarray       # (n, 2) source (u, v)
    frame_id: int = 0

    def __len__(self) -> int:
        return len(self.descriptors)


@dataclass
class TrackResult:
    """Per-reference tracking outcome on one image.

    ``error_m``/``error_px`` are NaN where not computable; an error is
    reported iff the reference is visible (and, for meters, the best pixel
    has valid depth).
    """

    frame_id: int
    best_pixel: np.ndarray       # (n, 2) int
    distance: np.ndarray         # (n,) descriptor distance at the best pixel
    point: np.ndarray            # (n, 3) predicted world point, NaN if no depth
    error_m: np.ndarray          # (n,)
    error_px: np.ndarray         # (n,)
    visible: np.ndarray          # (n,) bool


def select_references(image: DescriptorImage, pixels: Sequence) -> ReferenceSet:
    """Record descriptor + unprojected world point for on-object pixels."""
    px = np.asarray(pixels, dtype=int).reshape(-1, 2)
    if len(px) == 0:
        raise ValueError("no reference pixels given")
    h, w = image.mask.shape
    for u, v in px:
        if not (0 <= u < w and 0 <= v < h) or not image.mask[v, u]:
            raise OffObjectPixel(f"pixel ({u}, {v}) is not on the object mask")
        if image.depth[v, u] == 0:
            raise InvalidDepth(f"pixel ({u}, {v}) has no depth")
    u, v = px[:, 0], px[:, 1]
    desc = image.descriptors[v, u].astype(np.float64)
    cam = unproject_pixel(u, v, image.depth_m()[v, u], image.intrinsics)
    world = image.extrinsic.apply(cam)
    return ReferenceSet(descriptors=desc, points=world, pixels=px)


def _geometric_visibility(refs: ReferenceSet, image: DescriptorImage):
    """Project each reference point; visible iff it lands on coherent depth."""
    cam = image.extrinsic.inverse().apply(refs.points)
    uv, z = project(cam, image.intrinsics)
    h, w = image.mask.shape
    u = np.floor(uv[:, 0]).astype(int)
    v = np.floor(uv[:, 1]).astype(int)
    ok = (z > 0) & (u >= 0) & (u < w) & (v >= 0) & (v < h)
    vis = np.zeros(len(refs), dtype=bool)
    idx = np.nonzero(ok)[0]
    if idx.size:
        on = image.mask[v[idx], u[idx]] & (image.depth[v[idx], u[idx]] > 0)
        idx = idx[on]
        depth = image.depth_m()
        agree = np.abs(depth[v[idx], u[idx]] - z[idx]) <= VISIBILITY_DEPTH_TOL
        vis[idx[agree]] = True
    return vis, uv, ok


def track(refs: ReferenceSet, image: DescriptorImage, frame_id: int = 0,
          visibility: str = "geometric",
          visibility_threshold: float = DESCRIPTOR_VIS_THRESHOLD) -> TrackResult:
    """Exhaustive per-pixel argmin search for every reference descriptor.

    Ties resolve to the first pixel in row-major order. ``visibility`` is
    "geometric" (project the recorded point against the frame's exact mask
    and depth; the synthetic-data oracle) or "descriptor" (threshold on the
    best match distance).
    """
    if refs.descriptors.shape[1] != image.dim:
        raise DimensionMismatch(
            f"references have {refs.descriptors.shape[1]} dims, image has {image.dim}"
        )
    if visibility not in ("geometric", "descriptor"):
        raise ValueError(f"unknown visibility mode {visibility!r}")
    h, w = image.mask.shape
    n = len(refs)
    desc = image.descriptors.reshape(-1, image.dim).astype(np.float64)

    best_pixel = np.zeros((n, 2), dtype=int)
    distance = np.zeros(n)
    point = np.full((n, 3), np.nan)
    error_m = np.full(n, np.nan)
    error_px = np.full(n, np.nan)

    for i in range(n):
        d2 = ((desc - refs.descriptors[i]) ** 2).sum(axis=1)
        flat = int(np.argmin(d2))
        v, u = divmod(flat, w)
        best_pixel[i] = (u, v)
        distance[i] = np.sqrt(d2[flat])

    if visibility == "geometric":
        visible, true_uv, proj_ok = _geometric_visibility(refs, image)
    else:
        visible = distance <= visibility_threshold
        cam = image.extrinsic.inverse().apply(refs.points)
        true_uv, z = project(cam, image.intrinsics)
        proj_ok = z > 0

    depth_m = image.depth_m()
    for i in range(n):
        u, v = best_pixel[i]
        if image.depth[v, u] > 0:
            cam = unproject_pixel(u, v, depth_m[v, u], image.intrinsics)
            point[i] = image.extrinsic.apply(cam)
        if not visible[i]:
            continue
        if np.isfinite(point[i]).all():
            error_m[i] = float(np.linalg.norm(point[i] - refs.points[i]))
        if proj_ok[i]:
            center = np.array([u + 0.5, v + 0.5])
            error_px[i] = float(np.linalg.norm(center - true_uv[i]))

    return TrackResult(frame_id=frame_id, best_pixel=best_pixel, distance=distance,
                       point=point, error_m=error_m, error_px=error_px,
                       visible=visible)


def _stats(values: np.ndarray) -> dict:
    return {
        "count": int(len(values)),
        "median": float(np.median(values)),
        "mean": float(values.mean()),
        "p95": float(np.percentile(values, 95)),
        "max": float(values.max()),
    }


def tracking_statistics(results: Sequence[TrackResult], n_bins: int = 24) -> dict:
    """Pooled and per-reference stats plus a log-spaced histogram."""
    if not results:
        raise NoValidSamples("no tracking results")
    n_refs = len(results[0].visible)
    pooled = np.concatenate([r.error_m[np.isfinite(r.error_m)] for r in results])
    pooled_px = np.concatenate([r.error_px[np.isfinite(r.error_px)] for r in results])
    if pooled.size == 0:
        raise NoValidSamples("no valid tracking errors")

    floor = 1e-6
    clipped = np.maximum(pooled, floor)
    top = max(clipped.max(), floor * 10)
    edges = np.geomspace(floor, top * 1.0000001, n_bins + 1)
    per_ref_counts = []
    for i in range(n_refs):
        errs = np.array([r.error_m[i] for r in results])
        errs = np.maximum(errs[np.isfinite(errs)], floor)
        counts, _ = np.histogram(errs, bins=edges)
        per_ref_counts.append(counts.tolist())

    per_ref = []
    for i in range(n_refs):
        errs = np.array([r.error_m[i] for r in results])
        errs = errs[np.isfinite(errs)]
        per_ref.append(_stats(errs) if errs.size else {"count": 0})

    summary = {
        "pooled": _stats(pooled),
        "pooled_px": _stats(pooled_px) if pooled_px.size else {"count": 0},
        "per_reference": per_ref,
        "histogram": {"edges": [float(e) for e in edges], "counts": per_ref_counts},
    }
    return summary


def export_statistics(results: Sequence[TrackResult], out_dir: Union[str, Path],
                      make_plot: bool = True) -> dict:
    """Write tracking CSV, JSON summary, histogram CSV, and the bar plot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tracking.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["reference_id", "frame_id", "u", "v", "distance",
                     "error_m", "error_px", "visible"])
        for r in results:
            for i in range(len(r.visible)):
                wr.writerow([
                    i, r.frame_id, int(r.best_pixel[i, 0]), int(r.best_pixel[i, 1]),
                    repr(float(r.distance[i])),
                    "" if not np.isfinite(r.error_m[i]) else repr(float(r.error_m[i])),
                    "" if not np.isfinite(r.error_px[i]) else repr(float(r.error_px[i])),
                    int(r.visible[i]),
                ])
    summary = tracking_statistics(results)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    edges = summary["histogram"]["edges"]
    counts = summary["histogram"]["counts"]
    with open(out / "histogram.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["bin_low", "bin_high"] + [f"ref_{i}" for i in range(len(counts))])
        for b in range(len(edges) - 1):
            wr.writerow([repr(edges[b]), repr(edges[b + 1])]
                        + [c[b] for c in counts])
    if make_plot:
        _plot_histogram(edges, counts, out / "histogram.png")
    return summary


def _plot_histogram(edges, counts, path):
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    edges = np.asarray(edges)
    lows = edges[:-1]
    widths = edges[1:] - edges[:-1]
    fig, ax = plt.subplots(figsize=(7.0, 4.0), dpi=100)
    bottom = np.zeros(len(lows))
    for i, c in enumerate(counts):
        c = np.asarray(c, dtype=float)
        ax.bar(lows, c, width=widths, bottom=bottom, align="edge",
               label=f"ref {i}", edgecolor="none")
        bottom += c
    ax.set_xscale("log")
    ax.set_xlabel("tracking error [m]")
    ax.set_ylabel("frames")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
