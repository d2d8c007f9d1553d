"""Cross-frame pixel correspondence sampling from registered depth."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .camera import project, unproject_pixel
from .errors import ExhaustedSampling, RegistrationMismatch
from .render import DescriptorImage

DEPTH_AGREEMENT_TOL = 1e-3  # m; occlusion check against frame_b's depth
MIN_NONMATCH_DIST = 5.0     # px; guard radius around the true correspondence
ATTEMPT_FACTOR = 100


@dataclass
class CorrespondenceSet:
    """Matches and non-matches between two registered frames.

    Pixels are (u, v) = (column, row). ``matches_b`` keeps sub-pixel
    precision; losses evaluate it at the nearest pixel.
    """

    matches_a: np.ndarray             # (n, 2) int
    matches_b: np.ndarray             # (n, 2) float, sub-pixel
    non_matches_object_a: np.ndarray  # (m1, 2) int
    non_matches_object_b: np.ndarray  # (m1, 2) int
    non_matches_background_a: np.ndarray
    non_matches_background_b: np.ndarray
    frame_a: int = 0
    frame_b: int = 1

    @property
    def n_matches(self) -> int:
        return len(self.matches_a)

    @property
    def n_non_matches(self) -> int:
        return len(self.non_matches_object_a) + len(self.non_matches_background_a)

    def swapped(self) -> "CorrespondenceSet":
        """Pairs with the (image, pixel) roles exchanged.

        Sub-pixel b coordinates collapse to their containing pixel (floor),
        matching how losses evaluate them.
        """
        return CorrespondenceSet(
            matches_a=np.floor(self.matches_b).astype(int) if len(self.matches_b) else self.matches_b.astype(int),
            matches_b=self.matches_a.astype(float) + 0.5,
            non_matches_object_a=self.non_matches_object_b,
            non_matches_object_b=self.non_matches_object_a,
            non_matches_background_a=self.non_matches_background_b,
            non_matches_background_b=self.non_matches_background_a,
            frame_a=self.frame_b,
            frame_b=self.frame_a,
        )

    def save_jsonl(self, path: Union[str, Path]) -> None:
        with open(path, "w") as fh:
            for pa, pb in zip(self.matches_a, self.matches_b):
                fh.write(json.dumps({
                    "type": "match", "frame_a": self.frame_a, "frame_b": self.frame_b,
                    "pixel_a": [int(pa[0]), int(pa[1])],
                    "pixel_b": [float(pb[0]), float(pb[1])],
                }) + "\n")
            for tag, arr_a, arr_b in (
                ("nonmatch_obj", self.non_matches_object_a, self.non_matches_object_b),
                ("nonmatch_bg", self.non_matches_background_a, self.non_matches_background_b),
            ):
                for pa, pb in zip(arr_a, arr_b):
                    fh.write(json.dumps({
                        "type": tag, "frame_a": self.frame_a, "frame_b": self.frame_b,
                        "pixel_a": [int(pa[0]), int(pa[1])],
                        "pixel_b": [int(pb[0]), int(pb[1])],
                    }) + "\n")

    @classmethod
    def load_jsonl(cls, path: Union[str, Path]) -> "CorrespondenceSet":
        buckets = {"match": ([], []), "nonmatch_obj": ([], []), "nonmatch_bg": ([], [])}
        frame_a = frame_b = 0
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            a, b = buckets[rec["type"]]
            a.append(rec["pixel_a"])
            b.append(rec["pixel_b"])
            frame_a, frame_b = rec["frame_a"], rec["frame_b"]

        def arr(x, dtype):
            return np.asarray(x, dtype=dtype).reshape(-1, 2)

        return cls(
            matches_a=arr(buckets["match"][0], int),
            matches_b=arr(buckets["match"][1], float),
            non_matches_object_a=arr(buckets["nonmatch_obj"][0], int),
            non_matches_object_b=arr(buckets["nonmatch_obj"][1], int),
            non_matches_background_a=arr(buckets["nonmatch_bg"][0], int),
            non_matches_background_b=arr(buckets["nonmatch_bg"][1], int),
            frame_a=frame_a, frame_b=frame_b,
        )


def _reproject(frame_a: DescriptorImage, frame_b: DescriptorImage,
               ua: np.ndarray, va: np.ndarray):
    """Map pixel centers of frame_a into continuous frame_b coordinates."""
    za = frame_a.depth_m()[va, ua]
    cam_a = unproject_pixel(ua, va, za, frame_a.intrinsics)
    world = frame_a.extrinsic.apply(cam_a)
    cam_b = frame_b.extrinsic.inverse().apply(world)
    uv_b, z_b = project(cam_b, frame_b.intrinsics)
    return uv_b, z_b


def find_correspondences(frame_a: DescriptorImage, frame_b: DescriptorImage,
                         n_match: int, n_nonmatch: int, seed: int,
                         background_fraction: float = 0.5) -> CorrespondenceSet:
    """Sample matches (depth reprojection + occlusion check) and non-matches.

    Matches are pixels of frame_a's object mask whose unprojected point lands
    in-bounds, on frame_b's mask, with frame_b's depth agreeing within 1 mm.
    Non-matches pair each accepted a-pixel with a random b-pixel at least
    5 px from the true correspondence, split between on-object and background
    by ``background_fraction``.
    """
    if frame_a.intrinsics != frame_b.intrinsics:
        raise RegistrationMismatch("frames use different intrinsics")
    if n_match < 1:
        raise ValueError("n_match must be >= 1")
    if n_nonmatch < 0 or not (0.0 <= background_fraction <= 1.0):
        raise ValueError("bad non-match request")

    rng = np.random.default_rng(seed)
    h, w = frame_a.mask.shape
    valid_a = np.nonzero((frame_a.mask & (frame_a.depth > 0)).reshape(-1))[0]
    if valid_a.size == 0:
        raise ExhaustedSampling("frame_a has no masked pixel with valid depth")

    depth_b = frame_b.depth_m()
    matches_a: List[Tuple[int, int]] = []
    matches_b: List[Tuple[float, float]] = []
    attempts = 0
    budget = ATTEMPT_FACTOR * n_match
    while len(matches_a) < n_match and attempts < budget:
        take = min(budget - attempts, max(64, n_match - len(matches_a)))
        attempts += take
        flat = rng.choice(valid_a, size=take)
        va, ua = np.divmod(flat, w)
        uv_b, z_b = _reproject(frame_a, frame_b, ua, va)
        ub = np.floor(uv_b[:, 0]).astype(int)
        vb = np.floor(uv_b[:, 1]).astype(int)
        ok = (z_b > 0) & (ub >= 0) & (ub < w) & (vb >= 0) & (vb < h)
        ok_idx = np.nonzero(ok)[0]
        on = frame_b.mask[vb[ok_idx], ub[ok_idx]] & (frame_b.depth[vb[ok_idx], ub[ok_idx]] > 0)
        ok_idx = ok_idx[on]
        agree = np.abs(depth_b[vb[ok_idx], ub[ok_idx]] - z_b[ok_idx]) <= DEPTH_AGREEMENT_TOL
        ok_idx = ok_idx[agree]
        for i in ok_idx:
            if len(matches_a) >= n_match:
                break
            matches_a.append((int(ua[i]), int(va[i])))
            matches_b.append((float(uv_b[i, 0]), float(uv_b[i, 1])))
    if len(matches_a) < n_match:
        raise ExhaustedSampling(
            f"accepted {len(matches_a)}/{n_match} matches in {attempts} attempts"
        )

    n_bg = int(round(n_nonmatch * background_fraction))
    n_obj = n_nonmatch - n_bg
    mask_b_flat = (frame_b.mask).reshape(-1)
    obj_pool = np.nonzero(mask_b_flat)[0]
    bg_pool = np.nonzero(~mask_b_flat)[0]
    true_b = np.asarray(matches_b, dtype=float)

    def sample_pool(count: int, pool: np.ndarray, label: str):
        out_a, out_b = [], []
        if count == 0:
            return out_a, out_b
        if pool.size == 0:
            raise ExhaustedSampling(f"no {label} pixels available in frame_b")
        tries = 0
        limit = ATTEMPT_FACTOR * count
        while len(out_a) < count and tries < limit:
            take = min(limit - tries, max(64, count - len(out_a)))
            tries += take
            anchor = rng.integers(0, len(true_b), size=take)
            flat = rng.choice(pool, size=take)
            vb, ub = np.divmod(flat, w)
            duv = np.stack([ub + 0.5, vb + 0.5], axis=1) - true_b[anchor]
            far = (duv ** 2).sum(axis=1) >= MIN_NONMATCH_DIST ** 2
            for j in np.nonzero(far)[0]:
                if len(out_a) >= count:
                    break
                out_a.append(tuple(matches_a[anchor[j]]))
                out_b.append((int(ub[j]), int(vb[j])))
        if len(out_a) < count:
            raise ExhaustedSampling(
                f"accepted {len(out_a)}/{count} {label} non-matches"
            )
        return out_a, out_b

    nm_obj_a, nm_obj_b = sample_pool(n_obj, obj_pool, "on-object")
    nm_bg_a, nm_bg_b = sample_pool(n_bg, bg_pool, "background")

    def arr(x, dtype):
        return np.asarray(x, dtype=dtype).reshape(-1, 2)

    return CorrespondenceSet(
        matches_a=arr(matches_a, int),
        matches_b=arr(matches_b, float),
        non_matches_object_a=arr(nm_obj_a, int),
        non_matches_object_b=arr(nm_obj_b, int),
        non_matches_background_a=arr(nm_bg_a, int),
        non_matches_background_b=arr(nm_bg_b, int),
    )
