"""Training losses: pixelwise contrastive and masked pixel-normalized L2."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .correspond import CorrespondenceSet
from .errors import EmptySet, ShapeMismatch
from .render import DescriptorImage


@dataclass
class LossBreakdown:
    """Two-part loss with its total; parts depend on the loss family."""

    match_loss: Optional[float] = None
    nonmatch_loss: Optional[float] = None
    object_loss: Optional[float] = None
    background_loss: Optional[float] = None
    total: float = 0.0

    def to_dict(self) -> dict:
        out = {"total": self.total}
        for name in ("match_loss", "nonmatch_loss", "object_loss", "background_loss"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out


def _pixel_descriptors(img: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Descriptors at integer pixels; sub-pixel coordinates use the nearest pixel."""
    if len(pixels) == 0:
        return np.zeros((0, img.shape[2]))
    u = np.floor(pixels[:, 0]).astype(int) if pixels.dtype.kind == "f" else pixels[:, 0].astype(int)
    v = np.floor(pixels[:, 1]).astype(int) if pixels.dtype.kind == "f" else pixels[:, 1].astype(int)
    h, w = img.shape[:2]
    if (u < 0).any() or (u >= w).any() or (v < 0).any() or (v >= h).any():
        raise ValueError("correspondence pixel outside image bounds")
    return img[v, u].astype(np.float64)


def contrastive_loss(desc_a: np.ndarray, desc_b: np.ndarray, pairs: CorrespondenceSet,
                     margin_object: float = 0.5,
                     margin_background: float = 2.5) -> LossBreakdown:
    """Match loss pulls correspondences together; the hinge pushes the rest apart.

    ``L_m = mean ||d_a - d_b||^2`` over matches;
    ``L_nm = (1/N_nm) sum max(0, M - ||d_a - d_b||)^2`` with the on-object or
    background margin per non-match type.
    """
    if desc_a.shape != desc_b.shape:
        raise ShapeMismatch(f"{desc_a.shape} vs {desc_b.shape}")
    n_m = pairs.n_matches
    n_nm = pairs.n_non_matches
    if n_m == 0 and n_nm == 0:
        raise EmptySet("correspondence set has no pairs")

    match_loss = 0.0
    if n_m:
        da = _pixel_descriptors(desc_a, pairs.matches_a)
        db = _pixel_descriptors(desc_b, pairs.matches_b)
        match_loss = float((((da - db) ** 2).sum(axis=1)).mean())

    nonmatch_sum = 0.0
    for arr_a, arr_b, margin in (
        (pairs.non_matches_object_a, pairs.non_matches_object_b, margin_object),
        (pairs.non_matches_background_a, pairs.non_matches_background_b, margin_background),
    ):
        if len(arr_a) == 0:
            continue
        da = _pixel_descriptors(desc_a, arr_a)
        db = _pixel_descriptors(desc_b, arr_b)
        dist = np.sqrt(((da - db) ** 2).sum(axis=1))
        nonmatch_sum += float((np.maximum(0.0, margin - dist) ** 2).sum())
    nonmatch_loss = nonmatch_sum / n_nm if n_nm else 0.0

    return LossBreakdown(match_loss=match_loss, nonmatch_loss=nonmatch_loss,
                         total=match_loss + nonmatch_loss)


def supervised_l2_loss(pred: np.ndarray, target: DescriptorImage) -> LossBreakdown:
    """Object/background L2, each normalized by the pixels it occupies.

    An empty region contributes 0 by convention.
    """
    tgt = target.descriptors
    if pred.shape != tgt.shape:
        raise ShapeMismatch(f"{pred.shape} vs {tgt.shape}")
    diff2 = ((pred.astype(np.float64) - tgt.astype(np.float64)) ** 2).sum(axis=2)
    obj = target.mask
    p_obj = int(obj.sum())
    p_back = obj.size - p_obj
    object_loss = float(diff2[obj].sum() / p_obj) if p_obj else 0.0
    background_loss = float(diff2[~obj].sum() / p_back) if p_back else 0.0
    return LossBreakdown(object_loss=object_loss, background_loss=background_loss,
                         total=object_loss + background_loss)
