"""Descriptor fields: spectral embedding, symmetry compression, normalization,
background selection, and the .dfld on-disk format."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .errors import ConstantDimension, InsufficientSpectrum, MissingBackground
from .mesh.laplacian import LaplacianPair
from .spectral import Spectrum, SymmetryGroups, detect_symmetry_groups, solve_generalized_eigen

DFLD_MAGIC = b"DFLD"
DFLD_VERSION = 1


@dataclass
class DescriptorField:
    """Per-vertex descriptors, one row per dimension, one column per vertex."""

    descriptors: np.ndarray          # (D, N) float64
    normalized: bool = False
    sources: Optional[List[dict]] = None
    background: Optional[np.ndarray] = None

    def __post_init__(self):
        self.descriptors = np.atleast_2d(np.asarray(self.descriptors, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.descriptors.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.descriptors.shape[1]


@dataclass
class EmbedResult:
    """Field plus the spectrum and grouping that produced it (for reporting)."""

    field: DescriptorField
    spectrum: Spectrum
    groups: Optional[SymmetryGroups] = None


def _gisif_rows(spectrum: Spectrum, groups: SymmetryGroups, dim: int):
    rows, sources = [], []
    for start, end in groups.ranges[:dim]:
        if end == start:
            rows.append(spectrum.eigenvectors[start])
            sources.append({"kind": "eigenvector", "dims": [start]})
        else:
            rows.append((spectrum.eigenvectors[start:end + 1] ** 2).sum(axis=0))
            sources.append({"kind": "gisif", "dims": list(range(start, end + 1))})
    return np.asarray(rows), sources


def embed(pair: LaplacianPair, dim: int, symmetry: str = "off",
          epsilon: float = 1e-3, method: str = "auto") -> EmbedResult:
    """Embed the mesh into ``dim`` descriptor dimensions.

    ``symmetry="off"`` uses eigenvectors 1..dim directly. ``symmetry="gisif"``
    consumes eigenvalue groups in spectral order, always whole: a singleton
    group contributes its eigenvector, a repeated-eigenvalue group contributes
    the element-wise squared sum of its eigenvectors. One group yields one
    row, so the result has exactly ``dim`` rows or raises
    ``InsufficientSpectrum``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if symmetry not in ("off", "gisif"):
        raise ValueError(f"unknown symmetry mode {symmetry!r}")
    n = pair.n

    if symmetry == "off":
        if dim + 1 > n:
            raise InsufficientSpectrum(f"{n}-vertex mesh cannot supply {dim} dimensions")
        spectrum = solve_generalized_eigen(pair, dim, method=method)
        rows = spectrum.eigenvectors[1:dim + 1].copy()
        sources = [{"kind": "eigenvector", "dims": [j]} for j in range(1, dim + 1)]
        f = DescriptorField(rows, normalized=False, sources=sources)
        return EmbedResult(field=f, spectrum=spectrum, groups=None)

    k = min(n - 1, max(dim + 1, 2 * dim + 2))
    while True:
        spectrum = solve_generalized_eigen(pair, k, method=method)
        groups = detect_symmetry_groups(spectrum, epsilon)
        if len(groups.ranges) >= dim:
            end_of_dim_group = groups.ranges[dim - 1][1]
            # The group is certainly complete if a later eigenvalue bounds it
            # or the whole spectrum was computed.
            if end_of_dim_group < spectrum.k or k == n - 1:
                break
        elif k == n - 1:
            raise InsufficientSpectrum(
                f"only {len(groups.ranges)} eigenvalue groups available, {dim} requested"
            )
        k = min(n - 1, 2 * k)
    rows, sources = _gisif_rows(spectrum, groups, dim)
    f = DescriptorField(rows, normalized=False, sources=sources)
    return EmbedResult(field=f, spectrum=spectrum, groups=groups)


def normalize_descriptors(field: DescriptorField) -> DescriptorField:
    """Min-max scale every dimension to [0, 1] exactly."""
    if field.normalized:
        raise ValueError("field is already normalized")
    lo = field.descriptors.min(axis=1, keepdims=True)
    hi = field.descriptors.max(axis=1, keepdims=True)
    span = hi - lo
    flat = np.nonzero(span.ravel() < 1e-12)[0]
    if flat.size:
        raise ConstantDimension(f"dimension {int(flat[0])} has no spread")
    return DescriptorField(
        (field.descriptors - lo) / span,
        normalized=True,
        sources=list(field.sources) if field.sources else None,
        background=None,
    )


def _min_distances(cands: np.ndarray, points: np.ndarray) -> np.ndarray:
    """For each candidate row, the distance to the nearest descriptor column."""
    out = np.empty(len(cands))
    pts = points.T  # (N, D)
    chunk = max(1, int(4e6 // max(1, pts.shape[0])))
    for s in range(0, len(cands), chunk):
        block = cands[s:s + chunk]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        out[s:s + chunk] = np.sqrt(d2.min(axis=1))
    return out


def _lex_smallest(rows: np.ndarray) -> np.ndarray:
    order = np.lexsort(rows.T[::-1])
    return rows[order[0]]


def background_descriptor(field: DescriptorField, grid_resolution: int = 9) -> np.ndarray:
    """Maximin point of the unit cube w.r.t. the object descriptors.

    Deterministic approximate search: cube corners plus a uniform grid
    (low-discrepancy Sobol samples for D > 3), then 20 rounds of
    coordinate-wise pattern refinement with step halving. Exact-value ties
    resolve to the lexicographically smallest candidate. The result is also
    stored on ``field.background``.
    """
    if not field.normalized:
        raise ValueError("background selection needs a normalized field")
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    d = field.dim
    corners = np.array(
        [[(i >> b) & 1 for b in range(d)] for i in range(2 ** d)], dtype=np.float64
    )
    if d <= 3:
        axes = [np.linspace(0.0, 1.0, grid_resolution)] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        from scipy.stats import qmc

        grid = qmc.Sobol(d=d, scramble=False).random_base2(12)
    cands = np.vstack([corners, grid])
    vals = _min_distances(cands, field.descriptors)
    best_val = vals.max()
    best = _lex_smallest(cands[vals == best_val]).copy()

    step = 1.0 / grid_resolution
    for _ in range(20):
        for axis in range(d):
            for delta in (step, -step):
                trial = best.copy()
                trial[axis] = min(1.0, max(0.0, trial[axis] + delta))
                val = _min_distances(trial[None, :], field.descriptors)[0]
                if val > best_val:
                    best_val, best = val, trial
        step *= 0.5
    field.background = best
    return best


# -- .dfld format -------------------------------------------------------------

def save_field(field: DescriptorField, path: Union[str, Path]) -> None:
    """Write the chunked binary descriptor-field file (.dfld)."""
    if field.normalized and field.background is None:
        raise MissingBackground("normalized fields are stored with their background")
    with open(path, "wb") as fh:
        fh.write(DFLD_MAGIC)
        fh.write(struct.pack("<III", DFLD_VERSION, field.n_vertices, field.dim))
        fh.write(struct.pack("<B", 1 if field.normalized else 0))
        if field.normalized:
            fh.write(np.asarray(field.background, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(field.descriptors, dtype="<f4").tobytes())


def load_field(path: Union[str, Path]) -> DescriptorField:
    raw = Path(path).read_bytes()
    if raw[:4] != DFLD_MAGIC:
        raise ValueError(f"{path}: not a .dfld file")
    version, n, d = struct.unpack_from("<III", raw, 4)
    if version != DFLD_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    (normalized,) = struct.unpack_from("<B", raw, 16)
    off = 17
    background = None
    if normalized:
        background = np.frombuffer(raw, dtype="<f4", count=d, offset=off).astype(np.float64)
        off += 4 * d
    data = np.frombuffer(raw, dtype="<f4", count=n * d, offset=off)
    return DescriptorField(
        data.reshape(d, n).astype(np.float64),
        normalized=bool(normalized),
        sources=None,
        background=background,
    )
