"""Generalized eigensolver for ``L y = lambda C y`` and eigenvalue grouping.

Two solver paths share one contract: a dense symmetric solve (via the
``C^{-1/2} L C^{-1/2}`` reduction, exact at desk scale) below
``DENSE_LIMIT`` vertices, and shift-invert Lanczos above it. Both return
C-orthonormal eigenvectors with a fixed sign convention so results are
reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceFailure, MultiComponent, SingularC
from .mesh.laplacian import LaplacianPair

DENSE_LIMIT = 3000
ZERO_EIGENVALUE = 1e-8
LANCZOS_SHIFT = -1e-6


@dataclass
class Spectrum:
    """The k+1 smallest generalized eigenpairs, trivial pair included.

    ``eigenvectors`` has one row per pair, C-orthonormal
    (``Y C Y^T = I``); row 0 is the constant mode with eigenvalue 0.
    """

    eigenvalues: np.ndarray   # (k+1,), non-decreasing
    eigenvectors: np.ndarray  # (k+1, N)

    @property
    def k(self) -> int:
        return len(self.eigenvalues) - 1

    def to_report(self) -> dict:
        return {"eigenvalues": [float(v) for v in self.eigenvalues]}


@dataclass
class SymmetryGroups:
    """Consecutive index ranges over spectrum dimensions ``1..k``.

    Each range (start, end) is inclusive; ranges are disjoint and cover
    ``1..k`` in order.
    """

    ranges: List[Tuple[int, int]]
    epsilon: float

    def lengths(self) -> List[int]:
        return [b - a + 1 for a, b in self.ranges]

    def to_report(self) -> list:
        return [{"start": a, "end": b, "length": b - a + 1} for a, b in self.ranges]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive.

    ``argmax`` takes the first occurrence, which realizes the lowest-index
    tie-break.
    """
    out = vecs.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def solve_generalized_eigen(pair: LaplacianPair, k: int, method: str = "auto",
                            check_connectivity: bool = True) -> Spectrum:
    """Smallest ``k + 1`` eigenpairs of ``L y = lambda C y``.

    Raises ``SingularC`` if C has a non-positive entry, ``MultiComponent``
    when more than one eigenvalue sits below the zero threshold (a
    disconnected mesh), and ``ConvergenceFailure`` if the iterative path
    gives up. ``method`` is one of auto/dense/lanczos.
    """
    n = pair.n
    if k < 0:
        raise ValueError("k must be >= 0")
    if k + 1 > n:
        raise ValueError(f"requested {k + 1} pairs from an {n}-vertex problem")
    c = pair.c_diag
    if (c <= 0).any():
        raise SingularC(f"C has {int((c <= 0).sum())} non-positive entries")
    if method not in ("auto", "dense", "lanczos"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "lanczos"
    if method == "lanczos" and k + 1 >= n - 1:
        method = "dense"  # ARPACK needs k+1 < N-1

    inv_sqrt_c = 1.0 / np.sqrt(c)
    if method == "dense":
        dense = pair.L.toarray()
        m = dense * inv_sqrt_c[:, None] * inv_sqrt_c[None, :]
        m = 0.5 * (m + m.T)
        vals, vecs = np.linalg.eigh(m)
        vals = vals[: k + 1]
        vecs = (vecs[:, : k + 1] * inv_sqrt_c[:, None]).T
    else:
        try:
            vals, vecs = spla.eigsh(
                pair.L.tocsc(), k=k + 1, M=pair.c_matrix().tocsc(),
                sigma=LANCZOS_SHIFT, which="LM",
                v0=np.full(n, 1.0 / np.sqrt(n)),
            )
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(str(exc)) from exc
        order = np.argsort(vals)
        vals = vals[order][: k + 1]
        vecs = vecs[:, order][:, : k + 1].T

    near_zero = int((vals < ZERO_EIGENVALUE).sum())
    if check_connectivity and near_zero > 1:
        raise MultiComponent(
            f"{near_zero} eigenvalues below {ZERO_EIGENVALUE:g}: disconnected mesh"
        )
    vals = np.maximum(vals, 0.0)  # clip round-off on the PSD spectrum
    return Spectrum(eigenvalues=vals, eigenvectors=_fix_signs(vecs))


def detect_symmetry_groups(spectrum: Spectrum, epsilon: float = 1e-3) -> SymmetryGroups:
    """Greedy left-to-right epsilon-ball grouping of dimensions ``1..k``.

    Dimension j joins the open group iff
    ``|lambda_j - lambda_start| <= epsilon * max(lambda_start, 1e-12)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    vals = spectrum.eigenvalues
    ranges: List[Tuple[int, int]] = []
    start = 1
    for j in range(2, len(vals)):
        anchor = vals[start]
        if abs(vals[j] - anchor) <= epsilon * max(anchor, 1e-12):
            continue
        ranges.append((start, j - 1))
        start = j
    if len(vals) > 1:
        ranges.append((start, len(vals) - 1))
    return SymmetryGroups(ranges=ranges, epsilon=epsilon)
