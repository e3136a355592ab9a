"""SVD of the (aligned) light field matrix: basis ``B = U S``, coefficients ``C = V^T``."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .lightfield import LFMatrix, unvec, write_png


@dataclass(frozen=True)
class Decomposition:
    B: np.ndarray  # (m, n), column j is basis j
    C: np.ndarray  # (n, n), orthonormal rows
    singular_values: np.ndarray
    dims: tuple[int, int, int, int]  # (X, Y, P, Q)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def basis_image(self, j: int) -> np.ndarray:
        X, Y = self.dims[:2]
        return unvec(self.B[:, j], X, Y)

    def with_basis(self, j: int, column: np.ndarray) -> "Decomposition":
        """Copy with basis ``j`` replaced; every other column is left bit-identical."""
        B = self.B.copy()
        B[:, j] = np.asarray(column, dtype=np.float64).reshape(-1)
        return replace(self, B=B)

    def truncate(self, k: int) -> "Decomposition":
        """Keep the first ``k`` bases (the best rank-``k`` approximation)."""
        B = self.B.copy()
        B[:, k:] = 0.0
        sv = self.singular_values.copy()
        sv[k:] = 0.0
        return replace(self, B=B, singular_values=sv)


def decompose(aligned: LFMatrix) -> Decomposition:
    """Thin SVD with a deterministic sign per component.

    Each column of ``U`` is flipped so its largest-magnitude entry is
    positive.  Singular values below the usual numerical-rank tolerance
    ``max(m, n) * eps * s_0`` are set to zero along with their basis, so an
    exactly low-rank input yields exactly zero higher bases.
    """
    M = np.asarray(aligned.data, dtype=np.float64)
    if not np.isfinite(M).all():
        raise ValueError("light field matrix contains non-finite values")
    m, n = M.shape
    if m < n:
        raise ValueError(f"need at least as many pixels as views (m={m}, n={n})")
    U, S, Vt = np.linalg.svd(M, full_matrices=False)
    k = np.argmax(np.abs(U), axis=0)
    sign = np.where(U[k, np.arange(n)] < 0, -1.0, 1.0)
    U *= sign
    Vt *= sign[:, None]
    if S[0] > 0:
        S = np.where(S <= max(m, n) * np.finfo(float).eps * S[0], 0.0, S)
    B = U * S
    return Decomposition(B, Vt, S, tuple(aligned.dims))


def reconstruct(d: Decomposition) -> LFMatrix:
    return LFMatrix(d.B @ d.C, d.dims)


def residual_energy(d: Decomposition, start: int = 1) -> float:
    """Energy outside the leading ``start`` components: sum of ``s_j^2``, ``j >= start``."""
    return float(np.sum(d.singular_values[start:] ** 2))


def basis_entropy(column: np.ndarray, dims=None) -> float:
    """Shannon entropy (bits) of the 8-bit quantised basis image.

    The column is min-max mapped onto 0..255 and rounded; a constant
    column has zero entropy.
    """
    col = np.asarray(column, dtype=np.float64).reshape(-1)
    if not np.isfinite(col).all():
        raise ValueError("basis contains non-finite values")
    lo, hi = col.min(), col.max()
    if hi <= lo:
        return 0.0
    q = np.round((col - lo) * (255.0 / (hi - lo))).astype(np.int64)
    counts = np.bincount(q, minlength=256)
    p = counts[counts > 0] / col.size
    return float(-(p * np.log2(p)).sum())


def normalize_basis(img: np.ndarray) -> np.ndarray:
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.zeros(img.shape)
    return (img - lo) / (hi - lo)


def export_basis_images(d: Decomposition, path) -> list[float]:
    """Write ``basis_<j>.png`` (min-max normalised, 8-bit) and ``decomposition.txt``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entropies = []
    lines = ["# index singular_value entropy_bits"]
    for j in range(d.n):
        img = d.basis_image(j)
        write_png(path / f"basis_{j}.png", normalize_basis(img), bit_depth=8)
        h = basis_entropy(d.B[:, j])
        entropies.append(h)
        lines.append(f"{j} {float(d.singular_values[j])!r} {h!r}")
    (path / "decomposition.txt").write_text("\n".join(lines) + "\n")
    return entropies


def read_decomposition_table(path) -> list[tuple[int, float, float]]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        j, sv, h = line.split()
        rows.append((int(j), float(sv), float(h)))
    return rows
