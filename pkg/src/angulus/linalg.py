"""Small dense kernels and subspace geometry.

Angles are evaluated from both the cosine (smallest singular value of
``U^T V``) and the sine (largest singular value of ``V - U U^T V``) of the
largest principal angle and combined with ``arctan2``.  This keeps full
relative accuracy for angles close to 0 where ``arccos`` alone loses about
half of the available digits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankDeficient

RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Subspace:
    """An ``s``-dimensional subspace of ``R^d`` stored by an orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=float, copy=True)
        if b.ndim == 1:
            b = b[:, None]
        if b.ndim != 2 or not 1 <= b.shape[1] <= b.shape[0]:
            raise DimensionMismatch(f"basis must be d x s with 1 <= s <= d, got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValueError("basis has non-finite entries")
        err = np.max(np.abs(b.T @ b - np.eye(b.shape[1])))
        if err > 1e-12:
            raise ValueError(f"basis columns not orthonormal (max error {err:.3g})")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def orthonormalize(cols) -> Subspace:
    """Orthonormal basis of the column space of a full-rank ``d x s`` matrix.

    Raises
    ------
    RankDeficient
        If the smallest singular value is at most ``1e-10`` times the largest.
    """
    a = np.asarray(cols, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficient(f"columns are numerically dependent (singular values {sv})")
    q, _ = np.linalg.qr(a)
    # one extra pass removes the O(eps * cond) loss of orthogonality
    q, _ = np.linalg.qr(q)
    return Subspace(q)


def qr_factor(a):
    """Householder QR ``A = Q T`` of a square matrix (no sign normalisation)."""
    a = np.asarray(a, dtype=float)
    q, t = np.linalg.qr(a, mode="complete")
    return q, t


def _check_pair(u: Subspace, v: Subspace):
    if u.ambient_dim != v.ambient_dim or u.dim != v.dim:
        raise DimensionMismatch(
            f"subspaces must share dimension and ambient space: "
            f"({u.dim}, {u.ambient_dim}) vs ({v.dim}, {v.ambient_dim})"
        )


def _angle_from_orthonormal(qu, qv):
    m = qu.T @ qv
    cos = np.linalg.svd(m, compute_uv=False).min()
    sin = np.linalg.svd(qv - qu @ m, compute_uv=False).max()
    return float(np.arctan2(min(sin, 1.0), min(cos, 1.0)))


def principal_angle(u: Subspace, v: Subspace) -> float:
    """Largest principal angle between two subspaces of equal dimension, in [0, pi/2]."""
    _check_pair(u, v)
    return _angle_from_orthonormal(u.basis, v.basis)


def grassmann_distance(u: Subspace, v: Subspace) -> float:
    """Projection metric ``||P_U - P_V||_2 = sin(angle(U, V))``."""
    return float(np.sin(principal_angle(u, v)))


def min_norm_least_squares(m, b):
    """Minimum-norm minimiser of ``||M x - b||_2``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    b = np.asarray(b, dtype=float)
    x, *_ = np.linalg.lstsq(m, b, rcond=None)
    return x


def vector_angles(x, y):
    """Angles between the lines spanned by corresponding rows of ``x`` and ``y``.

    ``x`` and ``y`` have shape ``(..., d)``; rows need not be normalised.
    """
    xn = x / np.linalg.norm(x, axis=-1, keepdims=True)
    yn = y / np.linalg.norm(y, axis=-1, keepdims=True)
    c = np.einsum("...i,...i->...", xn, yn)
    s = np.linalg.norm(yn - c[..., None] * xn, axis=-1)
    return np.arctan2(np.minimum(s, 1.0), np.minimum(np.abs(c), 1.0))


def frame_angles(x, y):
    """Largest principal angles between ``span(x[..., :, :])`` and ``span(y[...])``.

    Both stacks have shape ``(..., d, s)`` with full column rank; columns
    need not be orthonormal.
    """
    if x.shape[-1] == 1:
        return vector_angles(x[..., 0], y[..., 0])
    qx, _ = np.linalg.qr(x)
    qy, _ = np.linalg.qr(y)
    m = np.swapaxes(qx, -1, -2) @ qy
    cos = np.linalg.svd(m, compute_uv=False)[..., -1]
    sin = np.linalg.svd(qy - qx @ m, compute_uv=False)[..., 0]
    return np.arctan2(np.minimum(sin, 1.0), np.minimum(cos, 1.0))


def intersection_basis(u, w, *, null_tol=1e-10, range_tol=1e-6):
    """Orthonormal basis (possibly with zero columns) of ``range(u) ∩ range(w)``.

    ``u`` and ``w`` are orthonormal bases (``d x p`` and ``d x q``).  The
    intersection is read off from the null space of ``[u, -w]``.  Singular
    values below ``null_tol`` count as zero, those above ``range_tol`` as
    nonzero.  Returns ``(basis, ambiguous)`` where ``ambiguous`` is True
    if any singular value falls in between.
    """
    d = u.shape[0]
    if u.shape[1] == 0 or w.shape[1] == 0:
        return np.zeros((d, 0)), False
    stacked = np.hstack([u, -w])
    _, sv, vt = np.linalg.svd(stacked)
    ncols = stacked.shape[1]
    sv_full = np.zeros(ncols)
    sv_full[: sv.size] = sv
    ambiguous = bool(np.any((sv_full > null_tol) & (sv_full < range_tol)))
    null = vt[sv_full <= null_tol].T
    if null.shape[1] == 0:
        return np.zeros((d, 0)), ambiguous
    vecs = u @ null[: u.shape[1]]
    q, _ = np.linalg.qr(vecs)
    return q[:, : null.shape[1]], ambiguous
