"""Dichotomy spectrum from Bohl exponents of a sequential QR triangularisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficient, WindowTooLong
from .linalg import qr_factor
from .models import SystemModel

MERGE_GAP = 0.1
FRAME_SEED = 20170509


def generic_frame(d: int) -> np.ndarray:
    """A fixed orthogonal matrix in general position (seeded, so reproducible)."""
    q, _ = np.linalg.qr(np.random.default_rng(FRAME_SEED).standard_normal((d, d)))
    return q


@dataclass(frozen=True)
class TriangularSequence:
    """Orthogonal factors ``Q_j`` and moduli ``|T_j(i, i)|`` for ``j < M``."""

    q: np.ndarray      # (M, d, d)
    tdiag: np.ndarray  # (M, d)
    q_init: np.ndarray | None = None  # Q_{-1}; None means the identity

    @property
    def length(self) -> int:
        return self.q.shape[0]

    def t_matrix(self, j: int, a_j: np.ndarray) -> np.ndarray:
        """Reconstruct ``T_j = Q_j^T A_j Q_{j-1}``."""
        if j > 0:
            prev = self.q[j - 1]
        else:
            prev = np.eye(self.q.shape[1]) if self.q_init is None else self.q_init
        return self.q[j].T @ a_j @ prev


@dataclass(frozen=True)
class BohlTable:
    window: int
    beta: np.ndarray  # (d, number of windows)

    @property
    def beta_lo(self) -> np.ndarray:
        return self.beta.min(axis=1)

    @property
    def beta_hi(self) -> np.ndarray:
        return self.beta.max(axis=1)


@dataclass(frozen=True)
class SpectralInterval:
    lower: float
    upper: float
    bundle_dim: int

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "dim": self.bundle_dim}


@dataclass(frozen=True)
class SpectrumReport:
    intervals: tuple[SpectralInterval, ...]
    d: int

    def __len__(self):
        return len(self.intervals)

    @property
    def dims(self) -> list[int]:
        return [iv.bundle_dim for iv in self.intervals]

    def to_records(self):
        return [iv.to_dict() for iv in self.intervals]

    @classmethod
    def from_records(cls, records):
        ivs = tuple(SpectralInterval(float(r["lower"]), float(r["upper"]), int(r["dim"]))
                    for r in records)
        return cls(ivs, sum(iv.bundle_dim for iv in ivs))

    def scaled(self, c: float) -> "SpectrumReport":
        return SpectrumReport(
            tuple(SpectralInterval(c * iv.lower, c * iv.upper, iv.bundle_dim)
                  for iv in self.intervals), self.d)


def triangularize(model: SystemModel, m: int, matrices=None,
                  initial_frame=None) -> TriangularSequence:
    """``Q_j T_j = qr(A_j Q_{j-1})`` for ``j = 0, ..., M-1``.

    ``initial_frame`` is ``Q_{-1}``: ``None`` for the identity (so that
    ``Q_0 T_0 = qr(A_0)``), ``"generic"`` for :func:`generic_frame`, or an
    orthogonal matrix.

    The identity is exact for diagonal models but is a poor start whenever
    a coordinate axis happens to lie in a slow fiber: the frame then stays
    in the wrong order until rounding errors have grown to O(1), which
    biases every early window by about ``log(1/eps) / H``.
    """
    if m < 2:
        raise ValueError("need at least two matrices")
    a = model.matrices(0, m) if matrices is None else np.asarray(matrices)[:m]
    d = a.shape[1]
    if isinstance(initial_frame, str):
        if initial_frame != "generic":
            raise ValueError(f"unknown initial frame {initial_frame!r}")
        initial_frame = generic_frame(d)
    qs = np.empty((m, d, d))
    tdiag = np.empty((m, d))
    prev = np.eye(d) if initial_frame is None else np.asarray(initial_frame, dtype=float)
    prev0 = prev
    for j in range(m):
        q, t = qr_factor(a[j] @ prev)
        qs[j] = q
        tdiag[j] = np.abs(np.diag(t))
        prev = q
    scale = np.abs(a).reshape(m, -1).max(axis=1)
    if np.any(tdiag <= 1e-14 * scale[:, None]):
        bad = int(np.argwhere(tdiag <= 1e-14 * scale[:, None])[0, 0])
        raise RankDeficient(f"A_{bad} is numerically singular")
    return TriangularSequence(qs, tdiag, None if initial_frame is None else prev0)


def bohl_exponents(tri: TriangularSequence, window: int) -> BohlTable:
    """Windowed geometric means of ``|T_j(i, i)|`` over ``H`` consecutive ``j``.

    ``beta[i, kappa] = exp(mean(log |T_j(i, i)|, j = kappa .. kappa + H - 1))``
    for every window that fits into the computed range.
    """
    m = tri.length
    if window < 1:
        raise ValueError("window must be positive")
    if window > m - 1:
        raise WindowTooLong(f"window {window} exceeds M - 1 = {m - 1}")
    logs = np.log(tri.tdiag)
    csum = np.vstack([np.zeros((1, logs.shape[1])), np.cumsum(logs, axis=0)])
    means = (csum[window:] - csum[:-window]) / window
    return BohlTable(window, np.exp(means.T))


def spectral_intervals(table: BohlTable, merge_gap: float = MERGE_GAP) -> SpectrumReport:
    """Sort per-position Bohl intervals descending and merge close neighbours.

    Adjacent intervals are joined while ``upper(next) + merge_gap >= lower(current)``.
    """
    lo, hi = table.beta_lo, table.beta_hi
    order = np.argsort(-lo, kind="stable")
    merged: list[list] = []
    for i in order:
        if merged and hi[i] + merge_gap >= merged[-1][0]:
            cur = merged[-1]
            cur[0] = min(cur[0], lo[i])
            cur[1] = max(cur[1], hi[i])
            cur[2] += 1
        else:
            merged.append([lo[i], hi[i], 1])
    # a merge can lower an interval enough to touch its upper neighbour
    changed = True
    while changed:
        changed = False
        for j in range(len(merged) - 1):
            if merged[j + 1][1] + merge_gap >= merged[j][0]:
                a, b = merged[j], merged.pop(j + 1)
                merged[j] = [min(a[0], b[0]), max(a[1], b[1]), a[2] + b[2]]
                changed = True
                break
    ivs = tuple(SpectralInterval(float(a), float(b), int(c)) for a, b, c in merged)
    return SpectrumReport(ivs, int(lo.size))


def compute_spectrum(model: SystemModel, m: int, window: int | None = None,
                     merge_gap: float = MERGE_GAP, matrices=None,
                     initial_frame="generic") -> SpectrumReport:
    """Step 1 end to end with the default window ``H = M / 2``.

    Starts the QR iteration from a generic frame; see :func:`triangularize`.
    """
    tri = triangularize(model, m, matrices, initial_frame)
    table = bohl_exponents(tri, window if window is not None else m // 2)
    return spectral_intervals(table, merge_gap)
