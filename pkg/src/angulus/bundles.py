"""Spectral bundles (fibers) from impulse-forced scaled difference equations.

For an interval ``i`` with resolvent points ``gamma_i > gamma_{i+1}`` and a
random vector ``r`` the two finite-interval problems

    v_{n+1} = A_n v_n / gamma_{i+1} + delta_{n,k-1} r
    u_{n+1} = A_n u_n / gamma_i     - delta_{n,k-1} A_{k-1} v_{k-1}

are solved as minimum-norm least-squares problems; ``u_k`` then lies in the
fiber ``W_k^i``.  Each problem is block bidiagonal, and its minimum-norm
solution is obtained from a QR factorisation of the transposed operator
that is built one block column at a time (``O(N d^3)`` work).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import FiberRankDeficient
from .linalg import Subspace, frame_angles
from .models import SystemModel
from .spectrum import SpectrumReport

GAP = 50
SUBINTERVAL = 200
FIBER_RANK_TOL = 1e-8
MAX_RETRIES = 3
_CHUNK_COLUMNS = 256
_CHUNK_WINDOWS = 128


@dataclass(frozen=True)
class ResolventPoints:
    """``gamma[0] > gamma[1] > ...``: one point per resolvent interval, top first."""

    gamma: tuple[float, ...]

    def pair(self, i: int) -> tuple[float, float]:
        """``(gamma_i, gamma_{i+1})`` for the 1-based interval index ``i``."""
        return self.gamma[i - 1], self.gamma[i]


def choose_resolvent_points(report: SpectrumReport) -> ResolventPoints:
    """Geometric midpoints of the gaps, ``2 sigma_1^+`` above and ``sigma_l^- / 2`` below."""
    ivs = report.intervals
    gam = [2.0 * ivs[0].upper]
    for upper_iv, lower_iv in zip(ivs[:-1], ivs[1:]):
        gam.append(math.sqrt(lower_iv.upper * upper_iv.lower))
    gam.append(ivs[-1].lower / 2.0)
    return ResolventPoints(tuple(gam))


class BlockBidiagonalSolver:
    """Minimum-norm solutions of ``x_{n+1} - S_n x_n = b_n``, ``n = 0 .. N-1``.

    The unknowns are ``x_0 .. x_N``.  The transposed operator is block lower
    bidiagonal; its Householder QR factorisation ``L^T = Q [R; 0]`` has a
    block upper bidiagonal ``R`` whose diagonal blocks are always
    invertible (each stacked column block contains an identity).  The
    minimum-norm solution is ``x = Q [R^{-T} b; 0]``.

    ``s`` has shape ``(..., N, d, d)``; leading axes index independent
    problems that are factorised together.
    """

    def __init__(self, s: np.ndarray):
        s = np.asarray(s, dtype=float)
        *batch, n_eq, d, _ = s.shape
        self.n_eq, self.d = n_eq, d
        batch = tuple(batch)
        self._q = np.empty(batch + (n_eq, 2 * d, 2 * d))
        self._rinv_t = np.empty(batch + (n_eq, d, d))
        self._u_t = np.empty(batch + (max(n_eq - 1, 0), d, d))
        eye = np.broadcast_to(np.eye(d), batch + (d, d))
        zero = np.zeros(batch + (d, d))
        s_t = np.swapaxes(s, -1, -2)
        carry = -s_t[..., 0, :, :]
        for n in range(n_eq):
            q, r = np.linalg.qr(np.concatenate([carry, eye], axis=-2), mode="complete")
            self._q[..., n, :, :] = q
            self._rinv_t[..., n, :, :] = np.swapaxes(np.linalg.inv(r[..., :d, :]), -1, -2)
            if n + 1 < n_eq:
                nxt = np.swapaxes(q, -1, -2) @ np.concatenate(
                    [zero, -s_t[..., n + 1, :, :]], axis=-2)
                self._u_t[..., n, :, :] = np.swapaxes(nxt[..., :d, :], -1, -2)
                carry = nxt[..., d:, :]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """``b`` has shape ``(..., N, d, m)``; returns ``x`` of shape ``(..., N + 1, d, m)``."""
        n_eq, d = self.n_eq, self.d
        shape = list(b.shape)
        shape[-3] += 1
        x = np.zeros(shape)
        z = self._rinv_t[..., 0, :, :] @ b[..., 0, :, :]
        x[..., 0, :, :] = z
        for n in range(1, n_eq):
            z = self._rinv_t[..., n, :, :] @ (b[..., n, :, :] - self._u_t[..., n - 1, :, :] @ z)
            x[..., n, :, :] = z
        for n in range(n_eq - 1, -1, -1):
            blk = np.concatenate([x[..., n, :, :], x[..., n + 1, :, :]], axis=-2)
            out = self._q[..., n, :, :] @ blk
            x[..., n, :, :] = out[..., :d, :]
            x[..., n + 1, :, :] = out[..., d:, :]
        return x


def _impulse_pair(a, gammas, offsets, r, factor):
    """Solve the paired problems on windows stacked along the first axis.

    ``a`` has shape ``(W, N, d, d)`` (the window matrices), ``offsets[w]``
    is the position of ``k`` inside window ``w`` and ``r`` is ``d x m``.
    ``factor(gamma)`` returns a solver for ``a / gamma``.  Returns ``v`` and
    ``u`` with shape ``(W, N + 1, d, m)``.
    """
    gamma_i, gamma_next = gammas
    n_win, n_eq, d, _ = a.shape
    w = np.arange(n_win)
    b = np.zeros((n_win, n_eq, d, r.shape[1]))
    b[w, offsets - 1] = r
    v = factor(gamma_next).solve(b)
    b[w, offsets - 1] = -a[w, offsets - 1] @ v[w, offsets - 1]
    u = factor(gamma_i).solve(b)
    return v, u


class ImpulseSolver:
    """Paired impulse problems on windows of one stored matrix sequence.

    Monolithic factorisations (one window shared by all base times) are
    cached per ``(gamma, lo, hi)`` so intervals sharing a resolvent point
    reuse them.
    """

    def __init__(self, matrices: np.ndarray):
        self.a = np.asarray(matrices)
        self._cache: dict = {}

    def factor(self, gamma: float, lo: int, hi: int) -> BlockBidiagonalSolver:
        key = (float(gamma), lo, hi)
        fac = self._cache.get(key)
        if fac is None:
            fac = BlockBidiagonalSolver(self.a[None, lo:hi] / gamma)
            self._cache[key] = fac
        return fac

    def respond(self, gammas, ks, r, lo, hi):
        """``u_k`` for every base time in ``ks`` from one solve on ``[lo, hi]``.

        All ``len(ks) * m`` impulses are right-hand sides of the same two
        factorisations.  Returns shape ``(len(ks), d, m)``.
        """
        ks = np.asarray(ks, dtype=int)
        d, nr = r.shape
        cols = ks.size * nr
        rows = np.repeat(ks - lo, nr)
        idx = np.arange(cols)
        a = self.a[None, lo:hi]
        b = np.zeros((1, hi - lo, d, cols))
        b[0, rows - 1, :, idx] = np.tile(r.T, (ks.size, 1))
        v = self.factor(gammas[1], lo, hi).solve(b)[0]
        b[:] = 0.0
        b[0, rows - 1, :, idx] = -np.einsum("cij,cj->ci", a[0, rows - 1], v[rows - 1, :, idx])
        u = self.factor(gammas[0], lo, hi).solve(b)[0]
        return u[rows, :, idx].reshape(ks.size, nr, d).transpose(0, 2, 1)

    def respond_centered(self, gammas, ks, r, length, n_minus, n_plus):
        """``u_k`` with a separate window of ``length`` centred on each ``k``.

        Windows are shifted inside ``[n_minus, n_plus]`` near the ends.
        Returns shape ``(len(ks), d, m)``.
        """
        ks = np.asarray(ks, dtype=int)
        los = window_starts(ks, length, n_minus, n_plus)
        a = self.a[los[:, None] + np.arange(length)]
        offsets = ks - los

        def factor(gamma):
            return BlockBidiagonalSolver(a / gamma)

        _, u = _impulse_pair(a, gammas, offsets, r, factor)
        return u[np.arange(ks.size), offsets]


def window_starts(ks, length, n_minus, n_plus):
    """First index of the length-``length`` window centred on each ``k``."""
    ks = np.asarray(ks, dtype=int)
    return np.clip(ks - length // 2, n_minus, n_plus - length)


@dataclass(frozen=True)
class ImpulseResponse:
    """``v``, ``u`` solution sequences on ``[start, start + len - 1]``."""

    start: int
    v: np.ndarray
    u: np.ndarray

    def u_at(self, k):
        return self.u[k - self.start]

    def v_at(self, k):
        return self.v[k - self.start]


def _single_impulse(matrices, gamma_pair, k, r, lo, hi):
    a = np.asarray(matrices)[None, lo:hi]
    r = np.asarray(r, dtype=float).reshape(-1, 1)

    def factor(gamma):
        return BlockBidiagonalSolver(a / gamma)

    v, u = _impulse_pair(a, gamma_pair, np.array([k - lo]), r, factor)
    return ImpulseResponse(lo, v[0, :, :, 0], u[0, :, :, 0])


def solve_impulse(model: SystemModel, gamma_pair, k, r, n_minus, n_plus, matrices=None):
    """Monolithic minimum-norm solve of the paired problem on ``[n_minus, n_plus]``."""
    a = model.matrices(0, n_plus) if matrices is None else matrices
    return _single_impulse(a, gamma_pair, k, r, n_minus, n_plus)


def solve_block_subdivided(model: SystemModel, gamma_pair, k, r, n_minus, n_plus,
                           length=SUBINTERVAL, gap=GAP, matrices=None):
    """Paired solve restricted to a subinterval of ``length`` around ``k``.

    The window is centred on ``k`` where possible and shifted inside
    ``[n_minus, n_plus]`` otherwise; ``k`` keeps at least ``gap`` steps to
    both window ends.
    """
    if n_plus - n_minus < length:
        raise ValueError(f"range [{n_minus}, {n_plus}] shorter than the subinterval {length}")
    if not (n_minus + gap <= k <= n_plus - gap):
        raise ValueError(f"base time {k} violates the gap {gap} to [{n_minus}, {n_plus}]")
    lo = int(window_starts([k], length, n_minus, n_plus)[0])
    a = model.matrices(0, lo + length) if matrices is None else matrices
    return _single_impulse(a, gamma_pair, k, r, lo, lo + length)


@dataclass(frozen=True)
class FiberBundle:
    """Orthonormal fiber bases ``W_k^i`` for ``k_min <= k <= k_max``."""

    interval_index: int
    k_min: int
    bases: np.ndarray  # (K, d, d_i)

    @property
    def k_max(self) -> int:
        return self.k_min + self.bases.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.bases.shape[2]

    def basis(self, k: int) -> np.ndarray:
        if not self.k_min <= k <= self.k_max:
            raise IndexError(f"fiber at k={k} outside [{self.k_min}, {self.k_max}]")
        return self.bases[k - self.k_min]

    def at(self, k: int) -> Subspace:
        return Subspace(self.basis(k))

    def invariance_errors(self, matrices: np.ndarray) -> np.ndarray:
        """``angle(A_k W_k, W_{k+1})`` for ``k_min <= k < k_max``."""
        b = self.bases
        img = matrices[self.k_min:self.k_max] @ b[:-1]
        return frame_angles(img, b[1:])


def compute_fiber_bundle(model: SystemModel, report: SpectrumReport, i: int,
                         n_minus: int = 0, n_plus: int | None = None, k_range=None,
                         seed=0, subinterval: int | None = None, gap: int = GAP,
                         matrices=None, solver: ImpulseSolver | None = None,
                         points: ResolventPoints | None = None) -> FiberBundle:
    """Fibers of the 1-based spectral interval ``i`` for every base time in ``k_range``.

    ``subinterval=None`` solves on the whole range ``[n_minus, n_plus]``;
    an integer gives every base time its own window of that length,
    centred on it where the range allows.

    Raises
    ------
    FiberRankDeficient
        The computed responses stayed numerically dependent after
        ``MAX_RETRIES`` fresh draws of the impulse vectors.
    """
    if n_plus is None:
        raise ValueError("n_plus is required")
    if k_range is None:
        k_range = (n_minus + gap, n_plus - gap)
    k_lo, k_hi = k_range
    if k_lo < n_minus + gap or k_hi > n_plus - gap or k_lo > k_hi:
        raise ValueError(f"k_range {k_range} violates the gap {gap} to [{n_minus}, {n_plus}]")
    if not 1 <= i <= len(report):
        raise IndexError(f"interval index {i} outside 1..{len(report)}")
    if solver is None:
        a = model.matrices(0, n_plus) if matrices is None else np.asarray(matrices)[:n_plus]
        solver = ImpulseSolver(a)
    pts = points or choose_resolvent_points(report)
    gammas = pts.pair(i)
    d = model.dim
    di = report.intervals[i - 1].bundle_dim
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    ks = np.arange(k_lo, k_hi + 1)

    for attempt in range(MAX_RETRIES + 1):
        r = rng.standard_normal((d, di))
        r /= np.linalg.norm(r, axis=0)
        uk = np.empty((ks.size, d, di))
        if subinterval is None or subinterval >= n_plus - n_minus:
            step = max(1, _CHUNK_COLUMNS // di)
            for c in range(0, ks.size, step):
                part = ks[c:c + step]
                uk[c:c + step] = solver.respond(gammas, part, r, n_minus, n_plus)
        else:
            for c in range(0, ks.size, _CHUNK_WINDOWS):
                part = ks[c:c + _CHUNK_WINDOWS]
                uk[c:c + _CHUNK_WINDOWS] = solver.respond_centered(
                    gammas, part, r, subinterval, n_minus, n_plus)
        norms = np.linalg.norm(uk, axis=1, keepdims=True)
        if np.all(norms > 0):
            sv = np.linalg.svd(uk / norms, compute_uv=False)
            if sv[:, -1].min() >= FIBER_RANK_TOL:
                break
    else:
        raise FiberRankDeficient(
            f"interval {i}: impulse responses numerically dependent after {MAX_RETRIES} retries")
    q, _ = np.linalg.qr(uk)
    return FiberBundle(interval_index=i, k_min=int(k_lo), bases=q)


@dataclass(eq=False)
class BundleSet:
    """All fibers of one model plus the matrices they were computed from."""

    model: SystemModel
    report: SpectrumReport
    fibers: list[FiberBundle]
    matrices: np.ndarray

    @property
    def k_min(self) -> int:
        return self.fibers[0].k_min

    @property
    def k_max(self) -> int:
        return self.fibers[0].k_max

    def bases_at(self, k: int) -> list[np.ndarray]:
        return [f.basis(k) for f in self.fibers]

    def completeness(self, k: int) -> float:
        """Smallest singular value of the concatenated fiber bases at ``k``."""
        return float(np.linalg.svd(np.hstack(self.bases_at(k)), compute_uv=False).min())


def compute_bundles(model: SystemModel, report: SpectrumReport, m: int, *, gap: int = GAP,
                    subinterval: int | None = SUBINTERVAL, k_range=None, seed=0,
                    matrices=None, workers: int | None = 1) -> BundleSet:
    """Step 2 for every spectral interval with ``n_- = 0``, ``n_+ = M``.

    Each interval draws its impulse vectors from its own child of
    ``SeedSequence(seed)``, so the result does not depend on ``workers``.
    """
    a = model.matrices(0, m) if matrices is None else np.asarray(matrices)[:m]
    pts = choose_resolvent_points(report)
    children = np.random.SeedSequence(seed).spawn(len(report))

    def one(i):
        return compute_fiber_bundle(model, report, i, 0, m, k_range,
                                    np.random.default_rng(children[i - 1]), subinterval, gap,
                                    solver=ImpulseSolver(a), points=pts)

    indices = range(1, len(report) + 1)
    if workers == 1 or len(report) == 1:
        fibers = [one(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fibers = list(pool.map(one, indices))
    return BundleSet(model, report, fibers, a)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_fiber_csv(bundles: BundleSet, fh) -> int:
    """Write one row ``k, i, nu, e_1 .. e_d`` per fiber basis column; returns the row count."""
    d = bundles.model.dim
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "i", "nu"] + [f"e{j + 1}" for j in range(d)])
    rows = 0
    for k in range(bundles.k_min, bundles.k_max + 1):
        for fib in bundles.fibers:
            b = fib.basis(k)
            for nu in range(b.shape[1]):
                w.writerow([k, fib.interval_index, nu + 1] + [_fmt(x) for x in b[:, nu]])
                rows += 1
    return rows


def read_fiber_csv(text: str) -> dict:
    """Parse a fiber dump into ``{(k, i): basis}``."""
    out: dict = {}
    reader = csv.reader(io.StringIO(text))
    next(reader)
    for row in reader:
        k, i = int(row[0]), int(row[1])
        out.setdefault((k, i), []).append([float(x) for x in row[3:]])
    return {key: np.array(cols).T for key, cols in out.items()}
