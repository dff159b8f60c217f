"""Finite-horizon outer angular values over trace spaces.

A trace space at time ``k`` is a direct sum of subspaces of the fibers
``W_k^i``.  The estimators maximise the average angle

    theta_s(V) = (1/n) * sum_{j=k+1}^{k+n} angle(Phi(j-1, k) V, Phi(j, k) V)

over trace spaces of dimension ``s`` in {1, 2}: lines in one fiber for
``s = 1``; whole 2-D fibers or sums of lines from two fibers for ``s = 2``.
Unit vectors of a 2-D fiber are parameterised by one angle
``t in [0, pi)`` as ``cos(t) b_1 + sin(t) b_2``.

Propagated subspaces are kept inside their fibers: after each step the
image is projected back onto the stored fiber basis.  For a component
with coordinates ``c`` in the fiber basis this is the same as applying
the products of the projected one-step maps ``C_j = B_{j+1}^T A_j B_j``
to ``c``, which are precomputed once per fiber and horizon.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bundles import BundleSet
from .errors import (HorizonExceedsFibers, NumericalIntersectionAmbiguous,
                     UnsupportedFiberDim)
from .linalg import Subspace, frame_angles, intersection_basis, orthonormalize
from .optimize import multistart_1d, multistart_simplex

NULL_TOL = 1e-10
RANGE_TOL = 1e-6
HALF_PI = math.pi / 2


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TraceSpace:
    """``V = W_{i_1} + ... + W_{i_r}`` with ``W_i`` inside the fiber ``W_k^i``."""

    k: int
    components: tuple[tuple[int, Subspace], ...]

    def __post_init__(self):
        comps = tuple((int(i), w) for i, w in self.components)
        idx = [i for i, _ in comps]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"component indices must increase strictly, got {idx}")
        if len({w.ambient_dim for _, w in comps}) > 1:
            raise ValueError("components live in different ambient spaces")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return sum(w.dim for _, w in self.components)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.components)

    def basis(self) -> np.ndarray:
        return np.hstack([w.basis for _, w in self.components])

    def subspace(self) -> Subspace:
        return orthonormalize(self.basis())

    def fiber_residual(self, bundles: BundleSet) -> float:
        """Largest angle between a component and its projection onto its fiber."""
        worst = 0.0
        for i, w in self.components:
            b = bundles.fibers[i - 1].basis(self.k)
            proj = b @ (b.T @ w.basis)
            worst = max(worst, float(np.max(frame_angles(w.basis[None], proj[None]))))
        return worst


@dataclass(frozen=True)
class Candidate:
    label: str
    value: float
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {"label": self.label, "value": self.value, "params": dict(self.params)}


@dataclass(frozen=True)
class AngularValueReport:
    """Candidate values ``w^kappa`` and their maximum ``theta_hat``."""

    s: int
    k: int
    n: int
    candidates: tuple[Candidate, ...]
    theta_hat: float

    def __post_init__(self):
        vals = [c.value for c in self.candidates]
        if any(not 0.0 <= v <= HALF_PI for v in vals):
            raise ValueError(f"candidate values outside [0, pi/2]: {vals}")
        if vals and self.theta_hat != max(vals):
            raise ValueError("theta_hat must be the largest candidate value")

    @classmethod
    def from_candidates(cls, s, k, n, candidates):
        cands = tuple(candidates)
        return cls(s, k, n, cands, max(c.value for c in cands))

    def value(self, label: str) -> float:
        for c in self.candidates:
            if c.label == label:
                return c.value
        raise KeyError(label)

    @property
    def argmax(self) -> Candidate:
        return max(self.candidates, key=lambda c: c.value)

    def to_dict(self):
        return {"s": self.s, "k": self.k, "n": self.n,
                "candidates": [c.to_dict() for c in self.candidates],
                "theta_hat": self.theta_hat}

    @classmethod
    def from_dict(cls, data):
        cands = tuple(Candidate(c["label"], float(c["value"]),
                                {key: float(v) for key, v in c.get("params", {}).items()})
                      for c in data["candidates"])
        return cls(int(data["s"]), int(data["k"]), int(data["n"]), cands,
                   float(data["theta_hat"]))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "AngularValueReport":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# propagation inside fibers
# ---------------------------------------------------------------------------

def _check_horizon(bundles: BundleSet, k: int, n: int):
    if n < 1:
        raise ValueError("horizon n must be positive")
    if k < bundles.k_min or k + n > bundles.k_max:
        raise HorizonExceedsFibers(
            f"need fibers on [{k}, {k + n}], have [{bundles.k_min}, {bundles.k_max}]")


class FiberFlow:
    """Frames of fiber components at times ``k .. k+n-1`` and the step matrices."""

    def __init__(self, bundles: BundleSet, k: int, n: int):
        _check_horizon(bundles, k, n)
        self.k, self.n = k, n
        self.a = bundles.matrices[k:k + n]
        self._bases = []
        self._products = []
        for fib in bundles.fibers:
            b = fib.bases[k - fib.k_min:k - fib.k_min + n + 1]
            self._bases.append(b)
            self._products.append(_normalized_products(b, self.a))

    def dims(self) -> list[int]:
        return [b.shape[2] for b in self._bases]

    def fiber_basis(self, i: int) -> np.ndarray:
        """Orthonormal basis of ``W_k^i``."""
        return self._bases[i - 1][0]

    def frames(self, i: int, coords=None) -> np.ndarray:
        """Frames ``(n, d, s_i)`` of the component with fiber coordinates ``coords``.

        ``coords=None`` (or a square coordinate matrix) means the whole fiber.
        """
        b = self._bases[i - 1][:-1]
        if coords is None:
            return b
        c = np.asarray(coords, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[1] == c.shape[0]:
            return b
        y = self._products[i - 1] @ c
        if c.shape[1] == 1:
            y = y / np.linalg.norm(y, axis=1, keepdims=True)
        else:
            y, _ = np.linalg.qr(y)
        return b @ y

    def theta(self, frames) -> float:
        """Average angle between consecutive propagated subspaces."""
        x = np.concatenate(frames, axis=2) if len(frames) > 1 else frames[0]
        ang = frame_angles(x, self.a @ x)
        return float(min(max(ang.mean(), 0.0), HALF_PI))

    def line(self, i: int, t: float) -> np.ndarray:
        return self.frames(i, np.array([math.cos(t), math.sin(t)]))


def _normalized_products(b, a):
    """``C_{j-1} ... C_k`` scaled to unit max-norm, for ``j = k .. k+n-1``."""
    n = a.shape[0]
    c = np.swapaxes(b[1:], 1, 2) @ a @ b[:-1]          # (n, d_i, d_i)
    di = b.shape[2]
    out = np.empty((n, di, di))
    p = np.eye(di)
    out[0] = p
    for j in range(n - 1):
        p = c[j] @ p
        p = p / np.abs(p).max()
        out[j + 1] = p
    return out


def angle_sum(bundles: BundleSet, v: TraceSpace, k: int | None = None,
              n: int | None = None) -> float:
    """``theta_s(V)`` for a trace space over the horizon ``n``."""
    k = v.k if k is None else k
    n = bundles.k_max - k if n is None else n
    flow = FiberFlow(bundles, k, n)
    frames = [flow.frames(i, flow.fiber_basis(i).T @ w.basis) for i, w in v.components]
    return flow.theta(frames)


def fiber_angle_average(bundles: BundleSet, i: int, k: int, n: int) -> float:
    """Mean of ``angle(W_{j-1}^i, W_j^i)`` over ``j = k+1 .. k+n`` from the stored fibers."""
    _check_horizon(bundles, k, n)
    fib = bundles.fibers[i - 1]
    b = fib.bases[k - fib.k_min:k - fib.k_min + n + 1]
    return float(frame_angles(b[:-1], b[1:]).mean())


def direct_angle_average(matrices, basis, k: int, n: int) -> np.ndarray:
    """``theta_s`` of arbitrary subspaces by plain iteration, without fibers.

    ``basis`` has shape ``(d, s)`` or ``(batch, d, s)``; the frame is
    re-orthonormalised after every step.
    """
    x = np.asarray(basis, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    x, _ = np.linalg.qr(x)
    total = np.zeros(x.shape[0])
    for j in range(k, k + n):
        y = matrices[j] @ x
        total += frame_angles(x, y)
        x, _ = np.linalg.qr(y)
    out = total / n
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _defaults(bundles: BundleSet, k, n):
    k = bundles.k_min if k is None else k
    n = bundles.k_max - k if n is None else n
    return k, n


def _check_dims(dims):
    bad = [i + 1 for i, di in enumerate(dims) if di > 2]
    if bad:
        raise UnsupportedFiberDim(
            f"fibers {bad} have dimension > 2; the search covers dimensions 1 and 2 only")


def _map(fn, items, workers):
    items = list(items)
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def theta1_hat(bundles: BundleSet, k: int | None = None, n: int | None = None,
               starts: int = 8, workers: int | None = 1) -> AngularValueReport:
    """``max_i max_{v in B_k^i} theta_1(v)`` with one candidate per fiber."""
    k, n = _defaults(bundles, k, n)
    flow = FiberFlow(bundles, k, n)
    dims = flow.dims()
    _check_dims(dims)

    def one(i):
        if dims[i - 1] == 1:
            return Candidate(f"W{i}", flow.theta([flow.frames(i)]))
        t, fneg = multistart_1d(lambda t: -flow.theta([flow.line(i, t)]), 0.0, math.pi, starts)
        return Candidate(f"B{i}", -fneg, {f"t{i}": t})

    return AngularValueReport.from_candidates(1, k, n, _map(one, range(1, len(dims) + 1),
                                                           workers))


def theta2_hat(bundles: BundleSet, k: int | None = None, n: int | None = None,
               starts: int = 8, grid: int = 4, workers: int | None = 1) -> AngularValueReport:
    """Second outer angular value over whole 2-D fibers and sums of two fiber lines."""
    k, n = _defaults(bundles, k, n)
    flow = FiberFlow(bundles, k, n)
    dims = flow.dims()
    _check_dims(dims)
    cands = []
    for i, di in enumerate(dims, start=1):
        if di == 2:
            cands.append(Candidate(f"W{i}", flow.theta([flow.frames(i)])))
    ell = len(dims)
    pairs = [(i1, i2) for i1 in range(1, ell + 1) for i2 in range(i1 + 1, ell + 1)]
    cands += _map(lambda p: _pair_candidate(flow, p[0], p[1], dims, starts, grid), pairs, workers)
    if not cands:
        raise UnsupportedFiberDim("no two-dimensional trace space: d = 1")
    return AngularValueReport.from_candidates(2, k, n, cands)


def _pair_candidate(flow: FiberFlow, i1, i2, dims, starts, grid) -> Candidate:
    name = lambda i: f"W{i}" if dims[i - 1] == 1 else f"B{i}"  # noqa: E731
    label = f"{name(i1)}+{name(i2)}"
    free = [i for i in (i1, i2) if dims[i - 1] == 2]

    def frames(ts):
        tmap = dict(zip(free, ts))
        return [flow.line(i, tmap[i]) if i in tmap else flow.frames(i) for i in (i1, i2)]

    if not free:
        return Candidate(label, flow.theta(frames(())))
    if len(free) == 1:
        t, fneg = multistart_1d(lambda t: -flow.theta(frames((t,))), 0.0, math.pi, starts)
        return Candidate(label, -fneg, {f"t{free[0]}": t})
    x, fneg = multistart_simplex(lambda x: -flow.theta(frames(tuple(x))), math.pi, grid)
    return Candidate(label, -fneg, {f"t{i1}": float(x[0]), f"t{i2}": float(x[1])})


def theta1_sweep(bundles: BundleSet, horizons, k: int | None = None, starts: int = 8,
                 workers: int | None = 1):
    """``[(n, theta1_hat over horizon n)]`` for each horizon."""
    k = bundles.k_min if k is None else k
    return [(int(n), theta1_hat(bundles, k, int(n), starts, workers).theta_hat)
            for n in horizons]


def candidate_trace_space(bundles: BundleSet, k: int, candidate: Candidate) -> TraceSpace:
    """Rebuild the maximising trace space of a candidate from its label and params."""
    comps = []
    for part in candidate.label.split("+"):
        i = int(part[1:])
        b = bundles.fibers[i - 1].basis(k)
        key = f"t{i}"
        if key in candidate.params:
            t = candidate.params[key]
            b = (math.cos(t) * b[:, 0] + math.sin(t) * b[:, 1])[:, None]
        comps.append((i, Subspace(b / np.linalg.norm(b, axis=0))))
    return TraceSpace(k, tuple(comps))


# ---------------------------------------------------------------------------
# trace-space construction
# ---------------------------------------------------------------------------

def _range_basis(m, scale, what):
    """Orthonormal basis of ``range(m)`` with the guard-band rank decision."""
    if m.shape[1] == 0:
        return np.zeros((m.shape[0], 0))
    u, sv, _ = np.linalg.svd(m, full_matrices=False)
    rel = sv / scale
    if np.any((rel > NULL_TOL) & (rel < RANGE_TOL)):
        raise NumericalIntersectionAmbiguous(
            f"{what}: singular values {sv} fall in the guard band")
    return u[:, rel >= RANGE_TOL]


class _FiberProjectors:
    def __init__(self, fibers):
        self.bases = [np.asarray(b, dtype=float).reshape(b.shape[0], -1) for b in fibers]
        self.f = np.hstack(self.bases)
        d = self.f.shape[0]
        if self.f.shape[1] != d:
            raise ValueError(f"fiber dimensions sum to {self.f.shape[1]}, expected {d}")
        self.finv = np.linalg.inv(self.f)
        self.offsets = np.concatenate([[0], np.cumsum([b.shape[1] for b in self.bases])])

    @property
    def ell(self):
        return len(self.bases)

    def fiber(self, i):
        """Oblique projector onto ``W^i`` along the other fibers."""
        sl = slice(self.offsets[i - 1], self.offsets[i])
        return self.f[:, sl] @ self.finv[sl]

    def unstable(self, i):
        """``P^u_i``: onto ``W^1 + ... + W^{i-1}`` along the rest."""
        sl = slice(0, self.offsets[i - 1])
        return self.f[:, sl] @ self.finv[sl]

    def stable_range(self, i):
        """Orthonormal basis of ``range(P^s_i) = W^i + ... + W^ell``."""
        cols = self.f[:, self.offsets[i - 1]:]
        if cols.shape[1] == 0:
            return cols
        q, _ = np.linalg.qr(cols)
        return q


def _intersect(u, w, what):
    basis, ambiguous = intersection_basis(u, w, null_tol=NULL_TOL, range_tol=RANGE_TOL)
    if ambiguous:
        raise NumericalIntersectionAmbiguous(f"{what}: intersection dimension unresolved")
    return basis


def _components(proj: _FiberProjectors, vb, k, s):
    comps = []
    for i in range(1, proj.ell + 1):
        p = proj.fiber(i)
        b = _range_basis(p @ vb, max(1.0, np.linalg.norm(p, 2)), f"component {i}")
        if b.shape[1]:
            comps.append((i, Subspace(b)))
    ts = TraceSpace(k, tuple(comps))
    if ts.dim != s:
        raise NumericalIntersectionAmbiguous(f"trace space has dimension {ts.dim}, expected {s}")
    return ts


def trace_space_of(v: Subspace, fibers, k: int = 0) -> TraceSpace:
    """The trace space ``T_k(V)`` by the projector recursion.

    ``fibers`` are the bases of ``W_k^1, ..., W_k^ell`` (top interval
    first).  Starting from ``V_1 = V``,

        V_{i+1} = P^u_{i+1} V_i  (+)  (range(P^s_{i+1}) ∩ V_i),

    and ``T_k(V)`` is split into its fiber components with the oblique
    fiber projectors.

    Raises
    ------
    NumericalIntersectionAmbiguous
        A rank or intersection decision had a singular value in
        ``[1e-10, 1e-6]`` (relative to the projector norm).
    """
    proj = _FiberProjectors(fibers)
    vb = v.basis
    s = v.dim
    for i in range(1, proj.ell + 1):
        pu = proj.unstable(i + 1) if i < proj.ell else np.eye(vb.shape[0])
        inter = (_intersect(vb, proj.stable_range(i + 1), f"step {i}")
                 if i < proj.ell else np.zeros((vb.shape[0], 0)))
        image = _range_basis(pu @ vb, max(1.0, np.linalg.norm(pu, 2)), f"step {i}")
        if image.shape[1] + inter.shape[1] != s:
            raise NumericalIntersectionAmbiguous(
                f"step {i}: dimensions {image.shape[1]} + {inter.shape[1]} != {s}")
        vb = orthonormalize(np.hstack([image, inter])).basis
    return _components(proj, vb, k, s)


def trace_space_direct(v: Subspace, fibers, k: int = 0) -> TraceSpace:
    """``T_k(V) = sum_i P_i (range(P^s_i) ∩ V)`` evaluated term by term."""
    proj = _FiberProjectors(fibers)
    vb = v.basis
    parts = []
    for i in range(1, proj.ell + 1):
        inter = vb if i == 1 else _intersect(vb, proj.stable_range(i), f"term {i}")
        if inter.shape[1]:
            parts.append(proj.fiber(i) @ inter)
    total = np.hstack(parts)
    b = _range_basis(total, 1.0, "direct sum")
    return _components(proj, b, k, v.dim)


def reduction_decay_check(bundles: BundleSet, v: Subspace, j_max: int,
                          k: int | None = None):
    """``[(j, angle(Phi(j,k) V, Phi(j,k) T_k(V)))]`` for ``j = k .. k + j_max``.

    Both subspaces are propagated with the stored matrices and
    re-orthonormalised after every step.  ``k`` defaults to the first
    time at which fibers are available.
    """
    k = bundles.k_min if k is None else k
    if k + j_max > bundles.matrices.shape[0]:
        raise HorizonExceedsFibers(
            f"need matrices up to {k + j_max}, have {bundles.matrices.shape[0]}")
    tr = trace_space_of(v, bundles.bases_at(k), k).subspace()
    x = np.stack([v.basis, tr.basis])
    out = []
    for j in range(k, k + j_max + 1):
        out.append((j, float(frame_angles(x[:1], x[1:])[0])))
        if j < k + j_max:
            x, _ = np.linalg.qr(bundles.matrices[j] @ x)
    return out
