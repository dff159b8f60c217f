"""Catalog of matrix sequences ``u_{n+1} = A_n u_n``.

Every model is a :class:`SystemModel` whose generator maps a time index
``n >= 0`` to the matrix ``A_n``.  Generators are random access: the
random model keys a counter-based generator by ``(seed, n)`` and the
variational models cache their trajectory and extend it on demand.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import Diverged, MissingParam, UnexpectedParam, UnknownModel

DIVERGENCE_RADIUS = 1e6
EULER_STEP = 0.01
EULER_SUBSTEPS = 100


def rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def rotation12(phi: float) -> np.ndarray:
    """Rotation in the (x1, x2)-plane of R^3."""
    r = np.eye(3)
    r[:2, :2] = rotation(phi)
    return r


def normal_form_matrix(rho: float, phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s / rho], [rho * s, c]])


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray
    origin_map: str


@dataclass(eq=False)
class SystemModel:
    name: str
    dim: int
    params: dict
    generator: Callable[[int], np.ndarray]
    seed: int | None = None
    trajectory: Callable[[int], Trajectory] | None = field(default=None, repr=False)

    def __call__(self, n: int) -> np.ndarray:
        return self.generator(n)

    def matrices(self, start: int, stop: int) -> np.ndarray:
        """Stack ``A_start, ..., A_{stop-1}`` into an array of shape ``(stop-start, d, d)``."""
        if stop <= start:
            return np.zeros((0, self.dim, self.dim))
        return np.stack([self.generator(n) for n in range(start, stop)])

    def scaled(self, c: float) -> "SystemModel":
        """The model ``c * A_n``."""
        base = self.generator
        return SystemModel(
            name=self.name,
            dim=self.dim,
            params={**self.params, "scale": c * self.params.get("scale", 1.0)},
            generator=lambda n: c * base(n),
            seed=self.seed,
            trajectory=self.trajectory,
        )


# ---------------------------------------------------------------------------
# nonlinear maps and their Jacobians
# ---------------------------------------------------------------------------

def henon2_map(x):
    return np.array([1.0 + x[1] - 1.4 * x[0] ** 2, 0.3 * x[0]])


def henon2_jacobian(x):
    return np.array([[-2.8 * x[0], 1.0], [0.3, 0.0]])


def henon3_map(x):
    return np.array([1.0 + x[2] - 1.4 * x[0] ** 2, x[0] + x[2], 0.2 * x[0] + 0.1 * x[1]])


def henon3_jacobian(x):
    return np.array([[-2.8 * x[0], 0.0, 1.0], [1.0, 0.0, 1.0], [0.2, 0.1, 0.0]])


def oscillator_field(x, lam, p1=0.1, p2=0.55):
    """Vector field of two diffusively coupled nonlinear oscillators."""
    x1, x2, x3, x4 = x
    c = lam * (x1 + x2 - x3 - x4)
    r12 = x1 * x1 + x2 * x2
    r34 = x3 * x3 + x4 * x4
    return np.array([
        x1 + p1 * x2 - r12 * x1 - c,
        -p1 * x1 + x2 - r12 * x2 - c,
        x3 + p2 * x4 - r34 * x3 + c,
        -p2 * x3 + x4 - r34 * x4 + c,
    ])


def oscillator_field_jacobian(x, lam, p1=0.1, p2=0.55):
    x1, x2, x3, x4 = x
    jac = np.array([
        [1 - 3 * x1 * x1 - x2 * x2, p1 - 2 * x1 * x2, 0.0, 0.0],
        [-p1 - 2 * x1 * x2, 1 - x1 * x1 - 3 * x2 * x2, 0.0, 0.0],
        [0.0, 0.0, 1 - 3 * x3 * x3 - x4 * x4, p2 - 2 * x3 * x4],
        [0.0, 0.0, -p2 - 2 * x3 * x4, 1 - x3 * x3 - 3 * x4 * x4],
    ])
    coupling = lam * np.array([1.0, 1.0, -1.0, -1.0])
    jac[:2] -= coupling[None, :]
    jac[2:] += coupling[None, :]
    return jac


def euler_one_flow(x, lam, p1=0.1, p2=0.55):
    """Time-1 map of the oscillator ODE by 100 explicit Euler steps of size 0.01.

    Returns the image and the Jacobian of the discrete map, accumulated as
    the product of the per-step Jacobians ``I + h DG`` along the Euler
    polygon.
    """
    if lam < 0:
        raise ValueError("coupling lambda must be nonnegative")
    y = np.array(x, dtype=float)
    jac = np.eye(4)
    eye = np.eye(4)
    h = EULER_STEP
    for _ in range(EULER_SUBSTEPS):
        step_jac = eye + h * oscillator_field_jacobian(y, lam, p1, p2)
        y = y + h * oscillator_field(y, lam, p1, p2)
        jac = step_jac @ jac
    return y, jac


class _OrbitCache:
    """Lazily extended orbit ``xi_0, xi_1, ...`` of a map, with Jacobians."""

    def __init__(self, step, x0, name):
        self._step = step
        self._points = [np.array(x0, dtype=float)]
        self._jacs = []
        self._name = name
        self._lock = threading.Lock()

    def _extend(self, n):
        with self._lock:
            while len(self._jacs) <= n:
                x = self._points[len(self._jacs)]
                image, jac = self._step(x)
                if not np.all(np.isfinite(image)) or np.linalg.norm(image) > DIVERGENCE_RADIUS:
                    raise Diverged(
                        f"{self._name}: orbit left the ball of radius {DIVERGENCE_RADIUS:g} "
                        f"at step {len(self._jacs) + 1}"
                    )
                self._jacs.append(jac)
                self._points.append(image)

    def jacobian(self, n):
        if n < 0:
            raise IndexError("time index must be nonnegative")
        if n >= len(self._jacs):
            self._extend(n)
        return self._jacs[n]

    def trajectory(self, m):
        if m > 0:
            self._extend(m - 1)
        return Trajectory(points=np.array(self._points[: m + 1]), origin_map=self._name)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

_REQUIRED = object()


def _merge_params(name, defaults, given):
    unknown = set(given) - set(defaults)
    if unknown:
        raise UnexpectedParam(f"model {name!r} has no parameter(s) {sorted(unknown)}; "
                              f"known: {sorted(defaults)}")
    params = {}
    for key, default in defaults.items():
        if key in given:
            params[key] = float(given[key])
        elif default is _REQUIRED:
            raise MissingParam(f"model {name!r} requires parameter {key!r}")
        else:
            params[key] = float(default)
    return params


def _diag23(p, seed):
    a = np.diag([2.0, 3.0])
    return 2, lambda n: a.copy()


def _reflection(p, seed):
    c, s = math.cos(p["phi"]), math.sin(p["phi"])
    a = np.array([[c, s], [s, -c]])
    return 2, lambda n: a.copy()


def _rotated_diag(p, seed):
    phi = p["phi"]
    core = np.diag([2.0, 3.0])
    return 2, lambda n: rotation((n + 1) * phi) @ core @ rotation(-n * phi)


def _rotation(p, seed):
    phi = p["phi"]
    return 2, lambda n: rotation(n * phi)


def _normal_form(p, seed):
    a = normal_form_matrix(p["rho"], p["phi"])
    return 2, lambda n: a.copy()


def _block4(p, seed):
    a = np.zeros((4, 4))
    a[:2, :2] = normal_form_matrix(1.0, 0.5)
    a[:2, 2:] = np.eye(2)
    a[2:, 2:] = p["eta"] * normal_form_matrix(0.5, 1.4)
    return 4, lambda n: a.copy()


def _param3d(p, seed):
    phi = p["phi"]
    core = np.diag([0.5, p["p"], 3.0])
    return 3, lambda n: rotation12((n + 1) * phi) @ core @ rotation12(-n * phi)


def _random3d(p, seed):
    phi = p["phi"]
    b1 = np.zeros((3, 3))
    b1[:2, :2] = 2.0 * rotation(phi)
    b1[2, 2] = 3.0
    b2 = np.diag([1.0, 1.0, 5.0])
    key = 0 if seed is None else int(seed)

    def gen(n):
        # counter-based: the draw for index n does not depend on earlier draws
        bits = np.random.Philox(key=key, counter=[n, 0, 0, 0]).random_raw()
        return (b1 if bits & 1 else b2).copy()

    return 3, gen


def counterexample1_index(n: int) -> int:
    """0 where the first rotation is used, 1 otherwise."""
    if n == 0:
        return 0
    ell = 1
    while 2 ** (2 * ell - 1) <= n:
        if n <= 2 ** (2 * ell) - 1:
            return 0
        ell += 1
    return 1


def counterexample2_index(n: int) -> int:
    """0 on the blocks [2*2^l - 4, 3*2^l - 5], l >= 1, and 1 otherwise."""
    ell = 1
    while 2 * 2 ** ell - 4 <= n:
        if n <= 3 * 2 ** ell - 5:
            return 0
        ell += 1
    return 1


def _counterexample1(p, seed):
    mats = (rotation(p["phi0"]), rotation(p["phi1"]))
    return 2, lambda n: mats[counterexample1_index(n)].copy()


def _counterexample2(p, seed):
    mats = (np.diag([-1.0, 1.0]), np.diag([1.0, 0.5]))
    return 2, lambda n: mats[counterexample2_index(n)].copy()


def _henon(dim, fmap, fjac, name):
    def build(p, seed):
        x0 = [p[f"x{i + 1}"] for i in range(dim)]
        orbit = _OrbitCache(lambda x: (fmap(x), fjac(x)), x0, name)
        return dim, orbit.jacobian, orbit.trajectory
    return build


def _oscillators(p, seed):
    lam, p1, p2 = p["lambda"], p["p1"], p["p2"]
    x0 = [p[f"x{i + 1}"] for i in range(4)]
    orbit = _OrbitCache(lambda x: euler_one_flow(x, lam, p1, p2), x0, "oscillators_flow")
    return 4, orbit.jacobian, orbit.trajectory


@dataclass(frozen=True)
class CatalogEntry:
    builder: Callable
    defaults: dict
    description: str


CATALOG: dict[str, CatalogEntry] = {
    "diag23": CatalogEntry(_diag23, {}, "A_n = diag(2, 3)"),
    "reflection": CatalogEntry(_reflection, {"phi": 1 / 3}, "reflection [[cos, sin], [sin, -cos]]"),
    "rotated_diag": CatalogEntry(_rotated_diag, {"phi": 1 / 3},
                                 "T_{(n+1)phi} diag(2, 3) T_{-n phi}"),
    "rotation": CatalogEntry(_rotation, {"phi": 1 / 3}, "A_n = T_{n phi}"),
    "normal_form": CatalogEntry(_normal_form, {"rho": 1 / 7, "phi": 1 / 3},
                                "autonomous normal form A(rho, phi)"),
    "block4": CatalogEntry(_block4, {"eta": 1.2},
                           "[[A(1, 1/2), I], [0, eta A(1/2, 1.4)]]"),
    "param3d": CatalogEntry(_param3d, {"p": _REQUIRED, "phi": 1 / 3},
                            "T12_{(n+1)phi} diag(1/2, p, 3) T12_{-n phi}"),
    "random3d": CatalogEntry(_random3d, {"phi": 0.2}, "A_n in {B1, B2} i.i.d. uniform"),
    "counterexample1": CatalogEntry(_counterexample1, {"phi0": _REQUIRED, "phi1": _REQUIRED},
                                    "rotations by phi0 / phi1 on dyadic blocks"),
    "counterexample2": CatalogEntry(_counterexample2, {},
                                    "diag(-1, 1) / diag(1, 1/2) on dyadic blocks"),
    "henon2": CatalogEntry(_henon(2, henon2_map, henon2_jacobian, "henon2"),
                           {"x1": -1.202, "x2": 0.3713},
                           "variational equation along a Henon orbit"),
    "henon3": CatalogEntry(_henon(3, henon3_map, henon3_jacobian, "henon3"),
                           {"x1": 0.2, "x2": 0.1, "x3": 0.0},
                           "variational equation along a 3-D Henon-type orbit"),
    "oscillators": CatalogEntry(_oscillators,
                                {"lambda": _REQUIRED, "p1": 0.1, "p2": 0.55,
                                 "x1": 1.0, "x2": 0.0, "x3": 1.0, "x4": 0.0},
                                "variational equation of the Euler 1-flow of coupled oscillators"),
}


def catalog_get(name: str, params: dict | None = None, seed: int | None = None) -> SystemModel:
    """Build a catalog model by name.

    Raises
    ------
    UnknownModel
        ``name`` is not in :data:`CATALOG`.
    MissingParam
        A parameter without default was not supplied.
    """
    try:
        entry = CATALOG[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; available: {', '.join(CATALOG)}") from None
    p = _merge_params(name, entry.defaults, params or {})
    built = entry.builder(p, seed)
    dim, gen = built[0], built[1]
    traj = built[2] if len(built) > 2 else None
    return SystemModel(name=name, dim=dim, params=p, generator=gen, seed=seed, trajectory=traj)


_VARIATIONAL = {"henon2": "henon2", "henon3": "henon3", "oscillators_flow": "oscillators"}


def variational_sequence(map_name: str, x0, m: int, params: dict | None = None):
    """Orbit of a nonlinear map and the matrix sequence ``A_n = DF(xi_n)``.

    ``map_name`` is one of ``henon2``, ``henon3``, ``oscillators_flow``; for
    the latter ``params`` must contain ``lambda``.  The orbit is computed
    eagerly for ``m`` steps so that divergence is reported here.
    """
    if map_name not in _VARIATIONAL:
        raise UnknownModel(f"unknown map {map_name!r}; available: {', '.join(_VARIATIONAL)}")
    if m < 1:
        raise ValueError("orbit length must be at least 1")
    catalog_name = _VARIATIONAL[map_name]
    p = dict(params or {})
    for i, xi in enumerate(np.asarray(x0, dtype=float)):
        p[f"x{i + 1}"] = xi
    model = catalog_get(catalog_name, p)
    traj = model.trajectory(m)
    return model, traj
