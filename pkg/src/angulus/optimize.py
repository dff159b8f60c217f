"""Derivative-free minimisers used for the angular-value searches.

Both wrap SciPy: a bounded Brent search (golden section plus parabolic
interpolation) on an interval and Nelder-Mead on the plane.  The
multi-start helpers run several independent searches and keep the best.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar

TOL = 1e-6
SIMPLEX_MAXITER = 500


def minimize_1d(f, a: float, b: float, tol: float = TOL):
    """Local minimiser of ``f`` on ``[a, b]``.

    Returns ``(t, f(t))``.  The endpoints are compared with the interior
    result since the bounded search never evaluates them exactly.
    """
    if not a < b:
        raise ValueError("need a < b")
    res = minimize_scalar(f, bounds=(a, b), method="bounded",
                          options={"xatol": tol * 1e-2})
    best_t, best_f = float(res.x), float(res.fun)
    for t in (a, b):
        ft = float(f(t))
        if ft < best_f:
            best_t, best_f = t, ft
    return best_t, best_f


def minimize_simplex(f, x0, tol: float = TOL, maxiter: int = SIMPLEX_MAXITER,
                     step: float = math.pi / 8, period: float | None = None):
    """Nelder-Mead from ``x0``; stops once the simplex is smaller than ``tol``.

    With ``period`` set, the minimiser is reported modulo ``period`` in
    every coordinate.
    """
    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0, x0 + step * np.eye(x0.size)])
    res = minimize(f, x0, method="Nelder-Mead",
                   options={"xatol": tol, "fatol": np.inf, "maxiter": maxiter,
                            "initial_simplex": simplex})
    x = np.asarray(res.x, dtype=float)
    if period is not None:
        x = np.mod(x, period)
    return x, float(res.fun)


def multistart_1d(f, a: float, b: float, starts: int = 8, tol: float = TOL):
    """Best of ``starts`` bounded searches on equal subintervals of ``[a, b]``."""
    edges = np.linspace(a, b, starts + 1)
    results = [minimize_1d(f, lo, hi, tol) for lo, hi in zip(edges[:-1], edges[1:])]
    return min(results, key=lambda r: r[1])


def multistart_simplex(f, period: float = math.pi, grid: int = 4, tol: float = TOL):
    """Best of Nelder-Mead runs from a ``grid x grid`` lattice of starts in ``[0, period)^2``."""
    centers = (np.arange(grid) + 0.5) * period / grid
    best = None
    for t1 in centers:
        for t2 in centers:
            x, fx = minimize_simplex(f, (t1, t2), tol=tol, step=period / (2 * grid),
                                     period=period)
            if best is None or fx < best[1]:
                best = (x, fx)
    return best
