import io
import math

import numpy as np
import pytest

from angulus import catalog_get
from angulus.bundles import (BlockBidiagonalSolver, ResolventPoints, choose_resolvent_points,
                             compute_bundles, compute_fiber_bundle, read_fiber_csv,
                             solve_block_subdivided, solve_impulse, window_starts,
                             write_fiber_csv)
from angulus.errors import FiberRankDeficient
from angulus.linalg import Subspace, principal_angle
from angulus.spectrum import SpectralInterval, SpectrumReport, compute_spectrum

from .conftest import pipeline
from .test_models import REQUIRED


def report(*ivs):
    return SpectrumReport(tuple(SpectralInterval(*iv) for iv in ivs), sum(iv[2] for iv in ivs))


def span(*cols):
    return Subspace(np.array(cols, dtype=float).T)


# -- resolvent points ------------------------------------------------------

def test_points_two_intervals():
    pts = choose_resolvent_points(report((3, 3, 1), (2, 2, 1)))
    assert pts.gamma == pytest.approx((6.0, math.sqrt(6.0), 1.0))
    assert pts.pair(1) == pytest.approx((6.0, math.sqrt(6.0)))


def test_points_single_interval():
    assert choose_resolvent_points(report((1, 1, 2))).gamma == (2.0, 0.5)


def test_points_strictly_inside_gaps():
    rep = report((3.0, 3.5, 1), (1.0, 2.0, 1), (0.2, 0.3, 1))
    g = choose_resolvent_points(rep).gamma
    assert g[0] > 3.5 and 2.0 < g[1] < 3.0 and 0.3 < g[2] < 1.0 and 0 < g[3] < 0.2


# -- block bidiagonal least squares ----------------------------------------

def test_block_solver_is_min_norm(rng):
    n, d = 6, 2
    s = rng.standard_normal((n, d, d))
    b = rng.standard_normal((n, d, 3))
    x = BlockBidiagonalSolver(s).solve(b)
    big = np.zeros((n * d, (n + 1) * d))
    for j in range(n):
        big[j * d:(j + 1) * d, j * d:(j + 1) * d] = -s[j]
        big[j * d:(j + 1) * d, (j + 1) * d:(j + 2) * d] = np.eye(d)
    want = np.linalg.lstsq(big, b.reshape(n * d, 3), rcond=None)[0]
    assert np.allclose(x.reshape((n + 1) * d, 3), want, atol=1e-12)


def test_zero_impulse_zero_response():
    model = catalog_get("diag23")
    res = solve_impulse(model, (6.0, math.sqrt(6.0)), 100, np.zeros(2), 0, 200)
    assert np.all(res.u == 0) and np.all(res.v == 0)


def test_window_starts_centre_and_clip():
    assert list(window_starts([50, 500, 1950], 200, 0, 2000)) == [0, 400, 1800]


# -- subdivided vs monolithic ----------------------------------------------

def _unit(x):
    x = x / np.linalg.norm(x)
    return x * np.sign(x[np.argmax(np.abs(x))])


@pytest.mark.parametrize("name,k", [("diag23", 200), ("rotated_diag", 200), ("rotated_diag", 70),
                                    ("normal_form", 333)])
def test_subdivided_matches_monolithic(name, k):
    model = catalog_get(name)
    spec = compute_spectrum(model, 400)
    gam = choose_resolvent_points(spec).pair(1)
    r = np.random.default_rng(1).standard_normal(2)
    mono = solve_impulse(model, gam, k, r, 0, 400)
    sub = solve_block_subdivided(model, gam, k, r, 0, 400)
    assert np.linalg.norm(_unit(mono.u_at(k)) - _unit(sub.u_at(k))) < 1e-8


def test_subdivided_bundle_matches_monolithic():
    model = catalog_get("rotated_diag")
    a = model.matrices(0, 1000)
    spec = compute_spectrum(model, 1000, matrices=a)
    mono = compute_bundles(model, spec, 1000, subinterval=None, matrices=a)
    sub = compute_bundles(model, spec, 1000, subinterval=200, matrices=a)
    for fm, fs in zip(mono.fibers, sub.fibers):
        worst = max(principal_angle(fm.at(k), fs.at(k)) for k in range(fm.k_min, fm.k_max + 1))
        assert worst < 1e-8


def test_subdivided_gap_enforced():
    with pytest.raises(ValueError):
        solve_block_subdivided(catalog_get("diag23"), (6.0, 2.4), 10, np.ones(2), 0, 400)


# -- fibers of known models ------------------------------------------------

def test_diag23_fibers():
    res = pipeline("diag23")
    e1, e2 = span([1, 0]), span([0, 1])
    f1, f2 = res.bundles.fibers
    assert max(principal_angle(f1.at(k), e2) for k in range(f1.k_min, f1.k_max + 1)) < 1e-8
    assert max(principal_angle(f2.at(k), e1) for k in range(f2.k_min, f2.k_max + 1)) < 1e-8


def test_random3d_fibers():
    res = pipeline("random3d")
    f1, f2 = res.bundles.fibers
    assert (f1.dim, f2.dim) == (1, 2)
    for k in (50, 1000, 1950):
        assert principal_angle(f1.at(k), span([0, 0, 1])) < 1e-8
        assert principal_angle(f2.at(k), span([1, 0, 0], [0, 1, 0])) < 1e-8


def test_param3d_fibers():
    res = pipeline("param3d", {"p": 0.5})
    f1, f2 = res.bundles.fibers
    assert (f1.dim, f2.dim) == (1, 2)
    for k in (50, 777, 1950):
        assert principal_angle(f1.at(k), span([0, 0, 1])) < 1e-6
        assert principal_angle(f2.at(k), span([1, 0, 0], [0, 1, 0])) < 1e-6


@pytest.mark.parametrize("name", ["diag23", "rotated_diag", "rotation", "normal_form",
                                  "param3d", "random3d", "henon2", "henon3"])
def test_invariance(name):
    res = pipeline(name, REQUIRED.get(name))
    for fib in res.bundles.fibers:
        assert fib.invariance_errors(res.bundles.matrices).max() < 1e-6


def test_invariance_at_range_boundary():
    res = pipeline("rotated_diag")
    for fib in res.bundles.fibers:
        err = fib.invariance_errors(res.bundles.matrices)
        assert err[0] < 1e-6 and err[-1] < 1e-6


@pytest.mark.parametrize("name", ["diag23", "reflection", "rotated_diag", "rotation",
                                  "normal_form", "block4", "param3d", "random3d",
                                  "counterexample1", "counterexample2", "henon2", "henon3",
                                  "oscillators"])
def test_completeness(name):
    m = 1000 if name == "oscillators" else 2000
    res = pipeline(name, REQUIRED.get(name), m=m)
    b = res.bundles
    assert sum(f.dim for f in b.fibers) == b.model.dim
    assert min(b.completeness(k) for k in range(b.k_min, b.k_max + 1, 25)) > 1e-6


@pytest.mark.parametrize("name", ["rotated_diag", "random3d", "henon2"])
def test_seed_independence(name):
    model = catalog_get(name, seed=0)
    a = model.matrices(0, 1000)
    spec = compute_spectrum(model, 1000, matrices=a)
    b1 = compute_bundles(model, spec, 1000, seed=1, matrices=a)
    b2 = compute_bundles(model, spec, 1000, seed=2, matrices=a)
    for f1, f2 in zip(b1.fibers, b2.fibers):
        assert max(principal_angle(f1.at(k), f2.at(k)) for k in range(f1.k_min, f1.k_max + 1, 7)) < 1e-6


def test_thread_count_does_not_change_result():
    model = catalog_get("henon3")
    a = model.matrices(0, 800)
    spec = compute_spectrum(model, 800, matrices=a)
    one = compute_bundles(model, spec, 800, seed=5, matrices=a, workers=1)
    many = compute_bundles(model, spec, 800, seed=5, matrices=a, workers=3)
    for f1, f2 in zip(one.fibers, many.fibers):
        assert np.array_equal(f1.bases, f2.bases)


def test_scaled_dynamics_same_fibers():
    model = catalog_get("rotated_diag")
    a = model.matrices(0, 800)
    spec = compute_spectrum(model, 800, matrices=a)
    base = compute_bundles(model, spec, 800, matrices=a)
    c = 0.37
    scaled_spec = compute_spectrum(model.scaled(c), 800, matrices=c * a)
    for iv, sv in zip(spec.intervals, scaled_spec.intervals):
        assert sv.lower == pytest.approx(c * iv.lower, rel=1e-12)
    scaled = compute_bundles(model.scaled(c), scaled_spec, 800, matrices=c * a)
    for f1, f2 in zip(base.fibers, scaled.fibers):
        assert max(principal_angle(f1.at(k), f2.at(k)) for k in range(f1.k_min, f1.k_max + 1, 11)) < 1e-8


def test_wrong_dimension_raises():
    # claims a 2-D fiber for the isolated exponent 3 of diag23
    model = catalog_get("diag23")
    with pytest.raises(FiberRankDeficient):
        compute_fiber_bundle(model, report((3, 3, 2)), 1, 0, 300,
                             points=ResolventPoints((6.0, 2.5)))


def test_fiber_csv_roundtrip():
    res = pipeline("random3d")
    buf = io.StringIO()
    rows = write_fiber_csv(res.bundles, buf)
    b = res.bundles
    assert rows == (b.k_max - b.k_min + 1) * 3
    parsed = read_fiber_csv(buf.getvalue())
    for k in (b.k_min, 1234, b.k_max):
        for fib in b.fibers:
            assert np.array_equal(parsed[(k, fib.interval_index)], fib.basis(k))
