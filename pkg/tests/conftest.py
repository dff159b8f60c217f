import functools

import numpy as np
import pytest

from angulus import catalog_get, run
from angulus.linalg import Subspace
from angulus.pipeline import PipelineSettings


@functools.lru_cache(maxsize=None)
def _pipeline(name, params, seed, m, subinterval):
    model = catalog_get(name, dict(params), seed)
    return run(model, PipelineSettings(m=m, seed=seed or 0, subinterval=subinterval))


def pipeline(name, params=None, seed=0, m=2000, subinterval=200):
    """Shared, cached pipeline result; keeps the expensive runs to one per session."""
    key = tuple(sorted((params or {}).items()))
    return _pipeline(name, key, seed, m, subinterval)


def random_subspace(rng, d, s):
    q, _ = np.linalg.qr(rng.standard_normal((d, s)))
    return Subspace(q)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, summary line); filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num][1])
