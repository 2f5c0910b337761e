import sys

import numpy as np
import pytest

from bmvs import _accel
from bmvs.core import DataSet


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    prev = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_data(rng, n=30, p=5, q=2, active=(0,), coef=2.0, noise=1.0):
    X = rng.standard_normal((n, p))
    beta = np.zeros((p, q))
    beta[list(active)] = coef
    Y = X @ beta + noise * rng.standard_normal((n, q))
    return DataSet(X, Y)


@pytest.fixture
def small_data(rng):
    return make_data(rng)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(results):
        terminalreporter.write_line(f"CRITERION {num}: {'PASS' if ok else 'FAIL'}  {detail}")
