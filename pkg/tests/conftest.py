import cmath
import math

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from sqfilter import SqueezingParams, SystemModel
from sqfilter.system import SIGMA_MINUS, SIGMA_Z

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

DEMO_M = 0.8 * cmath.exp(1j * math.pi / 4)


@st.composite
def squeezing_params(draw, max_n=5.0, max_frac=0.99):
    n = draw(st.floats(0.0, max_n))
    frac = draw(st.floats(0.0, max_frac))
    phase = draw(st.floats(0.0, 2 * math.pi))
    return SqueezingParams(n, frac * math.sqrt(n * (n + 1)) * cmath.exp(1j * phase))


bv_triples = st.tuples(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.0, 2 * math.pi))


def random_qubit_model(rng, bath=None):
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    L = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    if bath is None:
        n = rng.uniform(0, 3)
        bath = SqueezingParams(n, 0.9 * math.sqrt(n * (n + 1)) * cmath.exp(1j * rng.uniform(0, 2 * math.pi)))
    return SystemModel(g + g.conj().T, L, bath)


def random_state(rng, d=2):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def demo_model():
    return SystemModel(0.5 * SIGMA_Z, SIGMA_MINUS, SqueezingParams(1.0, DEMO_M))


@pytest.fixture
def excited():
    return np.diag([0.0, 1.0]).astype(complex)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[number] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {verdict}: {title} ({detail})")
