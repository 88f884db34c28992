import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from thermodbar.gmeasure_lab import GFunction
from thermodbar.potential_lab import Potential

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def random_g(rng, N, depth, spread=1.0):
    return GFunction.from_log_table(N, depth, spread * rng.normal(size=N**depth))


def random_potential(rng, N, depth, scale=1.0):
    return Potential(N, depth, scale * rng.normal(size=N**depth))


@st.composite
def g_functions(draw, max_N=3, max_depth=3, same_shape_as=None):
    N = draw(st.integers(2, max_N))
    depth = draw(st.integers(1, max_depth))
    seed = draw(st.integers(0, 2**31 - 1))
    spread = draw(st.floats(0.0, 2.0))
    return random_g(np.random.default_rng(seed), N, depth, spread)


@st.composite
def g_pairs(draw, max_N=3, max_depth=3):
    N = draw(st.integers(2, max_N))
    dg = draw(st.integers(1, max_depth))
    dh = draw(st.integers(1, max_depth))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    return random_g(rng, N, dg), random_g(rng, N, dh)


@st.composite
def potentials(draw, max_N=3, max_depth=3):
    N = draw(st.integers(2, max_N))
    depth = draw(st.integers(1, max_depth))
    seed = draw(st.integers(0, 2**31 - 1))
    return random_potential(np.random.default_rng(seed), N, depth)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
