import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from tumbletrack import shapes
from tumbletrack.icp import SurfaceModel

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


unit_quaternions = (
    st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=4, max_size=4)
    .filter(lambda v: np.linalg.norm(v) > 0.1)
    .map(_unit)
)
vectors3 = st.lists(st.floats(-10.0, 10.0, allow_nan=False), min_size=3, max_size=3).map(np.array)


@pytest.fixture(scope="session")
def satellite_model():
    return SurfaceModel(shapes.satellite())


@pytest.fixture(scope="session")
def small_model():
    return SurfaceModel(shapes.skew_box(spacing=0.06))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
