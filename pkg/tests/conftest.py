import numpy as np
import pytest
from hypothesis import settings, strategies as st

from lenscal.geometry import PiecewiseSpherical

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_profile(rng: np.random.Generator, n_segments: int | None = None,
                   mode: str = "paraxial") -> PiecewiseSpherical:
    """Random contiguous profile with radii in [1 um, 10 cm] and boundaries in [1 nm, 1 um]."""
    n = int(rng.integers(1, 5)) if n_segments is None else n_segments
    radii = 10.0 ** rng.uniform(-6, -1, n)
    heights = np.sort(10.0 ** rng.uniform(-9, -6, n - 1))
    if n > 1:
        heights = np.maximum.accumulate(heights + np.arange(n - 1) * 1e-12)
    return PiecewiseSpherical.from_heights(radii, heights, mode)


@st.composite
def profiles(draw, max_segments: int = 4):
    n = draw(st.integers(1, max_segments))
    radii = draw(st.lists(st.floats(1e-6, 1e-1), min_size=n, max_size=n))
    gaps = draw(st.lists(st.floats(1e-9, 1e-6), min_size=n - 1, max_size=n - 1))
    return PiecewiseSpherical.from_heights(radii, list(np.cumsum(gaps)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
