import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def textured_image():
    """A natural photo crop; falls back to smooth noise when the corpus extras are missing."""
    try:
        from fpcnet.corpus import load_photo

        return load_photo("astronaut")[:, 100:228, 100:228].copy()
    except ImportError:
        from scipy import ndimage

        g = np.random.default_rng(3).random((3, 128, 128))
        return ndimage.gaussian_filter(g, (0, 2, 2))


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
