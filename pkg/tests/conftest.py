import numpy as np
import pytest

from affdiff import shapes
from affdiff.pipeline import laplacian_spectrum


@pytest.fixture(scope="session")
def sphere3():
    return shapes.icosphere(3)


@pytest.fixture(scope="session")
def blob():
    return shapes.bumped_blob(seed=3, subdivisions=3)


@pytest.fixture(scope="session")
def blob_spectrum(blob):
    return laplacian_spectrum(blob, "equi-affine", k=40)


@pytest.fixture(scope="session")
def small_spectrum():
    # ~160 vertices: cheap enough for dense oracles
    mesh = shapes.bumped_blob(seed=5, subdivisions=2)
    return mesh, laplacian_spectrum(mesh, "euclidean", k=30)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------- acceptance summary


class CriterionRecord:
    def __init__(self, store, number, title):
        self.store, self.number, self.title = store, number, title
        store[number] = (title, False, "did not complete")

    def done(self, ok, detail):
        self.store[self.number] = (self.title, bool(ok), detail)
        return ok


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def criterion(request):
    def make(number, title):
        return CriterionRecord(request.config._acceptance, number, title)
    return make


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(results):
        title, ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {title}; {detail}")
