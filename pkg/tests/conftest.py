import numpy as np
import pytest
from hypothesis import settings

from spfq.sampling import design_scheme, geem_for_scheme

settings.register_profile("spfq", deadline=None, max_examples=25)
settings.load_profile("spfq")


@pytest.fixture(scope="session")
def scheme():
    return design_scheme(8000.0, 4, (3, 5, 9, 11))


@pytest.fixture(scope="session")
def geem(scheme):
    return geem_for_scheme(scheme, alpha=0.5, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def unit_vectors(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
