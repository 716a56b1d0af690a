import numpy as np
import pytest

from fsir import smoother
from fsir.simulation import SimScenario, generate_predictors, generate_response

BACKENDS = smoother.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    """Each available leave-one-out kernel implementation in turn."""
    return BACKENDS[request.param]


def sim_data(model_id="iii", n=100, R=0.1, seed=0):
    data = generate_predictors(SimScenario(model_id, n, R, seed=seed))
    return data.with_responses(generate_response(model_id, data, R, seed + 1_000_003))


@pytest.fixture(scope="session")
def data_iii():
    return sim_data("iii", 100, 0.1, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
