import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rexsub.covariance import CovarianceParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_params(rng, nus=(0.5, 1.5)):
    return CovarianceParams(
        nu=float(rng.choice(nus)),
        phi=float(rng.uniform(0.05, 0.5)),
        sigma2=float(rng.uniform(0.5, 2.0)),
        tau2=float(rng.uniform(0.0, 0.3)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_RESULTS

    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
