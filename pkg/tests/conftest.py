import sys

import numpy as np
import pytest

from accel_ode.objectives import (make_log_sum_exp, make_logistic, make_problem, make_quadratic,
                                  make_scalar_quadratic)


@pytest.fixture(scope="session")
def quad():
    return make_quadratic(10, 0.01, 1.0, seed=0)


@pytest.fixture(scope="session")
def quad_ill():
    return make_quadratic(10, 1e-4, 1.0, seed=0)


@pytest.fixture(scope="session")
def logistic():
    return make_logistic(50, 5, 0.01, seed=0)


@pytest.fixture(scope="session")
def lse():
    return make_log_sum_exp(5, 1.0, seed=0)


@pytest.fixture(scope="session")
def scalar():
    return make_scalar_quadratic(1.0)


@pytest.fixture(scope="session")
def all_objectives(quad, quad_ill, logistic, lse, scalar):
    return {"quad": quad, "quad_ill": quad_ill, "logistic": logistic, "lse": lse, "scalar": scalar}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def problem_at(obj, x0=None):
    return make_problem(obj, x0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
