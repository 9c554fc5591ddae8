import os

import hypothesis
import numpy as np
import pytest
from scipy.optimize import minimize

from sparse_levelset.operator import Dictionary

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("dev", max_examples=50, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-size acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_path():
    return os.path.join(DATA_DIR, "tiny_2x3.txt")


@pytest.fixture
def tiny_dict():
    """D = [[1, 0, 0], [0, 1, 0]]."""
    return Dictionary(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


@pytest.fixture
def row_dict():
    """The 1 x 2 dictionary D = [[1, 0]]."""
    return Dictionary(np.array([[1.0, 0.0]]))


@pytest.fixture
def random_dict():
    rng = np.random.default_rng(7)
    return Dictionary(rng.standard_normal((6, 10)))


@pytest.fixture
def nu_oracle():
    """Dense least-squares reference for nu(tau) on small problems.

    Splits x = u - v with u, v >= 0 and sum(u + v) <= tau, minimizes
    0.5 * ||y - D x||^2 with SLSQP and returns ||y - D x||_2.
    """

    def solve(matrix, y, tau):
        m, n = matrix.shape
        A = np.hstack([matrix, -matrix])

        def fun(z):
            r = y - A @ z
            return 0.5 * float(r @ r)

        def jac(z):
            return -A.T @ (y - A @ z)

        constraint = {"type": "ineq", "fun": lambda z: tau - np.sum(z), "jac": lambda z: -np.ones(2 * n)}
        result = minimize(fun, np.zeros(2 * n), jac=jac, method="SLSQP", bounds=[(0.0, None)] * (2 * n),
                          constraints=[constraint], options={"ftol": 1e-15, "maxiter": 1000})
        return float(np.linalg.norm(y - A @ result.x))

    return solve
