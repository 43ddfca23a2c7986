from __future__ import annotations

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from evqr.measures import DiscreteMeasure, Problem

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("EVQR_HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")


def random_weights(rng, k, spread=1.0):
    w = rng.uniform(1.0, 1.0 + spread, k)
    return w / w.sum()


def random_problem(rng, n=5, m=6, d_x=1, d_y=1, epsilon=0.5, scale=1.0) -> Problem:
    """A feasible random instance: x-atoms are Gaussian, so their second moment is a.s. invertible."""
    m = max(m, d_x + 1)
    u = rng.uniform(-1, 1, (n, d_y))
    x = rng.standard_normal((m, d_x))
    y = scale * rng.standard_normal((m, d_y))
    if d_x:
        y = y + x @ rng.standard_normal((d_x, d_y))
    mu = DiscreteMeasure(random_weights(rng, n), u)
    nu = DiscreteMeasure(random_weights(rng, m), np.column_stack([x, y]))
    return Problem(mu, nu, epsilon)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
