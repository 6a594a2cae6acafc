import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from maxmarg.model import condition_on_observations, make_rng, sample_tmm, simulate

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_chain(seed, n=None, cx=None, cu=None, cy=2, alpha=1.0, n_range=(4, 10), card_range=(2, 3)):
    """Sampled model conditioned on a simulated observation sequence."""
    rng = make_rng(seed)
    cx = cx or int(rng.integers(card_range[0], card_range[1] + 1))
    cu = cu or int(rng.integers(card_range[0], card_range[1] + 1))
    n = n or int(rng.integers(n_range[0], n_range[1] + 1))
    tmm = sample_tmm(cx, cu, cy, alpha, rng)
    _, _, y = simulate(tmm, n, rng)
    return condition_on_observations(tmm, y)


@pytest.fixture
def chain_factory():
    return random_chain


# acceptance lines are collected here and printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def uniform_chain(n, cx, cu):
    """Every (x, u) path has the same weight."""
    from maxmarg.model import PairChain
    w = -np.log(cx * cu)
    init = np.full((cx, cu), w)
    steps = np.full((n - 1, cx, cu, cx, cu), w)
    return PairChain(n, cx, cu, init, steps, 0.0)
