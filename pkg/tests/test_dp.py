import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_chain, uniform_chain
from maxmarg import dp, oracle
from maxmarg.fixtures import figure4_chain
from maxmarg.logdomain import lse
from maxmarg.model import ConfigError


def forward_path_mass(chain, path):
    """Forward recursion over u, independent of the backward one in dp."""
    a = chain.initial[path[0]].copy()
    for t in range(1, chain.n):
        a = lse(a[:, None] + chain.steps[t - 1][path[t - 1], :, path[t], :], axis=0)
    return float(lse(a))


@given(st.integers(0, 10_000))
def test_path_mass_forward_equals_backward(seed):
    c = random_chain(seed, n_range=(2, 7))
    rng = np.random.default_rng(seed)
    path = tuple(int(v) for v in rng.integers(0, c.card_x, c.n))
    assert dp.path_mass(c, path) == pytest.approx(forward_path_mass(c, path), abs=1e-9)


@given(st.integers(0, 10_000))
def test_prefix_masses_partition(seed):
    c = random_chain(seed, n_range=(2, 6))
    root = dp.root(c)
    assert root.prefix_mass == pytest.approx(c.log_norm, abs=1e-9)
    s = root
    rng = np.random.default_rng(seed)
    for _ in range(c.n):
        kids = [dp.extend(s, x, c) for x in range(c.card_x)]
        assert float(lse(np.array([k.prefix_mass for k in kids]))) == pytest.approx(s.prefix_mass, abs=1e-9)
        s = kids[int(rng.integers(c.card_x))]
    assert s.prefix_mass == pytest.approx(dp.path_mass(c, s.prefix), abs=1e-9)


def test_prefix_mass_matches_enumeration():
    c = random_chain(7, n=5)
    leaves = oracle.leaf_masses(c)
    for prefix in [(0,), (1, 0), (0, 1, 1)]:
        want = float(lse(leaves[prefix].reshape(-1)))
        assert dp.state_for(c, prefix).prefix_mass == pytest.approx(want, abs=1e-9)


def test_truncate_returns_parent():
    c = random_chain(1, n=4)
    s = dp.state_for(c, (1, 0))
    assert s.truncate().prefix == (1,)
    with pytest.raises(IndexError):
        dp.root(c).truncate()


def test_extend_errors():
    c = random_chain(1, n=3, cx=2)
    with pytest.raises(IndexError):
        dp.extend(dp.root(c), 2, c)
    with pytest.raises(IndexError):
        dp.extend(dp.state_for(c, (0, 0, 0)), 0, c)
    with pytest.raises(ConfigError):
        dp.path_mass(c, (0, 0))


def test_uniform_chain_masses():
    c = uniform_chain(4, 2, 3)
    assert dp.total_mass(c) == pytest.approx(0.0, abs=1e-12)
    assert dp.path_mass(c, (0, 1, 1, 0)) == pytest.approx(-4 * math.log(2), abs=1e-12)


def test_figure4_prefix_masses():
    fx = figure4_chain()
    for prefix, want in fx.manifest["prefix_mass"].items():
        assert math.exp(dp.state_for(fx.chain, prefix).prefix_mass) == pytest.approx(want, abs=1e-12)


def test_joint_viterbi_directions_agree():
    for seed in range(10):
        c = random_chain(seed)
        xb, ub, wb = dp.joint_viterbi(c)
        xf, uf, wf = dp.joint_viterbi_forward(c)
        assert wb == pytest.approx(wf, abs=1e-9)


def test_joint_viterbi_is_joint_max():
    c = random_chain(3, n=4, cx=2, cu=2)
    best = -np.inf
    states = list(itertools.product(range(2), range(2)))
    for path in itertools.product(states, repeat=4):
        w = c.initial[path[0]]
        for t in range(1, 4):
            w = w + c.steps[t - 1][path[t - 1] + path[t]]
        best = max(best, w)
    assert dp.joint_viterbi(c)[2] == pytest.approx(best, abs=1e-12)


def test_smoothed_marginals_match_enumeration():
    c = random_chain(11, n=5)
    leaves = np.exp(oracle.leaf_masses(c) - c.log_norm)
    marg = dp.smoothed_marginals(c)
    for t in range(c.n):
        axes = tuple(i for i in range(c.n) if i != t)
        assert np.allclose(marg[t], leaves.sum(axis=axes), atol=1e-12)
    path, _ = dp.pmap_path(c)
    assert path == tuple(int(v) for v in np.argmax(marg, axis=1))
