import itertools
import math

import numpy as np
import pytest

from maxmarg import model
from maxmarg.logdomain import ZERO
from maxmarg.model import (ConfigError, PairChain, TripletModel, condition_on_observations, make_rng,
                           sample_tmm, simulate, validate)


def brute_joint(tmm, y):
    """p(x, u, y) summed over every (x, u) path by direct enumeration."""
    n = len(y)
    states = list(itertools.product(range(tmm.card_x), range(tmm.card_u)))
    total = 0.0
    for path in itertools.product(states, repeat=n):
        p = tmm.initial[path[0] + (y[0],)]
        for t in range(1, n):
            p *= tmm.transition[path[t - 1] + (y[t - 1],) + path[t] + (y[t],)]
        total += p
    return total


def test_sampled_rows_are_distributions():
    tmm = sample_tmm(2, 3, 2, 1.0, make_rng(0))
    assert tmm.initial.sum() == pytest.approx(1.0)
    rows = tmm.transition.reshape(tmm.n_states, -1).sum(axis=1)
    assert np.allclose(rows, 1.0)


def test_small_alpha_rows_still_normalized():
    tmm = sample_tmm(2, 2, 2, 1e-3, make_rng(1))
    assert np.allclose(tmm.transition.reshape(8, 8).sum(axis=1), 1.0)
    assert not np.isnan(tmm.transition).any()


def test_bad_parameters():
    with pytest.raises(ConfigError):
        sample_tmm(0, 2, 2, 1.0, make_rng(0))
    with pytest.raises(ConfigError):
        sample_tmm(2, 2, 2, 0.0, make_rng(0))


def test_sampling_is_deterministic():
    a = sample_tmm(2, 2, 2, 1.0, make_rng(5))
    b = sample_tmm(2, 2, 2, 1.0, make_rng(5))
    assert np.array_equal(a.transition, b.transition)
    ya = simulate(a, 20, make_rng(9))[2]
    yb = simulate(b, 20, make_rng(9))[2]
    assert np.array_equal(ya, yb)


@pytest.mark.parametrize("seed", range(5))
def test_conditioning_matches_enumeration(seed):
    rng = make_rng(seed)
    tmm = sample_tmm(2, 2, 3, 1.0, rng)
    y = simulate(tmm, 4, rng)[2]
    chain = condition_on_observations(tmm, y)
    assert chain.log_norm == pytest.approx(math.log(brute_joint(tmm, y)), abs=1e-12)
    assert validate(chain).ok


def test_observation_out_of_range():
    tmm = sample_tmm(2, 2, 2, 1.0, make_rng(0))
    with pytest.raises(ConfigError):
        condition_on_observations(tmm, [0, 2])


def test_zero_probability_observation_warns(caplog):
    init = np.zeros((1, 1, 2))
    init[0, 0, 0] = 1.0
    trans = np.zeros((1, 1, 2, 1, 1, 2))
    trans[0, 0, :, 0, 0, 0] = 1.0
    tmm = TripletModel(1, 1, 2, init, trans)
    chain = condition_on_observations(tmm, [1, 0])
    assert chain.log_norm == ZERO
    assert "zero probability" in caplog.text
    diag = validate(chain)
    assert not diag.ok and "zero" in diag.failures[0]


def test_validate_reports_nan_and_norm():
    c = PairChain(2, 2, 1, np.zeros((2, 1)), np.zeros((1, 2, 1, 2, 1)), 0.0)
    d = validate(c)
    assert not d.ok and "log_norm" in d.failures[0]
    steps = np.zeros((1, 2, 1, 2, 1))
    steps[0, 1, 0, 0, 0] = np.nan
    d = validate(PairChain(2, 2, 1, np.zeros((2, 1)), steps, 0.0))
    assert any("NaN" in f and "(0, 1, 0, 0, 0)" in f for f in d.failures)


def test_shape_mismatch_raises():
    with pytest.raises(ConfigError):
        PairChain(3, 2, 2, np.zeros((2, 2)), np.zeros((1, 2, 2, 2, 2)))


def test_json_round_trip(tmp_path):
    rng = make_rng(3)
    tmm = sample_tmm(2, 3, 2, 1.0, rng)
    y = simulate(tmm, 6, rng)[2]
    chain = condition_on_observations(tmm, y)
    model.save_json(tmm, tmp_path / "m.json")
    model.save_json(chain, tmp_path / "c.json")
    model.write_observations(y, tmp_path / "y.txt")
    t2 = model.load_tmm(tmp_path / "m.json")
    c2 = model.load_chain(tmp_path / "c.json")
    assert np.array_equal(t2.transition, tmm.transition)
    assert np.array_equal(c2.steps, chain.steps) and np.array_equal(c2.initial, chain.initial)
    assert c2.log_norm == chain.log_norm
    assert np.array_equal(model.read_observations(tmp_path / "y.txt"), y)


def test_json_encodes_zero_as_null(tmp_path):
    from maxmarg.fixtures import single_zero_process
    chain = single_zero_process(4).chain
    doc = chain.to_json()
    assert doc["initial_weight"][0][1] is None
    back = PairChain.from_json(doc)
    assert np.array_equal(back.steps, chain.steps)


def test_malformed_json():
    with pytest.raises(ConfigError):
        PairChain.from_json({"n": 2})
    with pytest.raises(ConfigError):
        TripletModel.from_json({"card_x": 2})
