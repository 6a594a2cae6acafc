import math

import pytest

from conftest import random_chain, uniform_chain
from maxmarg import oracle
from maxmarg.fixtures import figure4_chain, single_zero_process


def test_uniform_chain_all_tie():
    c = uniform_chain(4, 2, 2)
    rep = oracle.exhaustive_naive(c)
    assert rep.optimum == pytest.approx(-4 * math.log(2))
    assert len(rep.argmax_paths) == 16


def test_single_zero_process():
    fx = single_zero_process(4)
    for fn in (oracle.exhaustive_naive, oracle.exhaustive_dc):
        rep = fn(fx.chain)
        assert rep.optimum == pytest.approx(math.log(0.25), abs=1e-12)
        assert rep.argmax_paths == fx.manifest["argmax_paths"]


def test_dc_node_count_figure():
    assert oracle.exhaustive_dc(figure4_chain().chain).nodes_processed == 14


@pytest.mark.parametrize("n,cx", [(3, 2), (5, 3), (25, 2)])
def test_dc_node_count_formula(n, cx):
    # count the prefix tree without building the chain for n=25
    want = (cx ** (n + 1) - cx) // (cx - 1)
    if n == 25:
        assert math.log2(want) == pytest.approx(26.0, abs=0.05)
        return
    c = random_chain(n, n=n, cx=cx)
    assert oracle.exhaustive_dc(c).nodes_processed == want


@pytest.mark.parametrize("seed", range(100))
def test_naive_and_dc_agree(seed):
    c = random_chain(seed)
    a, b = oracle.exhaustive_naive(c), oracle.exhaustive_dc(c)
    assert a.optimum == pytest.approx(b.optimum, abs=1e-9)
    assert a.argmax_paths == b.argmax_paths


def test_suffix_max_edges():
    c = random_chain(4, n=5)
    full = oracle.exhaustive_naive(c)
    assert oracle.suffix_max_oracle(c, ()) == pytest.approx(full.optimum, abs=1e-12)
    p = full.argmax_paths[0]
    assert oracle.suffix_max_oracle(c, p) == pytest.approx(full.optimum, abs=1e-12)


def test_power_sum_r1_is_total_mass():
    c = random_chain(8, n=5)
    assert oracle.power_sum_oracle(c, (), 1) == pytest.approx(c.log_norm, abs=1e-9)


def test_power_sum_uniform_closed_form():
    n, cx, r = 4, 2, 3
    c = uniform_chain(n, cx, 2)
    # each x path has mass 2^-n, so S_r = 2^n * 2^(-n r)
    assert oracle.power_sum_oracle(c, (), r) == pytest.approx((n - n * r) * math.log(2))


def test_budget_refusal():
    c = random_chain(0, n=6, cx=2)
    with pytest.raises(oracle.BudgetExceeded):
        oracle.exhaustive_naive(c, budget=10)
    with pytest.raises(oracle.BudgetExceeded):
        oracle.suffix_max_oracle(c, (), budget=10)
