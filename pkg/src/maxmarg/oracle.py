"""Brute-force references: every quantity here is computed by enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import dp
from .logdomain import ZERO, lse
from .model import ConfigError, PairChain

DEFAULT_BUDGET = 2**20


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class OracleReport:
    optimum: float
    argmax_paths: list = field(default_factory=list)
    nodes_processed: int = 0


def _check_budget(card_x: int, length: int, budget: int) -> None:
    if card_x ** length > budget:
        raise BudgetExceeded(f"{card_x}**{length} paths exceed the oracle budget {budget}")


def all_paths(card_x: int, length: int) -> np.ndarray:
    """Every path of the given length as rows, lexicographic order."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((card_x,) * length).reshape(length, -1).T
    return grids.astype(np.int64)


def _ties(paths: np.ndarray, masses: np.ndarray, tol: float):
    best = float(masses.max())
    if best == ZERO:
        return best, [tuple(int(v) for v in p) for p in paths]
    idx = np.flatnonzero(masses >= best - tol)
    return best, [tuple(int(v) for v in paths[i]) for i in idx]


def exhaustive_naive(chain: PairChain, budget: int = DEFAULT_BUDGET, tol: float = 1e-9) -> OracleReport:
    """Mass of every full path computed independently; full tie set."""
    _check_budget(chain.card_x, chain.n, budget)
    paths = all_paths(chain.card_x, chain.n)
    masses = np.concatenate([dp.path_mass_batch(chain, paths[s:s + 65536])
                             for s in range(0, len(paths), 65536)])
    best, ties = _ties(paths, masses, tol)
    return OracleReport(best, ties, len(paths))


def exhaustive_dc(chain: PairChain, budget: int = DEFAULT_BUDGET, tol: float = 1e-9) -> OracleReport:
    """Shared-prefix enumeration of the full prefix tree, layer by layer."""
    _check_budget(chain.card_x, chain.n, budget)
    X, U = chain.card_x, chain.card_u
    alpha = dp.root_alpha(chain)[None, :]
    last = np.zeros(1, dtype=np.int64)
    nodes = 0
    for k in range(chain.n):
        kids = dp.children_alpha(chain, k, last, alpha)  # (N, X, U)
        alpha = kids.reshape(-1, U)
        last = np.tile(np.arange(X), len(last))
        nodes += len(alpha)
    masses = lse(alpha, axis=1)
    best, ties = _ties(all_paths(X, chain.n), masses, tol)
    return OracleReport(best, ties, nodes)


def leaf_masses(chain: PairChain, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Path masses reshaped to ``(X,) * n`` so prefixes index leading axes."""
    _check_budget(chain.card_x, chain.n, budget)
    return exhaustive_leaf_array(chain).reshape((chain.card_x,) * chain.n)


def exhaustive_leaf_array(chain: PairChain) -> np.ndarray:
    paths = all_paths(chain.card_x, chain.n)
    return dp.path_mass_batch(chain, paths)


def suffix_max_table(chain: PairChain, k: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """``p*`` for every prefix of length ``k`` at once, flat lexicographic order."""
    L = leaf_masses(chain, budget)
    flat = L.reshape(chain.card_x ** k, -1)
    return flat.max(axis=1)


def _continuations(chain: PairChain, prefix, budget: int) -> np.ndarray:
    prefix = tuple(int(v) for v in prefix)
    k = len(prefix)
    if k > chain.n:
        raise ConfigError("prefix longer than chain")
    _check_budget(chain.card_x, chain.n - k, budget)
    tails = all_paths(chain.card_x, chain.n - k)
    head = np.broadcast_to(np.array(prefix, dtype=np.int64), (len(tails), k))
    return dp.path_mass_batch(chain, np.hstack([head, tails]))


def suffix_max_oracle(chain: PairChain, prefix, budget: int = DEFAULT_BUDGET) -> float:
    """``max`` of path mass over every continuation of ``prefix``."""
    return float(_continuations(chain, prefix, budget).max())


def power_sum_oracle(chain: PairChain, prefix, r: int, budget: int = DEFAULT_BUDGET) -> float:
    """``log sum p(x_{1:n})**r`` over continuations of ``prefix``."""
    if r < 1:
        raise ConfigError("power sum exponent must be >= 1")
    m = _continuations(chain, prefix, budget)
    return float(lse(r * m))


def iter_prefixes(card_x: int, n: int):
    for k in range(n + 1):
        yield from itertools.product(range(card_x), repeat=k)
