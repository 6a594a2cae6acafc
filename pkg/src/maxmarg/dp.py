"""Dynamic programming on a :class:`~maxmarg.model.PairChain`.

Positions are 1-based in the comments and prefix lengths ``k`` run from 0
(root) to ``n``.  Tables indexed by ``k`` use the chain's ``ext_steps`` so the
root is an ordinary state ``(x_0, u_0) = (0, 0)``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .logdomain import ZERO, lse
from .model import ConfigError, PairChain


@dataclass(frozen=True, eq=False)
class SuffixMass:
    """``M[k][x, u]``: log total weight of every continuation after position k."""

    M: np.ndarray  # (n + 1, X, U)


@dataclass(frozen=True, eq=False)
class JointMaxTable:
    """``delta[k][x, u]``: best joint continuation weight after position k.

    ``back[k][x, u]`` is the flat ``(x', u')`` index chosen at position k+1.
    """

    delta: np.ndarray  # (n + 1, X, U)
    back: np.ndarray  # (n, X, U)


_TABLES: "weakref.WeakKeyDictionary[PairChain, tuple]" = weakref.WeakKeyDictionary()


def suffix_tables(chain: PairChain) -> tuple[SuffixMass, JointMaxTable]:
    """Backward sum and max tables in one pass; cached per chain."""
    hit = _TABLES.get(chain)
    if hit is not None:
        return hit
    n, X, U = chain.n, chain.card_x, chain.card_u
    S = X * U
    E = chain.ext_steps.reshape(n, S, S)
    M = np.zeros((n + 1, S))
    D = np.zeros((n + 1, S))
    back = np.zeros((n, S), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        M[k] = lse(E[k] + M[k + 1][None, :], axis=1)
        cand = E[k] + D[k + 1][None, :]
        back[k] = np.argmax(cand, axis=1)
        D[k] = np.take_along_axis(cand, back[k][:, None], axis=1)[:, 0]
    out = (SuffixMass(M.reshape(n + 1, X, U)),
           JointMaxTable(D.reshape(n + 1, X, U), back.reshape(n, X, U)))
    _TABLES[chain] = out
    return out


def total_mass(chain: PairChain) -> float:
    return float(suffix_tables(chain)[0].M[0, 0, 0])


def forward_joint(chain: PairChain) -> np.ndarray:
    """``F[k][x, u]`` = log weight of all prefixes ending in ``(x, u)`` at k.

    Row 0 is the root indicator.
    """
    n, X, U = chain.n, chain.card_x, chain.card_u
    S = X * U
    E = chain.ext_steps.reshape(n, S, S)
    F = np.full((n + 1, S), ZERO)
    F[0, 0] = 0.0
    for k in range(n):
        F[k + 1] = lse(F[k][:, None] + E[k], axis=0)
    return F.reshape(n + 1, X, U)


# --- batch kernels ---------------------------------------------------------

def children_alpha(chain: PairChain, k: int, x_last: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Forward step for every child of a batch of nodes at depth ``k``.

    ``x_last`` is ``(N,)``, ``alpha`` is ``(N, U)``; returns ``(N, X, U)``.
    """
    if k >= chain.n:
        raise IndexError("cannot extend a complete path")
    E = chain.ext_steps[k][x_last]  # (N, U, X, U)
    return lse(alpha[:, :, None, None] + E, axis=1)


def prefix_mass_batch(chain: PairChain, k: int, x_last: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """``log p(x_{1:k})`` for nodes with forward vectors ``alpha``."""
    M = suffix_tables(chain)[0].M[k]
    return lse(alpha + M[x_last], axis=-1)


def root_alpha(chain: PairChain) -> np.ndarray:
    a = np.full(chain.card_u, ZERO)
    a[0] = 0.0
    return a


# --- single node API -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AlphaState:
    """A fixed prefix with ``alpha[u] = log p(x_{1:k}, u_k)``."""

    k: int
    prefix: tuple
    alpha: np.ndarray
    prefix_mass: float
    parent: Optional["AlphaState"] = None

    @property
    def last(self) -> int:
        return self.prefix[-1] if self.prefix else 0

    def truncate(self) -> "AlphaState":
        if self.parent is None:
            raise IndexError("root has no parent")
        return self.parent


def root(chain: PairChain) -> AlphaState:
    return AlphaState(0, (), root_alpha(chain), total_mass(chain))


def extend(state: AlphaState, next_x: int, chain: PairChain) -> AlphaState:
    if state.k >= chain.n:
        raise IndexError("cannot extend past the chain length")
    if not 0 <= next_x < chain.card_x:
        raise IndexError(f"state {next_x} out of range")
    kids = children_alpha(chain, state.k, np.array([state.last]), state.alpha[None, :])
    alpha = kids[0, next_x]
    mass = float(prefix_mass_batch(chain, state.k + 1, np.array([next_x]), alpha[None, :])[0])
    return AlphaState(state.k + 1, state.prefix + (int(next_x),), alpha, mass, state)


def state_for(chain: PairChain, prefix) -> AlphaState:
    s = root(chain)
    for x in prefix:
        s = extend(s, int(x), chain)
    return s


# --- whole-path quantities -------------------------------------------------

def path_mass(chain: PairChain, x_path) -> float:
    """``log p(x_{1:n})`` by the backward recursion over ``u``."""
    x = np.asarray(x_path, dtype=np.int64)
    if x.shape != (chain.n,):
        raise ConfigError(f"path must have length {chain.n}")
    if (x < 0).any() or (x >= chain.card_x).any():
        raise IndexError("path symbol out of range")
    return float(path_mass_batch(chain, x[None, :])[0])


def path_mass_batch(chain: PairChain, paths: np.ndarray) -> np.ndarray:
    """Backward recursion for many full paths at once; ``paths`` is ``(P, n)``."""
    paths = np.asarray(paths, dtype=np.int64)
    P, n = paths.shape
    beta = np.zeros((P, chain.card_u))
    for t in range(n - 1, 0, -1):
        # w(x_{t+1}, . | x_t, .) for each path: (P, U, U)
        w = chain.steps[t - 1][paths[:, t - 1], :, paths[:, t], :]
        beta = lse(w + beta[:, None, :], axis=2)
    w1 = chain.initial[paths[:, 0]]
    return lse(w1 + beta, axis=1)


def joint_viterbi(chain: PairChain):
    """Best joint ``(x, u)`` path, its x and u components and log weight."""
    _, J = suffix_tables(chain)
    X, U = chain.card_x, chain.card_u
    xs, us = [], []
    cur = 0
    for k in range(chain.n):
        cur = int(J.back[k].reshape(-1)[cur])
        x, u = divmod(cur, U)
        xs.append(x)
        us.append(u)
    return tuple(xs), tuple(us), float(J.delta[0, 0, 0])


def joint_viterbi_forward(chain: PairChain):
    """Forward-direction Viterbi on the joint chain; weight only plus path."""
    n, X, U = chain.n, chain.card_x, chain.card_u
    S = X * U
    E = chain.ext_steps.reshape(n, S, S)
    d = np.full(S, ZERO)
    d[0] = 0.0
    back = np.zeros((n, S), dtype=np.int64)
    for k in range(n):
        cand = d[:, None] + E[k]
        back[k] = np.argmax(cand, axis=0)
        d = np.max(cand, axis=0)
    cur = int(np.argmax(d))
    best = float(d[cur])
    path = [cur]
    for k in range(n - 1, 0, -1):
        cur = int(back[k][cur])
        path.append(cur)
    path.reverse()
    return tuple(p // U for p in path), tuple(p % U for p in path), best


def smoothed_marginals(chain: PairChain) -> np.ndarray:
    """``p(x_t | y)`` for t = 1..n as an ``(n, X)`` array (linear scale)."""
    F = forward_joint(chain)
    M = suffix_tables(chain)[0].M
    joint = F[1:] + M[1:]
    lm = lse(joint, axis=2)
    lm = lm - lse(lm, axis=1, keepdims=True)
    return np.exp(lm)


def pmap_path(chain: PairChain, tol: float = 1e-12):
    """Position-wise argmax of the smoothed marginals, ties to the smallest state."""
    marg = smoothed_marginals(chain)
    best = marg.max(axis=1, keepdims=True)
    path = np.argmax(marg >= best - tol, axis=1)
    return tuple(int(v) for v in path), marg
