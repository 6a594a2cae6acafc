"""Small hand-built chains with known answers.

Each constructor returns a :class:`FixtureChain`: the chain plus a manifest of
expected quantities written as closed forms of the constructor's arguments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .logdomain import ZERO
from .model import ConfigError, PairChain


@dataclass
class FixtureChain:
    chain: PairChain
    manifest: dict = field(default_factory=dict)


def _log(v: float) -> float:
    return math.log(v) if v > 0 else ZERO


def history_chain(dist: dict, memory: int, card_x: int = 2, name: str = "") -> PairChain:
    """Pair chain whose ``u_t`` encodes the last ``memory`` states of ``x``.

    ``dist`` maps full paths to non-negative weights.  The chain reproduces
    ``dist`` exactly when ``dist`` is Markov of order ``memory`` (always the
    case for ``n <= memory + 1``).  ``u_t`` is the base-``card_x`` code of
    ``x_{t-memory+1:t}`` padded with leading zeros.
    """
    paths = list(dist)
    n = len(paths[0])
    if any(len(p) != n for p in paths):
        raise ConfigError("all paths must have the same length")
    if memory < 1:
        raise ConfigError("memory must be >= 1")
    X, U = card_x, card_x ** memory
    full = np.zeros((X,) * n)
    for p, w in dist.items():
        if w < 0:
            raise ConfigError("weights must be non-negative")
        full[tuple(p)] += w

    def window_mass(t0, t1):
        # marginal of x_{t0..t1} (0-based, inclusive) as an array over the window
        axes = tuple(i for i in range(n) if not t0 <= i <= t1)
        return full.sum(axis=axes) if axes else full

    initial = np.full((X, U), ZERO)
    m1 = window_mass(0, 0)
    for x in range(X):
        initial[x, x % U] = _log(m1[x])
    steps = np.full((max(n - 1, 0), X, U, X, U), ZERO)
    for t in range(1, n):
        L = min(memory, t)
        joint = window_mass(t - L, t)  # axes: x_{t-L}, ..., x_t
        hist = joint.sum(axis=-1)
        for h in itertools.product(range(X), repeat=L):
            den = hist[h]
            code = 0
            for v in h:
                code = code * X + v
            for x in range(X):
                num = joint[h + (x,)]
                w = _log(num / den) if den > 0 else ZERO
                u_new = (code * X + x) % U
                steps[t - 1, h[-1], code, x, u_new] = w
    total = float(full.sum())
    return PairChain(n, X, U, initial, steps, _log(total), name)


def _single_zero_chain(n: int) -> PairChain:
    # u_i = position of the zero when already seen (0-based), else i + 1
    X, U = 2, n
    initial = np.full((X, U), ZERO)
    initial[0, 0] = math.log(1 / n)
    initial[1, 1] = math.log((n - 1) / n)
    steps = np.full((n - 1, X, U, X, U), ZERO)
    for i in range(1, n):
        for xp in range(X):
            for u in range(U):
                if u < i:
                    steps[i - 1, xp, u, 1, u] = 0.0
                elif u == i:
                    steps[i - 1, xp, u, 0, i] = math.log(1 / (n - i))
                    if i + 1 < U:
                        steps[i - 1, xp, u, 1, i + 1] = math.log((n - i - 1) / (n - i))
    return PairChain(n, X, U, initial, steps, 0.0, f"d1:n={n}")


def single_zero_process(n: int = 4) -> FixtureChain:
    """Uniform law on the ``n`` binary sequences with exactly one zero."""
    if n < 4:
        raise ConfigError("single-zero process needs n >= 4")
    chain = _single_zero_chain(n)
    optima = [tuple(0 if j == i else 1 for j in range(n)) for i in range(n)]
    manifest = {
        "optimum": math.log(1 / n),
        "argmax_paths": optima,
        "all_ones_mass": ZERO,
        "p_x_one": (n - 1) / n,
    }
    if n == 4:
        manifest.update({
            "cond_1_given_1": 2 / 3,
            "cond_1_given_0": 1.0,
            "viterbi_paths": {0: (1, 1, 1, 1), 1: (1, 1, 1, 1), 2: (1, 0, 1, 1)},
            "viterbi_masses": {0: ZERO, 1: ZERO, 2: math.log(0.25)},
        })
    return FixtureChain(chain, manifest)


def switching_chain(p: float = 0.7, n: int = 10) -> FixtureChain:
    """Left-right switching pair chain; ``x`` marks the step where ``u`` drops to 0."""
    if not 0 < p < 1:
        raise ConfigError("p must lie in (0, 1)")
    if n < 2:
        raise ConfigError("n must be >= 2")
    X = U = 2
    initial = np.full((X, U), ZERO)
    initial[1, 1] = math.log(p)
    initial[0, 0] = math.log(1 - p)
    step = np.full((X, U, X, U), ZERO)
    for xp in range(X):
        step[xp, 1, 1, 1] = math.log(p)
        step[xp, 1, 0, 0] = math.log(1 - p)
        step[xp, 0, 1, 0] = 0.0
    steps = np.broadcast_to(step, (n - 1,) + step.shape).copy()
    chain = PairChain(n, X, U, initial, steps, 0.0, f"d2:p={p},n={n}")
    cands = {(1,) * n: n * math.log(p)}
    for i in range(1, n + 1):
        path = tuple(0 if j == i else 1 for j in range(1, n + 1))
        cands[path] = (i - 1) * math.log(p) + math.log(1 - p)
    best = max(cands.values())
    ratios = {}
    for i in range(2, n + 1):
        ratios[i] = p ** (i - 1) * (1 - p) / (1 - p ** (i - 2) * (1 - p))
    manifest = {
        "optimum": best,
        "argmax_paths": sorted(k for k, v in cands.items() if v >= best - 1e-12),
        "viterbi1_path": (1,) * n if p > (math.sqrt(5) - 1) / 2 else None,
        "viterbi1_mass": n * math.log(p),
        "cond_0_given_1": ratios,
    }
    return FixtureChain(chain, manifest)


D3_OUTCOMES = ((1, 1, 1), (1, 0, 0), (1, 0, 1), (0, 0, 1), (0, 1, 1), (0, 1, 0))


def odds_process(epsilon: float = 0.1) -> FixtureChain:
    """Six length-3 outcomes with odds ``1+eps : 1 : 1 : 1 : 1 : 1``."""
    if epsilon < 0:
        raise ConfigError("epsilon must be >= 0")
    e = epsilon
    dist = {o: (1 + e if o == (1, 1, 1) else 1.0) for o in D3_OUTCOMES}
    chain = history_chain(dist, memory=2, name=f"d3:eps={e}")
    z = 6 + e
    q = {
        (1, 0, 0): 2 / (3 * z),
        (0, 0, 1): 2 / (3 * z),
        (1, 1, 1): (1 + e) * (2 + e) / (z * (3 + e)),
        (0, 1, 0): 2 / (z * (3 + e)),
        (1, 0, 1): 4 / (3 * z),
        (0, 1, 1): 2 * (2 + e) / (z * (3 + e)),
        (1, 1, 0): (1 + e) / ((3 + e) * z),
        (0, 0, 0): 1 / (3 * z),
    }
    manifest = {
        "q1": q,
        # at eps = 0 the first position is a fair coin and the paths depend on tie-breaking
        "viterbi_paths": {0: (1, 1, 1) if e > 0 else None, 1: (0, 1, 1) if e > 0 else None},
        "viterbi_masses": {0: math.log((1 + e) / z), 1: math.log(1 / z)},
        "optimum": math.log((1 + e) / z),
        "log_total": math.log(z),
    }
    return FixtureChain(chain, manifest)


FIG4_LEAVES = {
    (0, 0, 0): 0.2887, (0, 0, 1): 0.0232, (0, 1, 0): 0.2128, (0, 1, 1): 0.2328,
    (1, 0, 0): 0.0316, (1, 0, 1): 0.0222, (1, 1, 0): 0.1461, (1, 1, 1): 0.0426,
}


def figure4_chain() -> FixtureChain:
    """The eight-leaf binary tree of the worked search example (a=0, b=1)."""
    chain = history_chain(FIG4_LEAVES, memory=2, name="fig4")
    prefix = {}
    for k in (1, 2):
        for p in itertools.product((0, 1), repeat=k):
            prefix[p] = sum(v for leaf, v in FIG4_LEAVES.items() if leaf[:k] == p)
    manifest = {
        "leaves": dict(FIG4_LEAVES),
        "prefix_mass": prefix,
        "optimum_path": (0, 0, 0),
        "optimum": math.log(0.2887),
        "best_lower_layer2": math.log(0.4456 / 2),
        "pruned_layer2": [(1, 0), (1, 1)],
    }
    return FixtureChain(chain, manifest)


def _parse_kv(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        k, sep, v = part.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {part!r}")
        out[k.strip()] = v.strip()
    return out


def by_name(spec: str) -> FixtureChain:
    """Resolve names such as ``d1:n=4``, ``d2:p=0.7,n=10``, ``d3:eps=0.1``, ``fig4``."""
    kind, _, rest = spec.partition(":")
    try:
        kv = _parse_kv(rest)
        if kind == "d1":
            return single_zero_process(int(kv.pop("n", 4)))
        if kind == "d2":
            return switching_chain(float(kv.pop("p", 0.7)), int(kv.pop("n", 10)))
        if kind == "d3":
            return odds_process(float(kv.pop("eps", 0.1)))
        if kind == "fig4":
            return figure4_chain()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad fixture parameters in {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown fixture {spec!r}")

