"""Lower and upper bounds on ``p*(x_{1:k}) = max_{x_{k+1:n}} p(x_{1:n})``.

Every family works on a :class:`NodeBatch` (all nodes share the depth ``k``)
and returns log-scale arrays; a family that does not bound one side returns
``-inf`` lowers or ``+inf`` uppers.  Tables are prepared once per chain.

Families and their configuration tokens:

========== ===================== =================================
token      bound                 side
========== ===================== =================================
simple     prefix mass           both
ps:r=R     power sum, dummies    both
ps-alt:r=R power sum, counts     both
samuelson  first/second sums     both
sms:m=M    swapped max-sum       upper
mviterbi:m order-M q-Viterbi     lower
ux         joint (x, u) Viterbi  lower
========== ===================== =================================
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dp
from .logdomain import ZERO, lse, masked_scale
from .model import ConfigError, PairChain

DEFAULT_BUDGET = 2**22


class BudgetError(ConfigError):
    """A bound table would exceed the configured size budget."""


@dataclass
class NodeBatch:
    """Nodes sharing depth ``k``.

    ``hist`` holds the last few states as a base-``X`` integer with the most
    recent state in the least significant digit; m-Viterbi windows are read
    from it.
    """

    k: int
    x: np.ndarray
    alpha: np.ndarray
    mass: np.ndarray
    hist: np.ndarray

    def __len__(self):
        return len(self.x)

    def take(self, idx) -> "NodeBatch":
        return NodeBatch(self.k, self.x[idx], self.alpha[idx], self.mass[idx], self.hist[idx])


def history_code(prefix, card_x: int, depth: int) -> int:
    """Last ``depth`` states of ``prefix`` as a base-``card_x`` integer."""
    code = 0
    for x in tuple(prefix)[max(0, len(prefix) - depth):]:
        code = code * card_x + int(x)
    return code


def history_depth(card_x: int, want: int) -> int:
    """Largest usable history depth not above ``want`` that fits in int64."""
    d = want
    while d > 0 and card_x ** d >= 2**62:
        d -= 1
    return d


def batch_from_state(state: dp.AlphaState, card_x: int, depth: int = 16) -> NodeBatch:
    depth = history_depth(card_x, depth)
    code = history_code(state.prefix, card_x, depth)
    return NodeBatch(state.k, np.array([state.last]), state.alpha[None, :],
                     np.array([state.prefix_mass]), np.array([code], dtype=np.int64))


@dataclass(frozen=True)
class BoundInterval:
    lower: float
    upper: float
    lower_source: str = ""
    upper_source: str = ""


def _log_card_pow(chain: PairChain, k: int) -> float:
    return (chain.n - k) * math.log(chain.card_x)


# --- simple ------------------------------------------------------------------

def simple_bounds(node: dp.AlphaState, chain: PairChain, tables: Optional[dp.SuffixMass] = None) -> BoundInterval:
    """``p(x_{1:k}) / |X|^{n-k} <= p* <= p(x_{1:k})``."""
    mass = node.prefix_mass
    if tables is not None:
        mass = float(lse(node.alpha + tables.M[node.k][node.last]))
    lo = mass - _log_card_pow(chain, node.k) if mass != ZERO else ZERO
    return BoundInterval(lo, mass, "simple", "simple")


class SimpleBound:
    name = "simple"
    lower_only = upper_only = False

    def __init__(self, chain: PairChain):
        self.chain = chain

    def evaluate(self, b: NodeBatch):
        return b.mass - _log_card_pow(self.chain, b.k), b.mass


# --- power sums ----------------------------------------------------------------

def _compositions(total: int, parts: int):
    """Non-negative integer vectors of length ``parts`` summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _log_multinomial(counts) -> float:
    return math.lgamma(sum(counts) + 1) - sum(math.lgamma(c + 1) for c in counts)


@dataclass(eq=False)
class PowerSumTables:
    """Backward tables for ``S_r``.

    ``beta[k]`` is ``(X, U**r)`` for the dummy-variable variant and
    ``(X, |Lambda_r|)`` for the count-vector variant.
    """

    chain: PairChain
    r: int
    variant: str
    beta: np.ndarray
    lambdas: Optional[np.ndarray] = None
    log_multinom: Optional[np.ndarray] = None


def _apply_axis(G: np.ndarray, A: np.ndarray, axis: int) -> np.ndarray:
    """Contract axis ``axis`` (a ``u'`` index) of ``G`` with log matrices ``A[..., u, u']``.

    ``G`` has shape ``(Xs, X', U, ..., U)``; ``A`` has shape ``(Xs, X', U, U')``.
    """
    G = np.moveaxis(G, axis, -1)
    shp = G.shape
    flat = G.reshape(shp[0], shp[1], -1, 1, shp[-1])
    out = lse(flat + A[:, :, None, :, :], axis=-1)
    out = out.reshape(shp[:-1] + (A.shape[2],))
    return np.moveaxis(out, -1, axis)


def _ps_dummy_tables(chain: PairChain, r: int) -> np.ndarray:
    n, X, U = chain.n, chain.card_x, chain.card_u
    E = chain.ext_steps
    beta = np.zeros((n + 1, X) + (U,) * r)
    for k in range(n - 1, -1, -1):
        # A[xs, x', u, u'] = E[k][xs, u, x', u']
        A = np.transpose(E[k], (0, 2, 1, 3))
        G = np.broadcast_to(beta[k + 1][None], (X,) + beta[k + 1].shape).copy()
        for j in range(r):
            G = _apply_axis(G, A, 2 + j)
        beta[k] = lse(G, axis=1)
    return beta.reshape(n + 1, X, U**r)


def _h_matrices(r: int, U: int):
    """All ``U x U`` count matrices with total ``r``, grouped by row sums.

    Returns (H, lam_idx, lam2_idx, logcoef, lambdas, log_multinom) with rows
    sorted by ``lam_idx``.
    """
    lambdas = list(_compositions(r, U))
    index = {lam: i for i, lam in enumerate(lambdas)}
    Hs, li, l2, lc = [], [], [], []
    for lam in lambdas:
        rows = [list(_compositions(c, U)) for c in lam]
        for choice in itertools.product(*rows):
            h = np.array(choice, dtype=np.int64)
            Hs.append(h)
            li.append(index[lam])
            l2.append(index[tuple(int(v) for v in h.sum(axis=0))])
            lc.append(sum(_log_multinomial(row) for row in choice))
    lm = np.array([_log_multinomial(lam) for lam in lambdas])
    return (np.array(Hs).reshape(-1, U, U), np.array(li), np.array(l2), np.array(lc),
            np.array(lambdas, dtype=np.int64), lm)


def _ps_count_tables(chain: PairChain, r: int):
    n, X, U = chain.n, chain.card_x, chain.card_u
    H, li, l2, lc, lambdas, lm = _h_matrices(r, U)
    starts = np.flatnonzero(np.r_[True, li[1:] != li[:-1]])
    E = chain.ext_steps
    Hf = H.astype(float)
    beta = np.zeros((n + 1, X, len(lambdas)))
    for k in range(n - 1, -1, -1):
        fin = np.isfinite(E[k])
        Ef = np.where(fin, E[k], 0.0)
        val = np.einsum("tlm,xlym->txy", Hf, Ef)
        blocked = np.einsum("tlm,xlym->txy", Hf, (~fin).astype(float)) > 0
        val[blocked] = ZERO
        # (T, Xs, X') + beta_{k+1}(x', lambda'(h))
        tot = lc[:, None, None] + val + beta[k + 1][:, l2].T[:, None, :]
        per_t = lse(tot, axis=2)  # (T, Xs)
        mx = np.maximum.reduceat(per_t, starts, axis=0)
        safe = np.where(np.isfinite(mx), mx, 0.0)
        with np.errstate(under="ignore", divide="ignore"):
            s = np.add.reduceat(np.exp(per_t - np.repeat(safe, np.diff(np.r_[starts, len(li)]), axis=0)),
                                starts, axis=0)
            beta[k] = (np.log(s) + safe).T
    return beta, lambdas, lm


def power_sum_prepare(chain: PairChain, r: int, variant: str = "dummy",
                      budget: int = DEFAULT_BUDGET) -> PowerSumTables:
    """Backward tables for the r-th power sum of continuation masses."""
    if r < 1:
        raise ConfigError("power sum exponent must be >= 1")
    if variant not in ("dummy", "count"):
        raise ConfigError(f"unknown power sum variant {variant!r}")
    X, U = chain.card_x, chain.card_u
    if r == 1:
        # both variants coincide with the suffix-mass table
        M = dp.suffix_tables(chain)[0].M
        if variant == "dummy":
            return PowerSumTables(chain, 1, variant, M.copy())
        lam = np.eye(U, dtype=np.int64)
        return PowerSumTables(chain, 1, variant, M.copy(), lam, np.zeros(U))
    if variant == "dummy":
        if X * X * U ** (r + 1) > budget:
            raise BudgetError(f"power-sum table for r={r} exceeds budget")
        return PowerSumTables(chain, r, variant, _ps_dummy_tables(chain, r))
    n_h = math.comb(r + U * U - 1, U * U - 1)
    if n_h * X * X > budget:
        raise BudgetError(f"count-vector power-sum table for r={r} exceeds budget")
    beta, lambdas, lm = _ps_count_tables(chain, r)
    return PowerSumTables(chain, r, variant, beta, lambdas, lm)


def power_sum_eval_batch(b: NodeBatch, tables: PowerSumTables, chunk: int = 1 << 21) -> np.ndarray:
    beta = tables.beta[b.k][b.x]
    if tables.variant == "count":
        lam = tables.lambdas.astype(float)
        # (N, L): sum_l lambda^l * alpha(a_l), with 0 * -inf = 0
        la = masked_scale(lam[None, :, :], b.alpha[:, None, :]).sum(axis=2)
        return lse(tables.log_multinom[None, :] + la + beta, axis=1)
    r, U = tables.r, tables.chain.card_u
    if r == 1:
        return lse(b.alpha + beta, axis=1)
    out = np.empty(len(b))
    step = max(1, chunk // (U**r))
    for s in range(0, len(b), step):
        a = b.alpha[s:s + step]
        at = a
        for _ in range(r - 1):
            at = (at[:, :, None] + a[:, None, :]).reshape(len(a), -1)
        out[s:s + step] = lse(at + beta[s:s + step], axis=1)
    return out


def power_sum_eval(node: dp.AlphaState, tables: PowerSumTables) -> float:
    """``log S_r(x_{1:k})`` for a single node."""
    b = batch_from_state(node, tables.chain.card_x)
    if node.alpha.shape != (tables.chain.card_u,):
        raise ConfigError("node does not belong to the table's chain")
    return float(power_sum_eval_batch(b, tables)[0])


def power_sum_bounds(s_r: float, r: int, n_minus_k: int, card_x: int) -> BoundInterval:
    """``(S_r / |X|^{n-k})^{1/r} <= p* <= S_r^{1/r}`` on log scale."""
    if r < 1:
        raise ConfigError("power sum exponent must be >= 1")
    if s_r == ZERO:
        return BoundInterval(ZERO, ZERO, f"ps{r}", f"ps{r}")
    return BoundInterval((s_r - n_minus_k * math.log(card_x)) / r, s_r / r, f"ps{r}", f"ps{r}")


class PowerSumBound:
    def __init__(self, chain: PairChain, r: int, variant: str, budget: int):
        self.chain = chain
        self.r = r
        self.tables = power_sum_prepare(chain, r, variant, budget)
        self.name = f"{'ps' if variant == 'dummy' else 'ps-alt'}:r={r}"

    def evaluate(self, b: NodeBatch):
        s = power_sum_eval_batch(b, self.tables)
        lo = (s - _log_card_pow(self.chain, b.k)) / self.r
        return lo, s / self.r


# --- Samuelson -----------------------------------------------------------------

def _samuelson_upper(s1: np.ndarray, s2: np.ndarray, log_n: float) -> np.ndarray:
    """``log[(s1 + sqrt((N-1)(N s2 - s1^2))) / N]`` without leaving log scale."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.clip(2 * s1 - (log_n + s2), None, 0.0)  # log(s1^2 / (N s2))
        rad = log_n + s2 + np.log1p(-np.exp(ratio))  # log(N s2 - s1^2), clamped at 0
        log_nm1 = log_n + np.log1p(-np.exp(-log_n)) if log_n > 0 else ZERO
        root = 0.5 * (log_nm1 + rad)
        root = np.where(np.isnan(root), ZERO, root)
        up = np.logaddexp(s1, root) - log_n
    return np.where(s1 == ZERO, ZERO, up)


def samuelson_bounds(s1: float, s2: float, n_minus_k: int, card_x: int) -> BoundInterval:
    """Bounds on the largest of ``N = |X|^{n-k}`` non-negative numbers from their first two power sums."""
    if s1 == ZERO:
        return BoundInterval(ZERO, s1, "samuelson", "samuelson")
    log_n = n_minus_k * math.log(card_x)
    up = float(_samuelson_upper(np.array([s1]), np.array([s2]), log_n)[0])
    return BoundInterval(s2 - s1, up, "samuelson", "samuelson")


class SamuelsonBound:
    name = "samuelson"

    def __init__(self, chain: PairChain, budget: int):
        self.chain = chain
        self.tables = power_sum_prepare(chain, 2, "dummy", budget)

    def evaluate(self, b: NodeBatch):
        s1 = b.mass
        s2 = power_sum_eval_batch(b, self.tables)
        log_n = _log_card_pow(self.chain, b.k)
        with np.errstate(invalid="ignore"):
            lo = np.where(s1 == ZERO, ZERO, s2 - s1)
        return lo, _samuelson_upper(s1, s2, log_n)


# --- swapped max-sum -------------------------------------------------------------

def _block_max(chain: PairChain, start: int, length: int, nxt: np.ndarray) -> np.ndarray:
    """``max_{x_{start+1:start+length}} sum_{u_end} w(block, u_end | x, u) * nxt(x_end, u_end)``.

    Intermediate ``u`` inside the block are summed.  Returns ``(X, U)``.
    """
    X, U = chain.card_x, chain.card_u
    E = chain.ext_steps
    F = np.full((X, U, 1, U), ZERO)
    for u in range(U):
        F[:, u, 0, u] = 0.0
    last = np.arange(X)[:, None]  # (Xs, P)
    for j in range(length):
        Esel = E[start + j][last]  # (Xs, P, U, X', U')
        new = lse(F[:, :, :, :, None, None] + Esel[:, None], axis=3)  # (Xs, Us, P, X', U')
        P = new.shape[2] * X
        F = new.reshape(X, U, P, U)
        last = np.broadcast_to(np.arange(X)[None, None, :], (X, P // X, X)).reshape(X, P)
    val = lse(F + nxt[last][:, None, :, :], axis=3)  # (Xs, Us, P)
    return val.max(axis=2)


@dataclass(eq=False)
class SmsTables:
    """Block-boundary tables ``delta[pos]`` for boundaries ``pos = n - j*m``."""

    chain: PairChain
    m: int
    delta: dict
    memo: dict = field(default_factory=dict)

    def at(self, k: int) -> np.ndarray:
        """``delta_k`` including the partial first block, memoized by depth."""
        if k in self.delta:
            return self.delta[k]
        hit = self.memo.get(k)
        if hit is None:
            r = (self.chain.n - k) % self.m
            hit = _block_max(self.chain, k, r, self.delta[k + r])
            self.memo[k] = hit
        return hit


def sms_prepare(chain: PairChain, m: int, budget: int = DEFAULT_BUDGET) -> SmsTables:
    """Boundary tables for blocks of size ``m`` aligned to the end of the chain."""
    if m < 1:
        raise ConfigError("SMS block size must be >= 1")
    X, U = chain.card_x, chain.card_u
    if X ** (m + 1) * U * U * X > budget:
        raise BudgetError(f"SMS block size m={m} exceeds budget")
    n = chain.n
    delta = {n: np.zeros((X, U))}
    pos = n
    while pos - m >= 0:
        delta[pos - m] = _block_max(chain, pos - m, m, delta[pos])
        pos -= m
    return SmsTables(chain, m, delta)


def sms_upper(node: dp.AlphaState, tables: SmsTables) -> float:
    d = tables.at(node.k)
    return float(lse(node.alpha + d[node.last]))


class SmsBound:
    def __init__(self, chain: PairChain, m: int, budget: int):
        self.tables = sms_prepare(chain, m, budget)
        self.name = f"sms:m={m}"

    def evaluate(self, b: NodeBatch):
        d = self.tables.at(b.k)
        up = lse(b.alpha + d[b.x], axis=1)
        return np.full(len(b), ZERO), up


# --- m-Viterbi -------------------------------------------------------------------

@dataclass(eq=False)
class MViterbiTables:
    """Order-``m`` Markov approximation of the law of X and its Viterbi tables.

    All lists are indexed by position ``t`` (1-based, entry 0 unused).  At
    position t the history window covers ``L_t = min(m, t - 1)`` states and is
    encoded base ``X`` with the most recent state least significant.
    ``cont_beta`` has one extra entry at ``n + 1`` and its windows span
    ``min(max(m, 1), t - 1)`` states.
    """

    chain: PairChain
    m: int
    cond: list
    delta: list
    gamma: list
    cont_beta: list

    def hist_len(self, t: int) -> int:
        return min(self.m, t - 1)

    def window(self, prefix) -> int:
        k = len(prefix)
        L = self.hist_len(k + 1)
        code = 0
        for x in prefix[k - L:] if L else ():
            code = code * self.chain.card_x + int(x)
        return code

    def continuation(self, prefix) -> tuple:
        X, n = self.chain.card_x, self.chain.n
        h = self.window(prefix)
        out = []
        for t in range(len(prefix) + 1, n + 1):
            x = int(self.gamma[t][h])
            out.append(x)
            h = (h * X + x) % X ** self.hist_len(t + 1)
        return tuple(out)

    def q_log(self, path) -> float:
        """Log-probability of a full path under the order-m approximation."""
        X = self.chain.card_x
        h, total = 0, 0.0
        for t, x in enumerate(path, start=1):
            total += self.cond[t][h, int(x)]
            h = (h * X + int(x)) % X ** self.hist_len(t + 1)
        return float(total)


def mviterbi_prepare(chain: PairChain, m: int, budget: int = DEFAULT_BUDGET,
                     tol: float = 1e-12) -> MViterbiTables:
    """Conditionals, Viterbi tables and frozen-continuation masses for order ``m``."""
    if m < 0:
        raise ConfigError("m-Viterbi order must be >= 0")
    n, X, U = chain.n, chain.card_x, chain.card_u
    if X ** (m + 2) * U * U > budget:
        raise BudgetError(f"m-Viterbi order m={m} exceeds budget")
    E = chain.ext_steps
    M = dp.suffix_tables(chain)[0].M

    # forward tables over windows of the last min(m+1, t) states
    cond = [None] * (n + 1)
    K = chain.initial.copy()  # t = 1, codes x_1
    for t in range(1, n + 1):
        w = min(m + 1, t)
        last = np.arange(X ** w) % X
        W = lse(K + M[t][last], axis=1)  # window masses (X^w,)
        L = w - 1
        Wr = W.reshape(X ** L, X)
        norm = lse(Wr, axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            c = Wr - norm
        c[~np.isfinite(norm[:, 0])] = ZERO
        cond[t] = c
        if t == n:
            break
        new = lse(K[:, :, None, None] + E[t][last], axis=1)  # (X^w, X, U)
        new = new.reshape(X ** (w + 1), U)
        if min(m + 1, t + 1) == w:
            new = lse(new.reshape(X, X ** w, U), axis=0)
        K = new

    # backward Viterbi over q
    delta = [None] * (n + 2)
    gamma = [None] * (n + 2)
    delta[n + 1] = np.zeros(X ** min(m, n))
    for t in range(n, 0, -1):
        L, L1 = min(m, t - 1), min(m, t)
        nxt = (np.arange(X ** L)[:, None] * X + np.arange(X)[None, :]) % X ** L1
        cand = cond[t] + delta[t + 1][nxt]
        best = cand.max(axis=1)
        ok = cand >= (best[:, None] - tol)
        gamma[t] = np.argmax(ok, axis=1)
        delta[t] = best

    # true continuation mass of the frozen path; the window keeps at least
    # the last state because the true weights need it even when m = 0
    mb = max(m, 1)
    beta = [None] * (n + 2)
    beta[n + 1] = np.zeros((X ** min(mb, n), U))
    for t in range(n, 0, -1):
        Lb, Lb1 = min(mb, t - 1), min(mb, t)
        h = np.arange(X ** Lb)
        g = gamma[t][h % X ** min(m, t - 1)]
        prev_x = h % X if Lb else np.zeros_like(h)
        h2 = (h * X + g) % X ** Lb1
        # E[t-1][x_{t-1}, u_{t-1}, gamma, u_t] : (H, U, U)
        w = E[t - 1][prev_x, :, g, :]
        beta[t] = lse(w + beta[t + 1][h2][:, None, :], axis=2)
    return MViterbiTables(chain, m, cond, delta, gamma, beta)


def mviterbi_lower_batch(b: NodeBatch, tables: MViterbiTables) -> np.ndarray:
    X = tables.chain.card_x
    L = min(max(tables.m, 1), b.k)
    h = (b.hist % X ** L).astype(np.int64)
    return lse(b.alpha + tables.cont_beta[b.k + 1][h], axis=1)


def mviterbi_lower(node: dp.AlphaState, tables: MViterbiTables):
    """True mass of the prefix followed by its frozen m-Viterbi continuation."""
    if node.k > tables.chain.n:
        raise IndexError("window index out of range")
    h = history_code(node.prefix, tables.chain.card_x, max(tables.m, 1))
    val = float(lse(node.alpha + tables.cont_beta[node.k + 1][h]))
    return val, tables.continuation(node.prefix)


class MViterbiBound:
    realizes = True

    def __init__(self, chain: PairChain, m: int, budget: int):
        self.tables = mviterbi_prepare(chain, m, budget)
        self.name = f"mviterbi:m={m}"
        self.history = m

    def evaluate(self, b: NodeBatch):
        return mviterbi_lower_batch(b, self.tables), np.full(len(b), np.inf)

    def continuation(self, prefix) -> tuple:
        return self.tables.continuation(prefix)


# --- UX-Viterbi -----------------------------------------------------------------

def ux_lower_batch(b: NodeBatch, J: dp.JointMaxTable, chain: PairChain) -> np.ndarray:
    if b.k >= chain.n:
        return b.mass.copy()
    kids = dp.children_alpha(chain, b.k, b.x, b.alpha)  # (N, X, U)
    return (kids + J.delta[b.k + 1][None]).reshape(len(b), -1).max(axis=1)


def ux_viterbi_lower(node: dp.AlphaState, tables: dp.JointMaxTable, chain: PairChain) -> float:
    """Joint max over ``(x, u)`` continuations of the fixed prefix."""
    b = batch_from_state(node, chain.card_x)
    return float(ux_lower_batch(b, tables, chain)[0])


def ux_continuation(node: dp.AlphaState, tables: dp.JointMaxTable, chain: PairChain) -> tuple:
    if node.k >= chain.n:
        return ()
    U = chain.card_u
    kids = dp.children_alpha(chain, node.k, np.array([node.last]), node.alpha[None, :])[0]
    cur = int(np.argmax((kids + tables.delta[node.k + 1]).reshape(-1)))
    out = [cur // U]
    for k in range(node.k + 1, chain.n):
        cur = int(tables.back[k].reshape(-1)[cur])
        out.append(cur // U)
    return tuple(out)


class UXBound:
    name = "ux"
    realizes = True

    def __init__(self, chain: PairChain):
        self.chain = chain
        self.J = dp.suffix_tables(chain)[1]

    def evaluate(self, b: NodeBatch):
        return ux_lower_batch(b, self.J, self.chain), np.full(len(b), np.inf)

    def continuation(self, prefix) -> tuple:
        return ux_continuation(dp.state_for(self.chain, prefix), self.J, self.chain)


# --- configuration -----------------------------------------------------------------

@dataclass(frozen=True)
class BoundSpec:
    kind: str
    param: int = 0

    @property
    def token(self) -> str:
        return {
            "simple": "simple", "samuelson": "samuelson", "ux": "ux",
            "ps": f"ps:r={self.param}", "ps-alt": f"ps-alt:r={self.param}",
            "sms": f"sms:m={self.param}", "mviterbi": f"mviterbi:m={self.param}",
        }[self.kind]

    def prepare(self, chain: PairChain, budget: int = DEFAULT_BUDGET):
        if self.kind == "simple":
            return SimpleBound(chain)
        if self.kind == "ps":
            return PowerSumBound(chain, self.param, "dummy", budget)
        if self.kind == "ps-alt":
            return PowerSumBound(chain, self.param, "count", budget)
        if self.kind == "samuelson":
            return SamuelsonBound(chain, budget)
        if self.kind == "sms":
            return SmsBound(chain, self.param, budget)
        if self.kind == "mviterbi":
            return MViterbiBound(chain, self.param, budget)
        if self.kind == "ux":
            return UXBound(chain)
        raise ConfigError(f"unknown bound kind {self.kind!r}")


_PARAM = {"ps": ("r", 1), "ps-alt": ("r", 1), "sms": ("m", 1), "mviterbi": ("m", 0)}


def parse_bound(token: str) -> BoundSpec:
    token = token.strip()
    kind, _, rest = token.partition(":")
    kind = kind.strip().lower()
    if kind in ("simple", "samuelson", "ux"):
        if rest:
            raise ConfigError(f"bound {kind!r} takes no parameters")
        return BoundSpec(kind)
    if kind not in _PARAM:
        raise ConfigError(f"unknown bound {token!r}")
    key, lo = _PARAM[kind]
    name, _, value = rest.partition("=")
    if name.strip() != key:
        raise ConfigError(f"bound {kind!r} expects parameter {key}=<int>")
    try:
        v = int(value)
    except ValueError:
        raise ConfigError(f"bad parameter in {token!r}") from None
    if v < lo:
        raise ConfigError(f"{key} must be >= {lo} in {token!r}")
    return BoundSpec(kind, v)


@dataclass(frozen=True)
class BoundConfig:
    """Bounds combined by max of lowers and min of uppers; simple is always on."""

    specs: tuple = (BoundSpec("simple"),)

    def __post_init__(self):
        specs = tuple(self.specs)
        if not any(isinstance(s, BoundSpec) and s.kind == "simple" for s in specs):
            specs = (BoundSpec("simple"),) + specs
        object.__setattr__(self, "specs", specs)

    @classmethod
    def parse(cls, text: str) -> "BoundConfig":
        tokens = [t for t in text.split(",") if t.strip()]
        if not tokens:
            raise ConfigError("empty bound configuration")
        return cls(tuple(parse_bound(t) for t in tokens))

    @property
    def token(self) -> str:
        return ",".join(getattr(s, "token", getattr(s, "name", "?")) for s in self.specs)

    @property
    def history(self) -> int:
        depths = [s.param if isinstance(s, BoundSpec) and s.kind == "mviterbi"
                  else getattr(s, "history", 0) for s in self.specs]
        return max(depths + [0])

    def prepare(self, chain: PairChain, budget: int = DEFAULT_BUDGET) -> "PreparedBounds":
        return PreparedBounds(chain, [s.prepare(chain, budget) for s in self.specs])


class PreparedBounds:
    def __init__(self, chain: PairChain, bounds: Sequence):
        self.chain = chain
        self.bounds = list(bounds)
        self.names = [b.name for b in self.bounds]

    @property
    def realizing(self):
        return [i for i, b in enumerate(self.bounds) if getattr(b, "realizes", False)]

    def evaluate(self, b: NodeBatch):
        """Composite interval plus the index of the active bound on each side."""
        los, ups = zip(*(bd.evaluate(b) for bd in self.bounds))
        los = np.vstack(los)
        ups = np.vstack(ups)
        li = np.argmax(los, axis=0)
        ui = np.argmin(ups, axis=0)
        cols = np.arange(len(b))
        return los[li, cols], ups[ui, cols], li, ui, los


def composite_bounds(node: dp.AlphaState, config, chain: PairChain,
                     prepared: Optional[PreparedBounds] = None) -> BoundInterval:
    if prepared is None:
        prepared = config.prepare(chain)
    b = batch_from_state(node, chain.card_x)
    lo, up, li, ui, _ = prepared.evaluate(b)
    return BoundInterval(float(lo[0]), float(up[0]), prepared.names[li[0]], prepared.names[ui[0]])
