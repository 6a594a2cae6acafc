"""Branch and bound over prefixes ``x_{1:k}`` with positions fixed left to right.

Breadth-first search processes a whole layer at once with numpy.  Depth-first
and best-first work node by node but share the same batch bound code, each
expansion being a batch of ``|X|`` children.
"""

from __future__ import annotations

import heapq
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import dp
from .bounds import (DEFAULT_BUDGET, BoundConfig, BoundInterval, BudgetError, NodeBatch,
                     PreparedBounds, history_code, history_depth)
from .logdomain import ZERO
from .model import ConfigError, PairChain

log = logging.getLogger(__name__)

TRAVERSALS = ("bfs", "dfs", "best")


@dataclass(frozen=True)
class EarlyStop:
    max_layer_nodes: int = 400_000
    max_total_nodes: int = 2_000_000

    def __post_init__(self):
        if self.max_layer_nodes < 1 or self.max_total_nodes < 1:
            raise ConfigError("early-stop thresholds must be positive")


@dataclass(frozen=True)
class SearchConfig:
    bound_config: BoundConfig = field(default_factory=BoundConfig)
    traversal: str = "bfs"
    tie_tolerance: float = 1e-9
    early_stop: Optional[EarlyStop] = field(default_factory=EarlyStop)
    report_all_optima: bool = True
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.traversal not in TRAVERSALS:
            raise ConfigError(f"traversal must be one of {TRAVERSALS}")
        if not self.tie_tolerance >= 0:
            raise ConfigError("tie tolerance must be >= 0")


@dataclass
class SearchReport:
    status: str
    optimum_interval: BoundInterval
    argmax_paths: list
    incumbent_path: tuple
    incumbent_mass: float
    nodes_visited_total: int
    nodes_visited_per_layer: list
    lower_sources: dict = field(default_factory=dict)
    upper_sources: dict = field(default_factory=dict)
    skipped_bounds: list = field(default_factory=list)
    log_norm: float = 0.0

    @property
    def exact(self) -> bool:
        return self.status == "exact"

    @property
    def optimum(self) -> float:
        return self.optimum_interval.lower


def prepare_bounds(chain: PairChain, config: SearchConfig):
    """Prepare every configured bound; ones over budget are dropped with a warning."""
    kept, skipped = [], []
    for spec in config.bound_config.specs:
        try:
            kept.append(spec.prepare(chain, config.budget))
        except BudgetError as exc:
            log.warning("dropping bound %s: %s", getattr(spec, "token", spec), exc)
            skipped.append(getattr(spec, "token", str(spec)))
    return PreparedBounds(chain, kept), skipped


class _Tracker:
    """Best lower bound, incumbent path and visit statistics shared by all traversals."""

    def __init__(self, chain: PairChain, prepared: PreparedBounds, tol: float,
                 observer: Optional[Callable] = None):
        self.chain = chain
        self.prepared = prepared
        self.tol = tol
        self.best_lower = ZERO
        self.inc_path: tuple = ()
        self.inc_mass = ZERO
        self.per_layer = [0] * chain.n
        self.lo_src: Counter = Counter()
        self.up_src: Counter = Counter()
        self.observer = observer

    def seed(self, root: NodeBatch):
        lo, up, li, ui, los = self.prepared.evaluate(root)
        self.best_lower = max(self.best_lower, float(lo[0]))
        self._realize(los, [()])
        return up

    def _realize(self, los: np.ndarray, prefixes):
        """Turn the best realizing lower bound of a batch into an incumbent path."""
        for bi in self.prepared.realizing:
            row = los[bi]
            j = int(np.argmax(row))
            if row[j] > self.inc_mass:
                prefix = prefixes[j] if not callable(prefixes) else prefixes(j)
                path = tuple(prefix) + tuple(self.prepared.bounds[bi].continuation(prefix))
                self.inc_mass = float(dp.path_mass(self.chain, path))
                self.inc_path = path

    def offer_leaf(self, path, mass: float):
        if mass > self.inc_mass or (mass == self.inc_mass and path < self.inc_path):
            self.inc_mass = float(mass)
            self.inc_path = tuple(path)

    def keep_mask(self, up: np.ndarray, fast: bool) -> np.ndarray:
        keep = ~(up < self.best_lower - self.tol)
        if fast and self.inc_mass >= self.best_lower - self.tol and self.inc_mass > ZERO:
            keep &= ~(up <= self.best_lower + self.tol)
        return keep

    def record(self, li, ui, keep):
        names = self.prepared.names
        for i, c in zip(*np.unique(li[keep], return_counts=True)):
            self.lo_src[names[i]] += int(c)
        for i, c in zip(*np.unique(ui[keep], return_counts=True)):
            self.up_src[names[i]] += int(c)


def _child_batch(chain: PairChain, b: NodeBatch, hist_mod: int):
    X, U = chain.card_x, chain.card_u
    kids = dp.children_alpha(chain, b.k, b.x, b.alpha)
    N = len(b)
    alpha = kids.reshape(N * X, U)
    x = np.tile(np.arange(X), N)
    parent = np.repeat(np.arange(N), X)
    mass = dp.prefix_mass_batch(chain, b.k + 1, x, alpha)
    hist = (b.hist[parent] * X + x) % hist_mod
    return NodeBatch(b.k + 1, x, alpha, mass, hist), parent


def expand(node: dp.AlphaState, chain: PairChain, config: SearchConfig,
           prepared: Optional[PreparedBounds] = None):
    """Children of ``node`` in lexicographic order with their composite intervals."""
    if node.k >= chain.n:
        raise IndexError("cannot expand a complete path")
    if prepared is None:
        prepared = prepare_bounds(chain, config)[0]
    kids = [dp.extend(node, x, chain) for x in range(chain.card_x)]
    depth = history_depth(chain.card_x, max(config.bound_config.history, 1))
    b = NodeBatch(node.k + 1, np.arange(chain.card_x), np.array([c.alpha for c in kids]),
                  np.array([c.prefix_mass for c in kids]),
                  np.array([history_code(c.prefix, chain.card_x, depth) for c in kids], dtype=np.int64))
    lo, up, li, ui, _ = prepared.evaluate(b)
    return [(c, BoundInterval(float(lo[i]), float(up[i]), prepared.names[li[i]], prepared.names[ui[i]]))
            for i, c in enumerate(kids)]


def _finish(chain, tr: _Tracker, leaves, status, upper, skipped, tol, all_optima):
    if status == "exact":
        best = tr.inc_mass
        if leaves:
            best = max(best, max(m for _, m in leaves))
        ties = {p for p, m in leaves if m >= best - tol}
        if tr.inc_path and tr.inc_mass >= best - tol:
            ties.add(tr.inc_path)
        if best == ZERO:
            ties = set()
        interval = BoundInterval(best, best, "exact", "exact")
        argmax = sorted(ties)
    else:
        interval = BoundInterval(tr.best_lower, max(upper, tr.inc_mass), "early-stop", "early-stop")
        argmax = [tr.inc_path] if tr.inc_path else []
    total = int(sum(tr.per_layer))
    return SearchReport(status, interval, argmax, tr.inc_path, tr.inc_mass, total, list(tr.per_layer),
                        dict(tr.lo_src), dict(tr.up_src), skipped, chain.log_norm)


def _root_batch(chain: PairChain) -> NodeBatch:
    return NodeBatch(0, np.zeros(1, dtype=np.int64), dp.root_alpha(chain)[None, :],
                     np.array([dp.total_mass(chain)]), np.zeros(1, dtype=np.int64))


def _bfs(chain, config, tr: _Tracker, hist_mod, skipped):
    tol, fast, es = config.tie_tolerance, not config.report_all_optima, config.early_stop
    cur = _root_batch(chain)
    tr.seed(cur)
    parents: list = [None]
    symbols: list = [None]

    def prefix_of(k, j):
        out = []
        for layer in range(k, 0, -1):
            out.append(int(symbols[layer][j]))
            j = parents[layer][j]
        return tuple(reversed(out))

    total = 0
    for k in range(chain.n):
        kids, parent = _child_batch(chain, cur, hist_mod)
        lo, up, li, ui, los = tr.prepared.evaluate(kids)
        tr.best_lower = max(tr.best_lower, float(lo.max()))
        tr._realize(los, lambda j: prefix_of(k, parent[j]) + (int(kids.x[j]),))
        tr.best_lower = max(tr.best_lower, tr.inc_mass)
        keep = tr.keep_mask(up, fast)
        idx = np.flatnonzero(keep)
        tr.per_layer[k] = len(idx)
        tr.record(li, ui, keep)
        total += len(idx)
        cur = kids.take(idx)
        parents.append(parent[idx])
        symbols.append(kids.x[idx])
        if tr.observer:
            tr.observer(k + 1, tr.best_lower, float(up[idx].max()) if len(idx) else ZERO, tr.inc_mass)
        if len(idx) == 0:
            break
        if es and k + 1 < chain.n and (len(idx) > es.max_layer_nodes or total > es.max_total_nodes):
            return _finish(chain, tr, [], "early-stopped", float(up[idx].max()), skipped, tol, True)
    leaves = []
    if len(cur) and cur.k == chain.n:
        for j in range(len(cur)):
            m = float(cur.mass[j])
            if m >= tr.best_lower - tol:
                leaves.append((prefix_of(chain.n, j), m))
        for p, m in leaves:
            tr.offer_leaf(p, m)
    return _finish(chain, tr, leaves, "exact", ZERO, skipped, tol, config.report_all_optima)


def _nodewise(chain, config, tr: _Tracker, hist_mod, skipped):
    """Depth-first (LIFO) or best-first (max upper) traversal."""
    tol, fast, es = config.tie_tolerance, not config.report_all_optima, config.early_stop
    best_first = config.traversal == "best"
    root = _root_batch(chain)
    up0 = tr.seed(root)
    # entries: (k, prefix, batch-of-one, upper)
    open_list: list = []

    def push(entry):
        if best_first:
            heapq.heappush(open_list, (-entry[3], entry[0], entry[1], entry))
        else:
            open_list.append(entry)

    def pop():
        return heapq.heappop(open_list)[3] if best_first else open_list.pop()

    push((0, (), root, float(up0[0])))
    leaves = []
    total = 0
    while open_list:
        k, prefix, b, upper = pop()
        if upper < tr.best_lower - tol:
            if best_first:
                break
            continue
        if fast and upper <= tr.best_lower + tol and tr.inc_mass >= tr.best_lower - tol and k > 0:
            continue
        if k == chain.n:
            leaves.append((prefix, float(b.mass[0])))
            tr.offer_leaf(prefix, float(b.mass[0]))
            continue
        kids, _ = _child_batch(chain, b, hist_mod)
        lo, up, li, ui, los = tr.prepared.evaluate(kids)
        tr.best_lower = max(tr.best_lower, float(lo.max()))
        tr._realize(los, [prefix + (x,) for x in range(chain.card_x)])
        tr.best_lower = max(tr.best_lower, tr.inc_mass)
        keep = tr.keep_mask(up, fast)
        tr.record(li, ui, keep)
        idx = np.flatnonzero(keep)
        tr.per_layer[k] += len(idx)
        total += len(idx)
        order = idx if best_first else idx[::-1]
        for j in order:
            push((k + 1, prefix + (int(j),), kids.take([j]), float(up[j])))
        if tr.observer:
            tr.observer(k + 1, tr.best_lower, max([e[3] if not best_first else e[3][3]
                                                   for e in open_list], default=ZERO), tr.inc_mass)
        if es and open_list and (len(open_list) > es.max_layer_nodes or total > es.max_total_nodes):
            ups = [e[3] if not best_first else e[3][3] for e in open_list]
            return _finish(chain, tr, [], "early-stopped", max(ups), skipped, tol, True)
    leaves = [(p, m) for p, m in leaves if m >= tr.best_lower - tol]
    return _finish(chain, tr, leaves, "exact", ZERO, skipped, tol, config.report_all_optima)


def branch_and_bound(chain: PairChain, config: Optional[SearchConfig] = None,
                     observer: Optional[Callable] = None,
                     prepared: Optional[PreparedBounds] = None) -> SearchReport:
    """Exact (or early-stopped) maximum of ``p(x_{1:n})`` over ``x``.

    ``observer(k, best_lower, frontier_upper, incumbent_mass)`` is called
    after every expansion step if given.
    """
    config = config or SearchConfig()
    skipped: list = []
    if prepared is None:
        prepared, skipped = prepare_bounds(chain, config)
    tr = _Tracker(chain, prepared, config.tie_tolerance, observer)
    depth = history_depth(chain.card_x, max(config.bound_config.history, 1))
    hist_mod = chain.card_x ** depth
    if config.traversal == "bfs":
        return _bfs(chain, config, tr, hist_mod, skipped)
    return _nodewise(chain, config, tr, hist_mod, skipped)
