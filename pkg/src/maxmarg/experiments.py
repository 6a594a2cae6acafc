"""Random-model experiments: node counts per bound config and Viterbi-approximation quality.

Each model ``i`` uses its own generator seeded with ``seed + i``; the model is
sampled, a trajectory of length ``n`` is simulated from it and the model is
conditioned on the simulated observations.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dp
from .bounds import BoundConfig, mviterbi_prepare
from .model import ConfigError, PairChain, condition_on_observations, make_rng, sample_tmm, simulate
from .search import EarlyStop, SearchConfig, branch_and_bound

log = logging.getLogger(__name__)

TABLE3_CONFIGS = (
    "simple", "samuelson", "ps:r=2", "ps:r=3", "ps:r=5", "ps:r=10",
    "sms:m=1", "sms:m=2", "sms:m=5", "sms:m=10",
    "simple,mviterbi:m=2", "ps:r=2,mviterbi:m=2", "ps:r=5,mviterbi:m=2", "ps:r=10,mviterbi:m=2",
    "sms:m=1,mviterbi:m=2", "sms:m=2,mviterbi:m=2", "sms:m=5,mviterbi:m=2", "sms:m=10,mviterbi:m=2",
)

TABLE4_BOUNDS = "mviterbi:m=5,sms:m=5,ps:r=5"


@dataclass
class ExperimentSpec:
    models: int = 200
    n: int = 25
    card_x: int = 2
    card_u: int = 2
    card_y: int = 2
    alpha: float = 1.0
    seed: int = 0
    configs: Sequence[str] = TABLE3_CONFIGS
    traversal: str = "bfs"
    early_stop: Optional[EarlyStop] = None
    all_optima: bool = True
    m_values: Sequence[int] = (0, 1, 2, 3, 4, 5)
    bnb_bounds: str = TABLE4_BOUNDS

    def __post_init__(self):
        if min(self.models, self.n, self.card_x, self.card_u, self.card_y) < 1:
            raise ConfigError("experiment sizes must be positive")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        self.configs = tuple(self.configs)
        for c in self.configs:
            BoundConfig.parse(c)
        BoundConfig.parse(self.bnb_bounds)


def model_chain(spec: ExperimentSpec, i: int) -> PairChain:
    rng = make_rng(spec.seed + i)
    tmm = sample_tmm(spec.card_x, spec.card_u, spec.card_y, spec.alpha, rng)
    _, _, y = simulate(tmm, spec.n, rng)
    return condition_on_observations(tmm, y)


def fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return f"{v:.6f}"
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


# --- node counts ----------------------------------------------------------------

TABLE3_HEADER = ["model_id", "seed", "config", "status", "nodes_total", "log2_nodes", "nodes_per_layer"]


@dataclass
class Table3Result:
    rows: list = field(default_factory=list)
    nodes: dict = field(default_factory=dict)  # config -> list of totals

    def summary(self) -> dict:
        out = {}
        for c, v in self.nodes.items():
            a = np.array(v, dtype=float)
            if len(a) == 0:
                continue
            out[c] = {"mean_log2": float(np.mean(np.log2(a))), "log2_mean": float(np.log2(a.mean())),
                      "models": len(a)}
        return out

    def to_csv(self) -> str:
        rows = list(self.rows)
        for c, s in self.summary().items():
            rows.append(["summary:mean_log2", "", c, "", "", s["mean_log2"], ""])
            rows.append(["summary:log2_mean", "", c, "", "", s["log2_mean"], ""])
        return _csv(TABLE3_HEADER, rows)


def run_table3(spec: ExperimentSpec, progress=None) -> Table3Result:
    res = Table3Result(nodes={c: [] for c in spec.configs})
    for i in range(spec.models):
        try:
            chain = model_chain(spec, i)
        except Exception as exc:  # recorded, run continues
            for c in spec.configs:
                res.rows.append([i, spec.seed + i, c, f"error: {exc}", "", "", ""])
            continue
        for c in spec.configs:
            cfg = SearchConfig(BoundConfig.parse(c), spec.traversal, early_stop=spec.early_stop,
                               report_all_optima=spec.all_optima)
            try:
                r = branch_and_bound(chain, cfg)
            except Exception as exc:
                log.warning("model %d config %s failed: %s", i, c, exc)
                res.rows.append([i, spec.seed + i, c, f"error: {exc}", "", "", ""])
                continue
            tot = r.nodes_visited_total
            res.nodes[c].append(tot)
            res.rows.append([i, spec.seed + i, c, r.status, tot, math.log2(tot) if tot else ZERO_F,
                             ";".join(str(v) for v in r.nodes_visited_per_layer)])
        if progress:
            progress(i)
    return res


ZERO_F = -math.inf

# --- Viterbi approximations ---------------------------------------------------------

TABLE4_HEADER = ["model_id", "seed", "n", "method", "mass_kind", "log_mass", "dist_lower", "dist_upper",
                 "bnb_status", "bnb_gap", "path"]


@dataclass
class Table4Result:
    rows: list = field(default_factory=list)
    dists: dict = field(default_factory=dict)  # method -> list of (dist_lower, dist_upper)
    gaps: list = field(default_factory=list)

    def summary(self) -> dict:
        out = {}
        for meth, v in self.dists.items():
            a = np.array(v, dtype=float)
            if len(a):
                out[meth] = {"dist_lower": float(a[:, 0].mean()), "dist_upper": float(a[:, 1].mean())}
        if self.gaps:
            out["gap"] = {"dist_lower": float(np.mean(self.gaps)), "dist_upper": float(np.mean(self.gaps))}
        return out

    def to_csv(self, n: int) -> str:
        rows = list(self.rows)
        for meth, s in self.summary().items():
            rows.append(["summary:mean", "", n, meth, "", "", s["dist_lower"], s["dist_upper"], "", "", ""])
        return _csv(TABLE4_HEADER, rows)


def approximation_paths(chain: PairChain, m_values) -> dict:
    """``{"m=<m>": path, "ux": path}`` for the m-Viterbi and joint-Viterbi decoders."""
    out = {}
    for m in m_values:
        out[f"m={m}"] = mviterbi_prepare(chain, m).continuation(())
    out["ux"] = dp.joint_viterbi(chain)[0]
    return out


def run_table4(spec: ExperimentSpec, progress=None) -> Table4Result:
    res = Table4Result()
    es = spec.early_stop or EarlyStop()
    for i in range(spec.models):
        try:
            chain = model_chain(spec, i)
            paths = approximation_paths(chain, spec.m_values)
            r = branch_and_bound(chain, SearchConfig(BoundConfig.parse(spec.bnb_bounds), spec.traversal,
                                                     early_stop=es, report_all_optima=spec.all_optima))
        except Exception as exc:
            log.warning("model %d failed: %s", i, exc)
            res.rows.append([i, spec.seed + i, spec.n, "", "", "", "", "", f"error: {exc}", "", ""])
            continue
        lo, up = r.optimum_interval.lower, r.optimum_interval.upper
        res.gaps.append(up - lo)
        for meth, path in paths.items():
            mass = dp.path_mass(chain, path)
            dl, du = lo - mass, up - mass
            res.dists.setdefault(meth, []).append((dl, du))
            res.rows.append([i, spec.seed + i, spec.n, meth, "marginal", mass, dl, du, r.status, up - lo,
                             "".join(str(v) for v in path)])
        if progress:
            progress(i)
    return res
