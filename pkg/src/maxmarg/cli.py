"""Command-line entry point: ``maxmarg {sample,decode,oracle,table3,table4}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or budget error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import experiments as ex
from . import fixtures, oracle
from .bounds import BoundConfig
from .model import (ConfigError, condition_on_observations, load_chain, make_rng, sample_tmm, save_json,
                    simulate, validate, write_observations)
from .search import EarlyStop, SearchConfig, branch_and_bound


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _path_str(p) -> str:
    return "".join(str(v) for v in p)


def _num(v: float) -> str:
    return "-inf" if v == -math.inf else f"{v:.12g}"


def _resolve_chain(source: str):
    if Path(source).is_file():
        return load_chain(source)
    return fixtures.by_name(source).chain


def _early_stop(args):
    if args.no_early_stop:
        return None
    return EarlyStop(args.early_stop_layer, args.early_stop_total)


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sample(args) -> int:
    rng = make_rng(args.seed)
    tmm = sample_tmm(args.cx, args.cu, args.cy, args.alpha, rng)
    _, _, y = simulate(tmm, args.n, rng)
    chain = condition_on_observations(tmm, y)
    diag = validate(chain)
    prefix = args.out
    save_json(tmm, f"{prefix}.tmm.json")
    write_observations(y, f"{prefix}.obs")
    save_json(chain, f"{prefix}.chain.json")
    print(f"wrote {prefix}.tmm.json {prefix}.obs {prefix}.chain.json")
    print(f"log p(y) = {_num(chain.log_norm)}; valid = {diag.ok}")
    return 0 if diag.ok else 2


def cmd_decode(args) -> int:
    chain = _resolve_chain(args.source)
    cfg = SearchConfig(BoundConfig.parse(args.bounds), args.traversal, args.tie_tolerance,
                       _early_stop(args), args.all_optima)
    r = branch_and_bound(chain, cfg)
    lo, up = r.optimum_interval.lower, r.optimum_interval.upper
    lines = [
        f"status: {r.status}",
        f"log optimum: [{_num(lo)}, {_num(up)}]",
        f"log optimum given y: [{_num(lo - chain.log_norm)}, {_num(up - chain.log_norm)}]",
        f"argmax paths ({len(r.argmax_paths)}): " + " ".join(_path_str(p) for p in r.argmax_paths),
        f"nodes visited: {r.nodes_visited_total}",
        "nodes per layer: " + ";".join(str(v) for v in r.nodes_visited_per_layer),
    ]
    if r.skipped_bounds:
        lines.append("skipped bounds: " + ",".join(r.skipped_bounds))
    print("\n".join(lines))
    if args.out:
        doc = {
            "status": r.status, "lower": None if lo == -math.inf else lo, "upper": None if up == -math.inf else up,
            "log_norm": chain.log_norm, "argmax_paths": [list(p) for p in r.argmax_paths],
            "incumbent_path": list(r.incumbent_path), "nodes_visited_total": r.nodes_visited_total,
            "nodes_visited_per_layer": r.nodes_visited_per_layer,
            "lower_sources": r.lower_sources, "upper_sources": r.upper_sources,
        }
        Path(args.out).write_text(json.dumps(doc, sort_keys=True) + "\n")
    return 0


def cmd_oracle(args) -> int:
    chain = _resolve_chain(args.source)
    fn = oracle.exhaustive_naive if args.mode == "naive" else oracle.exhaustive_dc
    rep = fn(chain, budget=args.budget)
    print(f"log optimum: {_num(rep.optimum)}")
    print(f"optimum: {math.exp(rep.optimum):.12g}")
    print(f"argmax paths ({len(rep.argmax_paths)}): " + " ".join(_path_str(p) for p in rep.argmax_paths))
    print(f"nodes processed: {rep.nodes_processed}")
    return 0


def _spec(args, **kw) -> ex.ExperimentSpec:
    models = args.models
    if args.full:
        models = 1000
    return ex.ExperimentSpec(models=models, n=args.n, card_x=args.cx, card_u=args.cu, card_y=args.cy,
                             alpha=args.alpha, seed=args.seed, traversal=args.traversal,
                             all_optima=args.all_optima, **kw)


def cmd_table3(args) -> int:
    configs = args.bounds.split("|") if args.bounds else ex.TABLE3_CONFIGS
    es = None if args.no_early_stop or not args.early_stop else EarlyStop(args.early_stop_layer,
                                                                         args.early_stop_total)
    spec = _spec(args, configs=configs, early_stop=es)
    res = ex.run_table3(spec)
    _write(res.to_csv(), args.out)
    if args.out:
        for c, s in res.summary().items():
            print(f"{c}: mean log2 nodes {s['mean_log2']:.2f}; log2 mean nodes {s['log2_mean']:.2f}")
    return 0


def cmd_table4(args) -> int:
    text = []
    for n in args.n_values:
        args.n = n
        spec = _spec(args, early_stop=_early_stop(args), bnb_bounds=args.bounds or ex.TABLE4_BOUNDS,
                     m_values=tuple(range(args.max_m + 1)))
        res = ex.run_table4(spec)
        csv_text = res.to_csv(n)
        text.append(csv_text if not text else csv_text.split("\n", 1)[1])
        if args.out:
            for meth, s in res.summary().items():
                print(f"n={n} {meth}: {s['dist_lower']:.2f} {s['dist_upper']:.2f}")
    _write("".join(text), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maxmarg", description="Exact maximum-marginal decoding in triplet Markov models.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_flags(sp, n_default=25):
        sp.add_argument("--cx", type=int, default=2)
        sp.add_argument("--cu", type=int, default=2)
        sp.add_argument("--cy", type=int, default=2)
        sp.add_argument("--alpha", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n", type=int, default=n_default)

    def search_flags(sp, bounds_default):
        sp.add_argument("--bounds", default=bounds_default)
        sp.add_argument("--traversal", choices=("bfs", "dfs", "best"), default="bfs")
        sp.add_argument("--early-stop-layer", type=int, default=400_000)
        sp.add_argument("--early-stop-total", type=int, default=2_000_000)
        sp.add_argument("--no-early-stop", action="store_true")
        sp.add_argument("--all-optima", action=argparse.BooleanOptionalAction, default=True)

    sp = sub.add_parser("sample", help="sample a model, observations and the conditioned chain")
    model_flags(sp)
    sp.add_argument("--out", required=True, help="output path prefix")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("decode", help="run branch and bound on a chain file or fixture")
    sp.add_argument("source", help="chain JSON file or fixture name (d1:n=4, d2:p=0.7,n=10, d3:eps=0.1, fig4)")
    search_flags(sp, "simple")
    sp.add_argument("--tie-tolerance", type=float, default=1e-9)
    sp.add_argument("--out", help="write the report as JSON")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("oracle", help="exhaustive search")
    sp.add_argument("source")
    sp.add_argument("--mode", choices=("naive", "dc"), default="dc")
    sp.add_argument("--budget", type=int, default=oracle.DEFAULT_BUDGET)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("table3", help="visited-node counts per bound configuration")
    model_flags(sp)
    search_flags(sp, "")
    sp.add_argument("--early-stop", action="store_true", help="apply the early-stop thresholds")
    sp.add_argument("--models", type=int, default=200)
    sp.add_argument("--full", action="store_true", help="1000 models")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_table3)

    sp = sub.add_parser("table4", help="m-Viterbi and UX approximation quality")
    model_flags(sp, 100)
    search_flags(sp, ex.TABLE4_BOUNDS)
    sp.add_argument("--n-values", type=int, nargs="+", default=None)
    sp.add_argument("--max-m", type=int, default=5)
    sp.add_argument("--models", type=int, default=100)
    sp.add_argument("--full", action="store_true", help="1000 models")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_table4)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) == "table4" and args.n_values is None:
            args.n_values = [args.n]
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (oracle.BudgetExceeded, OSError, RuntimeError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
