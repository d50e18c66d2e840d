"""Command-line interface.

Exit codes: 0 on success, 1 on a configuration or usage error (including
unknown flags and missing config files), 2 when a run fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ..errors import ConfigError, FedGraphError
from ..federation.rounds import predict, write_history
from ..gnn.checkpoint import save_params
from ..graph.generator import generate_dataset
from ..graph.io import save_dataset
from ..reasoning.assess import assess_nodes, write_assessments
from ..reasoning.engine import RuleEngine
from .config import PROFILES, load_config, save_config
from .experiments import (
    METHODS,
    VARIANTS,
    family_ranks,
    prepare,
    run_ablation,
    run_comparison,
    run_importance,
    run_method,
    run_privacy_sweep,
    run_scalability,
    train_plan,
    variant_plan,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
EXPERIMENTS = ("train", "compare", "ablate", "sweep", "scale", "assess", "importance")
MULTI_SEED = ("compare", "ablate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors with exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p, experiment):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. gnn.learning_rate=0.01 (repeatable)")
    p.add_argument("--profile", choices=PROFILES, help="named defaults (desk or paper)")
    p.add_argument("--out", help="output directory (default: output_dir from the config)")
    p.add_argument("-v", "--verbose", action="store_true", help="print progress")
    if experiment:
        p.add_argument("--seed", type=int, nargs="+", required=True,
                       help="random seed; compare and ablate accept several")
    else:
        p.add_argument("--seed", type=int, help="random seed (default: from the config, else 0)")


def build_parser():
    parser = _Parser(prog="fedgraph", description="Federated graph threat detection experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic dataset directory")
    _common(p, experiment=False)

    p = sub.add_parser("train", help="train one method and save params, history and metrics")
    _common(p, experiment=True)
    p.add_argument("--method", choices=METHODS, default="fedgraph_agi")

    p = sub.add_parser("compare", help="compare all methods (comparison.csv)")
    _common(p, experiment=True)
    p.add_argument("--methods", nargs="+", choices=METHODS)

    p = sub.add_parser("ablate", help="full method versus each ablation (ablation.csv)")
    _common(p, experiment=True)
    p.add_argument("--variants", nargs="+", choices=VARIANTS)

    p = sub.add_parser("sweep", help="accuracy across privacy levels (sweep.csv)")
    _common(p, experiment=True)
    p.add_argument("--epsilons", type=float, nargs="+")

    p = sub.add_parser("scale", help="seconds and bytes per round versus client count (scale.csv)")
    _common(p, experiment=True)
    p.add_argument("--clients", type=int, nargs="+")
    p.add_argument("--rounds", type=int)

    p = sub.add_parser("assess", help="train the full method and assess test nodes (assessments.jsonl)")
    _common(p, experiment=True)
    p.add_argument("--split", choices=("test", "val", "all"), default="test")

    p = sub.add_parser("importance", help="permutation feature importance (importance.csv)")
    _common(p, experiment=True)
    return parser


def _config(args):
    cfg = load_config(args.config, args.overrides, args.profile)
    if args.command in EXPERIMENTS:
        if args.command not in MULTI_SEED and len(args.seed) != 1:
            raise ConfigError(f"{args.command} takes exactly one --seed")
        cfg = cfg.with_seed(args.seed[0])
    elif args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out(args, cfg):
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _metrics_json(path, m, extra=None):
    d = m.to_dict()
    d.update(extra or {})
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_generate(args, cfg, out, log):
    seed = cfg.seed if cfg.seed is not None else 0
    graph, scenarios = generate_dataset(cfg.generator_config(seed))
    save_dataset(graph, out, scenarios)
    log(f"wrote {graph.n_nodes} nodes, {graph.n_edges} edges, {len(scenarios)} scenarios to {out}")


def cmd_train(args, cfg, out, log):
    r = run_method(cfg, args.method, cfg.seed)
    save_params(r.run.params, out / "params")
    write_history(r.history, out / "history.csv", include_timing=False)
    if r.assessments is not None:
        write_assessments(r.assessments, out / "assessments.jsonl")
    _metrics_json(out / "metrics.json", r.metrics,
                  {"method": args.method, "seed": cfg.seed, "split_hash": r.split_hash,
                   "deep_fraction": r.deep_fraction})
    log(f"{args.method}: f1={r.metrics.f1:.4f} accuracy={r.metrics.accuracy:.4f}")


def cmd_compare(args, cfg, out, log):
    table = run_comparison(cfg, seeds=args.seed, methods=args.methods, out_dir=out, log=log)
    for row in table.summary():
        print(f"{row[0]}. {row[1]:<16} f1={row[3]:.4f} accuracy={row[4]:.4f}")


def cmd_ablate(args, cfg, out, log):
    table = run_ablation(cfg, seeds=args.seed, variants=args.variants or VARIANTS, out_dir=out, log=log)
    for row in table.summary():
        print(f"{row[0]}. {row[1]:<14} f1={row[3]:.4f} accuracy={row[4]:.4f}")


def cmd_sweep(args, cfg, out, log):
    curve, ref = run_privacy_sweep(cfg, epsilons=args.epsilons, out_dir=out, log=log)
    for p in curve + [ref]:
        print(f"eps={p.epsilon:g} sigma={p.sigma:.5f} accuracy={p.metrics.accuracy:.4f}")


def cmd_scale(args, cfg, out, log):
    pts = run_scalability(cfg, client_counts=args.clients, rounds=args.rounds, out_dir=out, log=log)
    for p in pts:
        print(f"K={p.K} seconds/round={p.seconds_per_round:.3f} bytes/round={p.bytes_per_round:.0f}")


def cmd_assess(args, cfg, out, log):
    prep = prepare(cfg, cfg.seed)
    plan = variant_plan(cfg, "full", cfg.seed)
    run = train_plan(prep, plan)
    scores, _, ids = predict(run.params, run.clients, run.ghosts, args.split,
                             plan.round_config.uniform_attention)
    assessments = assess_nodes(ids, scores, prep.graph, RuleEngine(), cfg.reasoning)
    write_assessments(assessments, out / "assessments.jsonl")
    deep = sum(a.deep for a in assessments)
    print(f"assessed {len(assessments)} nodes; {deep} received deep analysis "
          f"({deep / max(len(assessments), 1):.1%})")


def cmd_importance(args, cfg, out, log):
    imps = run_importance(cfg, out_dir=out, log=log)
    for i, m in enumerate(imps, 1):
        print(f"{i:>2}. {m.feature:<20} {m.importance:.4f}")
    print("family ranks: " + ", ".join(f"{k}={v}" for k, v in family_ranks(imps).items()))


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "compare": cmd_compare,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "scale": cmd_scale,
    "assess": cmd_assess,
    "importance": cmd_importance,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else (lambda msg: None)
    try:
        cfg = _config(args)
        out = _out(args, cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command in EXPERIMENTS:
        save_config(cfg, out / "config.json")
    t0 = time.perf_counter()
    try:
        with np.errstate(over="ignore"):
            COMMANDS[args.command](args, cfg, out, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FedGraphError, ArithmeticError, OSError, ValueError, KeyError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log(f"done in {time.perf_counter() - t0:.1f}s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
