"""Experiment runners: method comparison, ablations, privacy sweep, scalability, importance.

Every runner is a deterministic function of ``(config, seed)``. Result CSVs
carry no wall-clock columns unless the table is about timing (``scale.csv``),
so reruns reproduce them byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from ..errors import ConfigError
from ..federation.clients import build_clients
from ..federation.rounds import FederatedRun, predict, run_federated, write_history
from ..gnn.model import model_logits
from ..graph.generator import generate_dataset
from ..graph.io import load_dataset, load_scenarios
from ..graph.ops import partition_graph, split_dataset
from ..graph.types import NODE_FEATURES
from ..privacy.dp import DPNoiseConfig, noise_sigma
from ..reasoning.assess import assess_nodes, write_assessments
from ..reasoning.engine import RuleEngine
from .config import ExperimentConfig
from .metrics import compute_metrics

METHODS = ("fedavg_tabular", "fedprox", "fedgnn_avg", "fedgraph_agi", "centralized_gat")
VARIANTS = ("full", "no_agi", "no_moe", "no_attention", "no_privacy", "no_fed")
SIGNAL_FAMILIES = {
    "centrality": ("degree", "betweenness"),
    "frequency": ("tx_frequency",),
    "cross_border": ("cross_border_ratio",),
}
METRIC_FIELDS = ("accuracy", "precision", "recall", "f1", "auc", "tp", "fp", "tn", "fn", "threshold")
DEFAULT_PROX = 0.01


def fmt(x):
    """Stable text for CSV cells."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".10g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])
    return path


# --- data ---------------------------------------------------------------------

@dataclass
class Prepared:
    """Dataset, partition and split shared by every method of one seed."""

    seed: int
    graph: object
    scenarios: list
    partition: object
    splits: tuple
    split_hash: str


def split_hash(splits):
    h = hashlib.sha256()
    for part in splits:
        h.update(np.sort(np.asarray(part, dtype=np.int64)).astype("<i8").tobytes())
        h.update(b"|")
    return h.hexdigest()[:16]


def load_or_generate(config: ExperimentConfig, seed):
    ds = config.dataset
    if "path" in ds:
        return load_dataset(ds["path"]), load_scenarios(ds["path"])
    return generate_dataset(config.generator_config(seed))


def prepare(config: ExperimentConfig, seed, K=None) -> Prepared:
    graph, scenarios = load_or_generate(config, seed)
    K = config.partition.K if K is None else K
    partition = partition_graph(graph, K, seed=seed, strategy=config.partition.strategy)
    splits = split_dataset(graph, seed=seed, assignment=partition.assignment)
    return Prepared(seed, graph, scenarios, partition, splits, split_hash(splits))


# --- single runs ----------------------------------------------------------------

@dataclass
class MethodResult:
    """Outcome of one (method or variant, seed) run."""

    name: str
    seed: int
    metrics: object
    split_hash: str
    n_test: int
    n_deep: int = 0
    history: list = field(default_factory=list)
    assessments: list | None = None
    run: FederatedRun | None = field(default=None, repr=False)

    @property
    def deep_fraction(self):
        return self.n_deep / self.n_test if self.n_test else 0.0


@dataclass(frozen=True)
class RunPlan:
    """How one method or ablation variant trains and scores."""

    round_config: object
    with_edges: bool = True
    central: bool = False
    local_only: bool = False  # train the smallest client alone
    agi: bool = False

    def key(self):
        return (repr(self.round_config), self.with_edges, self.central, self.local_only)


def method_plan(config: ExperimentConfig, method, seed) -> RunPlan:
    """Round settings for a comparison method."""
    base = config.round_config(seed)
    hyper = config.gnn
    if method in ("fedavg_tabular", "fedprox"):
        lam = 0.0 if method == "fedavg_tabular" else (hyper.proximal_lambda or DEFAULT_PROX)
        rc = replace(base, aggregation="fedavg", cross_border="off",
                     hyper=replace(hyper, n_layers=1, heads=1, proximal_lambda=lam))
        return RunPlan(rc, with_edges=False)
    if method == "fedgnn_avg":
        return RunPlan(replace(base, aggregation="fedavg", cross_border="off"))
    if method == "fedgraph_agi":
        return variant_plan(config, "full", seed)
    if method == "centralized_gat":
        rc = replace(base, aggregation="fedavg", cross_border="off", privacy="off", clip_norm=None)
        return RunPlan(rc, central=True)
    raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")


def variant_plan(config: ExperimentConfig, variant, seed) -> RunPlan:
    """Round settings for the full method with ablation ``variant`` switched on.

    The config's own ablation flags are applied first, so flags compose.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown ablation {variant!r}; choose from {VARIANTS}")
    flags = set(config.ablation.active())
    if variant != "full":
        flags.add(variant)
    rc = config.round_config(seed)
    if "no_moe" in flags:
        rc = replace(rc, aggregation="fedavg")
    if "no_attention" in flags:
        rc = replace(rc, uniform_attention=True)
    if "no_privacy" in flags and rc.privacy != "off":
        rc = replace(rc, privacy="dp", dp=replace(rc.dp, sigma_override=0.0))
    if "no_fed" in flags:
        rc = replace(rc, aggregation="fedavg", cross_border="off")
    return RunPlan(rc, local_only="no_fed" in flags, agi="no_agi" not in flags)


def smallest_client(clients):
    return min(range(len(clients)), key=lambda k: (clients[k].n_nodes, k))


def train_plan(prep: Prepared, plan: RunPlan) -> FederatedRun:
    rc = plan.round_config
    if plan.central:
        part = partition_graph(prep.graph, 1, seed=prep.seed)
        return run_federated(prep.graph, part, rc, prep.splits, with_edges=plan.with_edges)
    if plan.local_only:
        clients = build_clients(prep.graph, prep.partition, prep.splits,
                                with_edges=plan.with_edges, with_ghosts=False)
        k = smallest_client(clients)
        return run_federated(prep.graph, prep.partition, rc, prep.splits, clients=[clients[k]])
    return run_federated(prep.graph, prep.partition, rc, prep.splits, with_edges=plan.with_edges)


def heldout_scores(prep: Prepared, plan: RunPlan, run: FederatedRun):
    """``(p_gnn, labels, ids)`` on the global test split."""
    if plan.local_only:
        # one client's model scored on every jurisdiction's test nodes
        clients = build_clients(prep.graph, prep.partition, prep.splits,
                                with_edges=plan.with_edges, with_ghosts=False)
        return predict(run.params, clients, None, "test", plan.round_config.uniform_attention)
    return run.predict("test")


def score_run(config, prep, plan, run, name):
    p_gnn, labels, ids = heldout_scores(prep, plan, run)
    assessments = None
    n_deep = 0
    scores = p_gnn
    if plan.agi:
        assessments = assess_nodes(ids, p_gnn, prep.graph, RuleEngine(), config.reasoning)
        scores = np.array([a.p_final for a in assessments])
        n_deep = sum(a.deep for a in assessments)
    return MethodResult(
        name=name, seed=prep.seed, metrics=compute_metrics(scores, labels),
        split_hash=prep.split_hash, n_test=len(labels), n_deep=n_deep,
        history=run.history, assessments=assessments, run=run,
    )


class _Cache:
    """Reuse a trained run when two plans train identically."""

    def __init__(self):
        self.runs = {}

    def get(self, prep, plan):
        key = (prep.seed, plan.key())
        if key not in self.runs:
            self.runs[key] = train_plan(prep, plan)
        return self.runs[key]


def run_method(config: ExperimentConfig, method, seed, prep=None, cache=None) -> MethodResult:
    prep = prep or prepare(config, seed)
    plan = method_plan(config, method, seed)
    run = (cache or _Cache()).get(prep, plan)
    return score_run(config, prep, plan, run, method)


def run_variant(config: ExperimentConfig, variant, seed, prep=None, cache=None) -> MethodResult:
    prep = prep or prepare(config, seed)
    plan = variant_plan(config, variant, seed)
    run = (cache or _Cache()).get(prep, plan)
    return score_run(config, prep, plan, run, variant)


# --- tables -----------------------------------------------------------------------

RUN_HEADER = ["name", "seed", *METRIC_FIELDS, "n_test", "n_deep", "deep_fraction", "split_hash"]
SUMMARY_HEADER = ["rank", "name", "n_seeds", "f1_median", "accuracy_median", "precision_median",
                  "recall_median", "auc_median"]


def _run_row(r: MethodResult):
    m = r.metrics
    return [r.name, r.seed, *(getattr(m, f) for f in METRIC_FIELDS),
            r.n_test, r.n_deep, r.deep_fraction, r.split_hash]


def _median(values):
    vals = [v for v in values if v is not None]
    return float(np.median(vals)) if vals else None


@dataclass
class ResultTable:
    """Per-seed results plus medians, ranked by median F1 (ties keep input order)."""

    results: list
    names: tuple

    def of(self, name):
        return [r for r in self.results if r.name == name]

    def median(self, name, metric="f1"):
        return _median([getattr(r.metrics, metric) for r in self.of(name)])

    def summary(self):
        rows = []
        for n in self.names:
            rs = self.of(n)
            rows.append([n, len(rs), self.median(n, "f1"), self.median(n, "accuracy"),
                         self.median(n, "precision"), self.median(n, "recall"), self.median(n, "auc")])
        order = sorted(range(len(rows)), key=lambda i: (-rows[i][2], i))
        return [[rank + 1, *rows[i]] for rank, i in enumerate(order)]

    def write(self, out_dir, stem):
        out_dir = Path(out_dir)
        write_csv(out_dir / f"{stem}.csv", SUMMARY_HEADER, self.summary())
        write_csv(out_dir / f"{stem}_runs.csv", RUN_HEADER, [_run_row(r) for r in self.results])


def _seeds(config, seeds):
    if seeds is not None:
        return tuple(int(s) for s in seeds)
    return tuple(config.experiment.seeds)


def _write_run_files(out_dir, r: MethodResult):
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    write_history(r.history, Path(out_dir) / f"history_{r.name}_seed{r.seed}.csv", include_timing=False)
    if r.assessments is not None:
        write_assessments(r.assessments, Path(out_dir) / f"assessments_{r.name}_seed{r.seed}.jsonl")


def run_comparison(config: ExperimentConfig, seeds=None, methods=None, out_dir=None, log=None) -> ResultTable:
    """Train every method on every seed over a shared dataset, partition and split."""
    methods = tuple(methods or config.experiment.methods)
    results = []
    for seed in _seeds(config, seeds):
        prep = prepare(config, seed)
        cache = _Cache()
        for m in methods:
            t0 = time.perf_counter()
            r = run_method(config, m, seed, prep, cache)
            results.append(r)
            if log:
                log(f"{m} seed={seed} f1={r.metrics.f1:.4f} ({time.perf_counter() - t0:.1f}s)")
            if out_dir is not None:
                _write_run_files(out_dir, r)
    table = ResultTable(results, methods)
    if out_dir is not None:
        table.write(out_dir, "comparison")
    return table


def run_ablation(config: ExperimentConfig, seeds=None, variants=VARIANTS, out_dir=None, log=None) -> ResultTable:
    """The full method and one run per ablation flag, on every seed."""
    variants = tuple(variants)
    results = []
    for seed in _seeds(config, seeds):
        prep = prepare(config, seed)
        cache = _Cache()
        for v in variants:
            t0 = time.perf_counter()
            r = run_variant(config, v, seed, prep, cache)
            results.append(r)
            if log:
                log(f"{v} seed={seed} f1={r.metrics.f1:.4f} ({time.perf_counter() - t0:.1f}s)")
            if out_dir is not None:
                _write_run_files(out_dir, r)
    table = ResultTable(results, variants)
    if out_dir is not None:
        table.write(out_dir, "ablation")
    return table


# --- privacy sweep --------------------------------------------------------------------

SWEEP_HEADER = ["epsilon", "sigma", "accuracy", "f1", "auc", "epsilon_total", "n_rounds"]


@dataclass(frozen=True)
class SweepPoint:
    epsilon: float
    sigma: float
    metrics: object
    epsilon_total: float
    history: list = field(default_factory=list, compare=False, repr=False)


def sweep_plan(config: ExperimentConfig, epsilon, seed) -> RunPlan:
    """The full method at privacy level ``epsilon``; ``inf`` means no privacy at all."""
    plan = variant_plan(config, "full", seed)
    rc = plan.round_config
    if math.isinf(epsilon):
        rc = replace(rc, privacy="off")
    else:
        mode = rc.privacy if rc.privacy != "off" else "dp"
        p = config.privacy
        rc = replace(rc, privacy=mode, dp=DPNoiseConfig(p.clip_norm, float(epsilon), p.delta))
    return replace(plan, round_config=rc)


def run_privacy_sweep(config: ExperimentConfig, epsilons=None, seed=None, out_dir=None, log=None):
    """One training of the full method per privacy level, plus the no-privacy reference.

    Returns ``(points, reference)``; ``reference`` is the ``epsilon = inf`` run.
    """
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ConfigError("the privacy sweep needs a seed")
    epsilons = tuple(config.experiment.epsilons if epsilons is None else epsilons)
    prep = prepare(config, seed)
    cache = _Cache()
    points = []
    for eps in tuple(epsilons) + (math.inf,):
        plan = sweep_plan(config, eps, seed)
        run = cache.get(prep, plan)
        r = score_run(config, prep, plan, run, f"eps={eps}")
        rc = plan.round_config
        if math.isinf(eps):
            sigma, total = 0.0, 0.0
        else:
            sigma = noise_sigma(rc.noise.clip_norm, eps, rc.dp.delta)
            total = run.history[-1].epsilon_advanced if run.history else 0.0
        points.append(SweepPoint(float(eps), float(sigma), r.metrics, float(total), run.history))
        if log:
            log(f"eps={eps} sigma={sigma:.4f} acc={r.metrics.accuracy:.4f}")
    *curve, reference = points
    if out_dir is not None:
        write_csv(Path(out_dir) / "sweep.csv", SWEEP_HEADER, [
            [p.epsilon, p.sigma, p.metrics.accuracy, p.metrics.f1, p.metrics.auc, p.epsilon_total,
             len(p.history)] for p in points
        ])
    return curve, reference


# --- scalability ------------------------------------------------------------------------

SCALE_HEADER = ["K", "rounds", "seconds_per_round", "bytes_per_round", "workers"]


@dataclass(frozen=True)
class ScalePoint:
    K: int
    rounds: int
    seconds_per_round: float
    bytes_per_round: float
    workers: int


def run_scalability(config: ExperimentConfig, client_counts=None, seed=None, rounds=None,
                    out_dir=None, log=None):
    """Seconds and bytes per round of the full method as the client count grows.

    Clients train concurrently on up to ``os.cpu_count()`` threads.
    """
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ConfigError("the scalability run needs a seed")
    counts = tuple(config.experiment.client_counts if client_counts is None else client_counts)
    rounds = config.experiment.scale_rounds if rounds is None else rounds
    graph, _ = load_or_generate(config, seed)
    out = []
    for K in counts:
        part = partition_graph(graph, K, seed=seed, strategy=config.partition.strategy)
        splits = split_dataset(graph, seed=seed, assignment=part.assignment)
        workers = max(1, min(int(K), os.cpu_count() or 1, max(config.federation.workers, int(K))))
        rc = replace(variant_plan(config, "full", seed).round_config, rounds=int(rounds), workers=workers)
        run = run_federated(graph, part, rc, splits)
        secs = float(np.mean([r.seconds for r in run.history])) if run.history else 0.0
        nbytes = float(np.mean([r.bytes for r in run.history])) if run.history else 0.0
        out.append(ScalePoint(int(K), int(rounds), secs, nbytes, workers))
        if log:
            log(f"K={K} {secs:.2f}s/round {nbytes:.0f} bytes/round")
    if out_dir is not None:
        write_csv(Path(out_dir) / "scale.csv", SCALE_HEADER,
                  [[p.K, p.rounds, p.seconds_per_round, p.bytes_per_round, p.workers] for p in out])
    return out


# --- feature importance ----------------------------------------------------------------------

IMPORTANCE_HEADER = ["rank", "feature", "importance", "f1_drop", "auc_drop"]


@dataclass(frozen=True)
class Importance:
    feature: str
    importance: float
    f1_drop: float
    auc_drop: float


def _scores(params, clients, ghosts, uniform, views=None):
    out, labels = [], []
    for k, c in enumerate(clients):
        if not c.test_mask.any():
            continue
        view = c.view if views is None else views[k]
        g = None if ghosts is None else ghosts[k]
        z = model_logits(params, view, ghosts=g, uniform_attention=uniform)[c.test_mask]
        out.append(expit(z))
        labels.append(c.y[c.test_mask])
    return np.concatenate(out), np.concatenate(labels)


def feature_importance(run: FederatedRun, rng, repeats=10, feature_names=NODE_FEATURES):
    """Permutation importance of each node feature for a trained model.

    A feature column is shuffled across each client's nodes (every client
    independently) and the test F1 is recomputed; importance is the mean F1
    drop over ``repeats`` shuffles, floored at zero and normalized to sum to
    one. When no shuffle moves F1 at all (a model that predicts no positives
    at 0.5) the AUC drop is used instead, so the ranking stays informative.

    Returns ``Importance`` records sorted by decreasing importance (ties in
    column order).
    """
    clients = run.clients
    uniform = run.config.uniform_attention
    base_s, y = _scores(run.params, clients, run.ghosts, uniform)
    base = compute_metrics(base_s, y)
    base_auc = base.auc or 0.5
    d = clients[0].view.x.shape[1]
    if len(feature_names) != d:
        raise ConfigError("feature_names must match the feature dimension")
    f1_drop = np.zeros(d)
    auc_drop = np.zeros(d)
    for j in range(d):
        for _ in range(repeats):
            views = []
            for c in clients:
                x = c.view.x.copy()
                x[:, j] = x[rng.permutation(len(x)), j]
                views.append(c.view.with_features(x))
            s, _ = _scores(run.params, clients, run.ghosts, uniform, views)
            m = compute_metrics(s, y)
            f1_drop[j] += base.f1 - m.f1
            auc_drop[j] += base_auc - (m.auc if m.auc is not None else 0.5)
    f1_drop /= repeats
    auc_drop /= repeats
    raw = np.clip(f1_drop, 0.0, None)
    if raw.sum() <= 0:
        raw = np.clip(auc_drop, 0.0, None)
    imp = raw / raw.sum() if raw.sum() > 0 else np.full(d, 1.0 / d)
    order = sorted(range(d), key=lambda j: (-imp[j], j))
    return [Importance(feature_names[j], float(imp[j]), float(f1_drop[j]), float(auc_drop[j])) for j in order]


def family_ranks(importances, families=SIGNAL_FAMILIES):
    """Best 1-based rank reached by any member of each feature family."""
    rank = {imp.feature: i + 1 for i, imp in enumerate(importances)}
    return {fam: min(rank[f] for f in members) for fam, members in families.items()}


def run_importance(config: ExperimentConfig, seed=None, out_dir=None, log=None):
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ConfigError("feature importance needs a seed")
    prep = prepare(config, seed)
    plan = variant_plan(config, "full", seed)
    run = train_plan(prep, plan)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7_000_000]))
    imps = feature_importance(run, rng, config.experiment.importance_repeats)
    if log:
        log(", ".join(f"{i.feature}={i.importance:.3f}" for i in imps[:5]))
    if out_dir is not None:
        write_csv(Path(out_dir) / "importance.csv", IMPORTANCE_HEADER,
                  [[i + 1, m.feature, m.importance, m.f1_drop, m.auc_drop] for i, m in enumerate(imps)])
    return imps
