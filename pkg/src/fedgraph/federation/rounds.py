"""Communication rounds: local training, privatized exchange, aggregation, gate update."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from ..errors import ConfigError
from ..gnn.model import bce_terms, model_logits
from ..gnn.params import Hyperparams, ModelParams, ModelSpec, init_params
from ..gnn.train import AdamState, LocalData, TrainReport, adam_step, local_train
from ..graph.ops import split_dataset
from ..harness.metrics import compute_metrics
from ..privacy.accounting import ADVANCED, LITERAL, PrivacyLedger, compose_budget
from ..privacy.dp import DPNoiseConfig, clip_update, gaussian_mechanism
from ..privacy.secagg import secure_sum
from .aggregation import fedavg_aggregate, fedavg_weights, moe_aggregate, project_simplex
from .clients import build_clients
from .crossborder import KeyRing, exchange_round
from .gating import GatingParams, entropy, gate_weights, moe_loss_grad

AGGREGATIONS = ("fedavg", "moe")
PRIVACY_MODES = ("off", "dp", "dp+secureagg")
EXCHANGE_MODES = ("paillier", "quantized", "off")

# seed-sequence tags for the independent random streams of a run
_INIT, _KEYS, _GATE, _SHARES, _EXCHANGE, _SAMPLE = 1_000_001, 2_000_000, 3_000_000, 4_000_000, 5_000_000, 6_000_000


@dataclass(frozen=True)
class RoundConfig:
    """Federated training settings.

    ``clip_norm`` clips every transmitted update whatever the privacy mode;
    when unset, the dp modes clip at ``dp.clip_norm`` and ``off`` does not clip.
    """

    rounds: int = 20
    clients_per_round: int | None = None
    hyper: Hyperparams = field(default_factory=Hyperparams)
    aggregation: str = "moe"
    privacy: str = "off"
    dp: DPNoiseConfig = field(default_factory=DPNoiseConfig)
    clip_norm: float | None = None
    gamma: float = 0.1
    entropy_sign: float = -1.0
    cross_border: str = "quantized"
    key_bits: int = 512
    gate_hidden: int = 128
    gate_lr: float = 0.001
    uniform_attention: bool = False
    accountant: str = ADVANCED
    sampling_q: float = 1.0
    workers: int = 1
    persist_optimizer: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}")
        if self.privacy not in PRIVACY_MODES:
            raise ConfigError(f"privacy must be one of {PRIVACY_MODES}")
        if self.cross_border not in EXCHANGE_MODES:
            raise ConfigError(f"cross_border must be one of {EXCHANGE_MODES}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive")
        if self.clients_per_round is not None and self.clients_per_round < 1:
            raise ConfigError("clients_per_round must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def effective_clip(self):
        if self.clip_norm is not None:
            return self.clip_norm
        return self.dp.clip_norm if self.privacy != "off" else None

    @property
    def noise(self):
        """The DP config actually applied (clip norm aligned with the clipping step)."""
        clip = self.effective_clip
        return self.dp if clip is None else replace(self.dp, clip_norm=clip)


@dataclass
class RoundRecord:
    round: int
    client_losses: list
    val_loss: float
    val_accuracy: float
    val_f1: float
    val_auc: float | None
    gate_weights: list | None
    gate_entropy: float | None
    seconds: float
    bytes: int
    epsilon_round: float | None = None
    epsilon_advanced: float | None = None
    epsilon_literal: float | None = None


@dataclass
class ServerState:
    params: ModelParams
    gating: GatingParams | None = None
    gate_adam: AdamState | None = None
    ghosts: list | None = None
    keyring: KeyRing | None = None
    ledger: PrivacyLedger = field(default_factory=PrivacyLedger)
    round: int = 0
    optimizers: dict = field(default_factory=dict)  # client-held Adam moments


def _stream(*tags):
    return np.random.default_rng(np.random.SeedSequence([int(t) for t in tags]))


def client_rng(seed, client, round_):
    """Independent stream per (seed, client, round)."""
    return _stream(seed, client, round_)


def predict(params, clients, ghosts=None, split="test", uniform_attention=False):
    """Concatenated ``(probabilities, labels, node_ids)`` over every client's ``split`` nodes."""
    scores, labels, ids = [], [], []
    for k, c in enumerate(clients):
        mask = {"train": c.train_mask, "val": c.val_mask, "test": c.test_mask, "all": np.ones(c.n_nodes, bool)}[split]
        if not mask.any():
            continue
        g = ghosts[k] if ghosts is not None else None
        logits = model_logits(params, c.view, ghosts=g, uniform_attention=uniform_attention)
        scores.append(expit(logits[mask]))
        labels.append(c.y[mask])
        ids.append(c.node_ids[mask])
    if not scores:
        return np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(scores), np.concatenate(labels), np.concatenate(ids)


def _val_loss(params, clients, ghosts, uniform):
    total, count = 0.0, 0
    for k, c in enumerate(clients):
        if not c.val_mask.any():
            continue
        g = ghosts[k] if ghosts is not None else None
        logits = model_logits(params, c.view, ghosts=g, uniform_attention=uniform)
        terms, _ = bce_terms(logits[c.val_mask], c.y[c.val_mask].astype(np.float64))
        total += float(terms.sum())
        count += len(terms)
    return total / count if count else math.nan


def _gate_batch(c):
    mask = c.val_mask if c.val_mask.any() else np.ones(c.n_nodes, bool)
    return c.view.x[mask], c.y[mask]


def _privatize(vec, config, rng):
    clip = config.effective_clip
    out = vec if clip is None else clip_update(vec, clip)
    if config.privacy != "off":
        out = gaussian_mechanism(out, config.noise, rng)
    return out


def _local_step(args):
    k, client, params, ghosts, config, t, opt = args
    rng = client_rng(config.seed, k, t)
    data = LocalData(client.view, client.labels("train"), ghosts, config.uniform_attention, k, opt)
    report = TrainReport()
    trained = local_train(data, params, config.hyper, rng, report)
    delta = trained.vector - params.vector
    priv = _privatize(delta, config, rng)
    untouched = config.effective_clip is None and config.privacy == "off"
    expert = trained if untouched else ModelParams(params.spec, params.vector + priv)
    loss = report.losses[-1] if report.losses else math.nan
    return expert, priv, loss, rng


def run_round(state: ServerState, clients, config: RoundConfig):
    """Advance ``state`` by one round; returns ``(new global params, RoundRecord)``."""
    t = state.round + 1
    t0 = time.perf_counter()
    K = len(clients)
    spec = state.params.spec
    moe = config.aggregation == "moe"
    nbytes = 0

    if config.clients_per_round is None or config.clients_per_round >= K:
        selected = list(range(K))
    else:
        selected = sorted(_stream(config.seed, _SAMPLE, t).choice(K, config.clients_per_round, replace=False).tolist())

    ghosts = None
    if config.cross_border != "off" and any(c.n_ghost for c in clients):
        ghosts, envs = exchange_round(clients, state.params, state.keyring, state.ghosts,
                                      _stream(config.seed, _EXCHANGE, t), config.cross_border)
        state.ghosts = ghosts
        nbytes += sum(e.nbytes for e in envs)

    gate_size = state.gating.size if moe else 0
    nbytes += len(selected) * 8 * (spec.size + gate_size)  # broadcast

    if config.persist_optimizer:
        for k in selected:
            state.optimizers.setdefault(k, AdamState.zeros(spec.size))
    jobs = [(k, clients[k], state.params, None if ghosts is None else ghosts[k], config, t,
             state.optimizers.get(k)) for k in selected]
    if config.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(_local_step, jobs))
    else:
        results = [_local_step(j) for j in jobs]
    experts = {k: r[0] for k, r in zip(selected, results)}
    deltas = {k: r[1] for k, r in zip(selected, results)}
    client_losses = [r[2] for r in results]
    rngs = {k: r[3] for k, r in zip(selected, results)}

    # aggregation weights
    gate_means = None
    if moe:
        means, counts = [], []
        for k in selected:
            x, _ = _gate_batch(clients[k])
            m = gate_weights(state.gating, x).mean(axis=0)
            if config.privacy != "off" and config.noise.noise_std > 0:
                m = project_simplex(gaussian_mechanism(clip_update(m, config.noise.clip_norm), config.noise, rngs[k]))
            means.append(m)
            counts.append(len(x))
        counts = np.asarray(counts, dtype=np.float64)
        wbar = (counts / counts.sum()) @ np.array(means)
        gate_means = wbar
        weights = wbar[selected] / wbar[selected].sum() if len(selected) < K else wbar
    else:
        sizes = [max(clients[k].n_train, 1) for k in selected]
        weights = fedavg_weights(sizes)

    if config.privacy == "dp+secureagg":
        agg, sent = secure_sum([w * deltas[k] for w, k in zip(weights, selected)],
                               _stream(config.seed, _SHARES, t))
        new_params = ModelParams(spec, state.params.vector + agg)
        nbytes += sent + len(selected) * 8 * state.gating.n_experts if moe else sent
    else:
        updates = [experts[k] for k in selected]
        if moe:
            new_params = moe_aggregate(updates, weights)
        else:
            new_params = fedavg_aggregate(updates, [max(clients[k].n_train, 1) for k in selected])
        nbytes += len(selected) * 8 * (spec.size + (K if moe else 0))

    gate_H = None
    if moe:
        gate_H = _gate_update(state, clients, experts, ghosts, config, rngs, t)
        nbytes += len(selected) * 8 * state.gating.size

    state.params = new_params
    state.round = t
    eps_round = eps_adv = eps_lit = None
    if config.privacy != "off":
        eps_round = config.noise.effective_epsilon
        state.ledger.record(t, eps_round, config.dp.delta, config.sampling_q)
        if math.isfinite(eps_round):
            eps_adv = compose_budget(state.ledger, ADVANCED)[0]
            eps_lit = compose_budget(state.ledger, LITERAL)[0]
        else:
            eps_adv = eps_lit = math.inf

    scores, labels, _ = predict(new_params, clients, ghosts, "val", config.uniform_attention)
    m = compute_metrics(scores, labels) if len(scores) else None
    record = RoundRecord(
        round=t,
        client_losses=[float(x) for x in client_losses],
        val_loss=_val_loss(new_params, clients, ghosts, config.uniform_attention),
        val_accuracy=m.accuracy if m else math.nan,
        val_f1=m.f1 if m else math.nan,
        val_auc=m.auc if m else None,
        gate_weights=None if gate_means is None else [float(x) for x in gate_means],
        gate_entropy=gate_H,
        seconds=time.perf_counter() - t0,
        bytes=int(nbytes),
        epsilon_round=eps_round,
        epsilon_advanced=eps_adv,
        epsilon_literal=eps_lit,
    )
    return new_params, record


def _gate_update(state, clients, experts, ghosts, config, rngs, t):
    """One Adam step on the gate from client-side gradients on validation batches."""
    K = len(clients)
    expert_list = [experts.get(k, state.params) for k in range(K)]
    grads, counts, ents = [], [], []
    for c_idx, c in enumerate(clients):
        mask = c.val_mask if c.val_mask.any() else np.ones(c.n_nodes, bool)
        g = None if ghosts is None else ghosts[c_idx]
        preds = np.stack([
            expit(model_logits(e, c.view, ghosts=g, uniform_attention=config.uniform_attention)[mask])
            for e in expert_list
        ], axis=1)
        x = c.view.x[mask]
        _, grad = moe_loss_grad(state.gating, x, preds, c.y[mask], config.gamma, config.entropy_sign)
        rng = rngs.get(c_idx) or client_rng(config.seed, c_idx, t)
        grads.append(_privatize(grad, config, rng))
        counts.append(len(x))
        ents.append(entropy(gate_weights(state.gating, x)).sum())
    counts = np.asarray(counts, dtype=np.float64)
    grad = (counts / counts.sum()) @ np.array(grads)
    new = adam_step(state.gating.flatten(), grad, state.gate_adam, config.gate_lr)
    state.gating = state.gating.unflatten(new)
    return float(np.sum(ents) / counts.sum())


def init_state(clients, config: RoundConfig, spec: ModelSpec, params=None) -> ServerState:
    if params is None:
        params = init_params(spec, _stream(config.seed, _INIT))
    state = ServerState(params=params, ledger=PrivacyLedger(config.accountant))
    if config.aggregation == "moe":
        state.gating = GatingParams.init(spec.in_dim, len(clients), config.gate_hidden,
                                         _stream(config.seed, _GATE))
        state.gate_adam = AdamState.zeros(state.gating.size)
    if config.cross_border != "off" and any(c.n_ghost for c in clients):
        state.keyring = KeyRing.generate(len(clients), config.key_bits, config.seed)
    return state


@dataclass
class FederatedRun:
    params: ModelParams
    history: list
    state: ServerState
    clients: list
    config: RoundConfig

    @property
    def ghosts(self):
        return self.state.ghosts

    def predict(self, split="test"):
        return predict(self.params, self.clients, self.state.ghosts, split, self.config.uniform_attention)


def run_federated(graph, partition, config: RoundConfig, splits=None, *, with_edges=True,
                  clients=None, params=None, on_round=None) -> FederatedRun:
    if splits is None:
        splits = split_dataset(graph, seed=config.seed, assignment=partition.assignment)
    if clients is None:
        clients = build_clients(graph, partition, splits, with_edges=with_edges,
                                with_ghosts=config.cross_border != "off")
    spec = ModelSpec.from_hyper(config.hyper, graph.node_dim, graph.edge_dim)
    state = init_state(clients, config, spec, params)
    history = []
    for _ in range(config.rounds):
        _, rec = run_round(state, clients, config)
        history.append(rec)
        if on_round is not None:
            on_round(rec)
    return FederatedRun(state.params, history, state, clients, config)


def train(dataset, partition, config: RoundConfig, splits=None):
    """Run ``config.rounds`` rounds; returns ``(final params, history)``."""
    run = run_federated(dataset, partition, config, splits)
    return run.params, run.history


HISTORY_HEADER = [
    "round", "val_loss", "val_accuracy", "val_f1", "val_auc", "mean_client_loss", "client_losses",
    "gate_weights", "gate_entropy", "seconds", "bytes", "epsilon_round", "epsilon_total_advanced",
    "epsilon_total_literal",
]


def _f(x, timing=False):
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(x, ".6f") if timing else format(x, ".10g")


def history_rows(history, include_timing=True):
    for r in history:
        losses = [x for x in r.client_losses if not math.isnan(x)]
        yield [
            r.round, _f(r.val_loss), _f(r.val_accuracy), _f(r.val_f1), _f(r.val_auc),
            _f(float(np.mean(losses))) if losses else "nan",
            ";".join(_f(x) for x in r.client_losses),
            "" if r.gate_weights is None else ";".join(_f(x) for x in r.gate_weights),
            _f(r.gate_entropy),
            _f(r.seconds, True) if include_timing else "",
            r.bytes, _f(r.epsilon_round), _f(r.epsilon_advanced), _f(r.epsilon_literal),
        ]


def write_history(history, path, include_timing=True):
    """Write ``history.csv``. ``include_timing=False`` blanks wall-clock seconds for reproducible files."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        w.writerows(history_rows(history, include_timing))
