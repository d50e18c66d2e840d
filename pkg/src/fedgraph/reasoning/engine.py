"""Deterministic rule-based engine that scores and explains threat hypotheses.

The score is ``logistic(BIAS + sum_f WEIGHTS[f] * factor_f)`` with every
factor in ``[0, 1]``:

========================  =====  ==============================================
factor                    weight meaning
========================  =====  ==============================================
``chain_length``          4.0    ``(hops - 2) / 3`` capped at 1
``clique_size``           4.0    ``(members - 1) / 3`` capped at 1
``escalation``            4.0    ``role gain / 4`` capped at 1
``off_hours``             3.0    ``(rate - 0.1) / 0.4`` clipped to ``[0, 1]``
``attention``             1.0    precondition-event attention concentration
========================  =====  ==============================================

Only the structural factor that belongs to the hypothesis kind is non-zero;
off-hours and attention evidence apply to every kind. With no evidence the
score is ``logistic(-2) ~ 0.119``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..graph.types import TX_TYPES, ScenarioKind, TransactionGraph
from .attention import CausalAttentionParams, causal_attention, precondition_concentration
from .types import STEP_NAMES, ExplanationStep, ThreatHypothesis, TransactionHistory

BIAS = -2.0
WEIGHTS = {
    "chain_length": 4.0,
    "clique_size": 4.0,
    "escalation": 4.0,
    "off_hours": 3.0,
    "attention": 1.0,
}


class ReasoningEngine(Protocol):
    """What the assessment pipeline needs from a second-stage model."""

    def score(self, subgraph: TransactionGraph, history: TransactionHistory,
              hypothesis: ThreatHypothesis) -> float: ...

    def explain(self, hypothesis: ThreatHypothesis, subgraph: TransactionGraph,
                history: TransactionHistory) -> list: ...


def logistic(z):
    return 1.0 / (1.0 + math.exp(-z))


def _clip01(x):
    return float(min(1.0, max(0.0, x)))


@dataclass
class RuleEngine:
    """Weighted evidence sum squashed through a logistic."""

    weights: dict = field(default_factory=lambda: dict(WEIGHTS))
    bias: float = BIAS
    attention: CausalAttentionParams = field(default_factory=CausalAttentionParams.default)

    def factors(self, subgraph, history, hypothesis: ThreatHypothesis):
        f = dict.fromkeys(self.weights, 0.0)
        d = hypothesis.detail
        if hypothesis.kind is ScenarioKind.LAUNDERING_CHAIN:
            f["chain_length"] = _clip01((d.get("hops", 0) - 2) / 3)
        elif hypothesis.kind is ScenarioKind.COLLUSION_NETWORK:
            f["clique_size"] = _clip01((d.get("size", 0) - 1) / 3)
        elif hypothesis.kind is ScenarioKind.PRIVILEGE_ESCALATION:
            f["escalation"] = _clip01(d.get("magnitude", 0) / 4)
        if history is not None and len(history):
            f["off_hours"] = _clip01((history.off_hours_rate - 0.1) / 0.4)
            if len(hypothesis.events) >= 2:
                attn = causal_attention(history, self.attention)
                f["attention"] = precondition_concentration(attn, hypothesis.events)
        return f

    def score(self, subgraph, history, hypothesis):
        f = self.factors(subgraph, history, hypothesis)
        return logistic(self.bias + sum(self.weights[k] * v for k, v in f.items()))

    def explain(self, hypothesis, subgraph, history):
        return explain(hypothesis, subgraph, history, engine=self)


def _fmt_ts(t):
    return f"day {t / 86_400:.2f}"


def _path_edges(nodes):
    return tuple(zip(nodes, nodes[1:]))


def explain(hypothesis: ThreatHypothesis, subgraph: TransactionGraph, history: TransactionHistory,
            engine: RuleEngine | None = None):
    """The five ordered reasoning steps for ``hypothesis``, each citing evidence ids.

    Every cited node exists in ``subgraph`` and every cited edge is a
    ``(src, dst)`` edge of ``subgraph``.
    """
    engine = engine or RuleEngine()
    kind = hypothesis.kind
    d = hypothesis.detail
    center = int(history.node) if history is not None else int(subgraph.meta.get("center", -1))
    known_edges = subgraph.edge_lookup
    nodes = tuple(v for v in hypothesis.nodes if subgraph.has_node(v))
    edges = tuple(e for e in hypothesis.edges if tuple(e) in known_edges)
    events = [history.events[i] for i in hypothesis.events] if history is not None else []
    none = "no evidence"

    # 1. preconditions
    if kind is ScenarioKind.LAUNDERING_CHAIN:
        pre = f"temporal path of {d.get('hops', 0)} hops forwarding {d.get('forwarded', [])} of each amount"
    elif kind is ScenarioKind.COLLUSION_NETWORK:
        pre = f"clique of {d.get('size', 0)} accounts transacting pairwise inside one window"
    elif kind is ScenarioKind.PRIVILEGE_ESCALATION:
        pre = f"privilege operations towards role levels {d.get('target_roles', [])}"
    else:
        pre = f"{d.get('rate', 0.0):.0%} of {d.get('n_events', 0)} events outside business hours"
    steps = [ExplanationStep(STEP_NAMES[0], pre if nodes else none, nodes, edges)]

    # 2. acquisition path: an actual path in the subgraph where one exists
    path_nodes, path_edges = (), ()
    if kind is ScenarioKind.LAUNDERING_CHAIN:
        path = [v for v in d.get("path", []) if subgraph.has_node(v)]
        if len(path) == len(d.get("path", [])):
            path_nodes, path_edges = tuple(path), _path_edges(tuple(path))
    elif kind is ScenarioKind.PRIVILEGE_ESCALATION and len(nodes) > 1:
        top = nodes[-1]
        if (center, top) in known_edges:
            path_nodes, path_edges = (center, top), ((center, top),)
    elif edges:
        path_nodes, path_edges = tuple(dict.fromkeys(edges[0])), (edges[0],)
    if path_edges:
        text = " -> ".join(str(v) for v in path_nodes)
    else:
        text = none
    steps.append(ExplanationStep(STEP_NAMES[1], text, path_nodes, path_edges))

    # 3. timing consistency
    if kind is ScenarioKind.LAUNDERING_CHAIN and d.get("gaps_h"):
        text = f"hops follow each other after {d['gaps_h']} hours"
    elif hypothesis.window is not None and events:
        t0, t1 = hypothesis.window
        text = f"{len(events)} events between {_fmt_ts(t0)} and {_fmt_ts(t1)}"
    else:
        text = none
    tim_edges = tuple(dict.fromkeys(history.edge_of(i) for i in hypothesis.events)) if history else ()
    tim_edges = tuple(e for e in tim_edges if e in known_edges)
    tim_nodes = tuple(dict.fromkeys(v for e in tim_edges for v in e))
    if kind is ScenarioKind.LAUNDERING_CHAIN:
        tim_nodes, tim_edges = path_nodes, path_edges
    steps.append(ExplanationStep(STEP_NAMES[2], text, tim_nodes, tim_edges))

    # 4. causal chain of events, in time order
    if kind is ScenarioKind.LAUNDERING_CHAIN:
        cause_edges = path_edges
        text = " then ".join(f"{a}->{b}" for a, b in cause_edges) or none
    elif events:
        order = sorted(hypothesis.events, key=lambda i: history.events[i].ts)
        cause_edges = tuple(e for e in dict.fromkeys(history.edge_of(i) for i in order) if e in known_edges)
        text = " then ".join(
            f"{TX_TYPES[history.events[i].kind]} {history.edge_of(i)[0]}->{history.edge_of(i)[1]}"
            for i in order[:8]
        )
        if len(order) > 8:
            text += f" (+{len(order) - 8} more)"
    else:
        cause_edges, text = (), none
    cause_nodes = tuple(dict.fromkeys(v for e in cause_edges for v in e))
    steps.append(ExplanationStep(STEP_NAMES[3], text, cause_nodes, cause_edges))

    # 5. verdict
    f = engine.factors(subgraph, history, hypothesis)
    p = engine.score(subgraph, history, hypothesis)
    parts = ", ".join(f"{k}={v:.3f}" for k, v in f.items() if v)
    steps.append(ExplanationStep(
        STEP_NAMES[4],
        f"{kind.value}: p={p:.4f} ({parts or 'no evidence'})",
        (center,) if subgraph.has_node(center) else (),
        (),
    ))
    return steps


def factor_vector(engine: RuleEngine, subgraph, history, hypothesis):
    f = engine.factors(subgraph, history, hypothesis)
    return np.array([f[k] for k in engine.weights])
