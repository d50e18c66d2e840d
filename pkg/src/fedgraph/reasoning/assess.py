"""Second-stage assessment of high-risk nodes and the blended final score."""

from __future__ import annotations

import json
import logging
from decimal import Decimal
from pathlib import Path

from ..errors import ConfigError
from ..graph.ops import khop_subgraph
from ..graph.types import TransactionGraph
from .engine import RuleEngine
from .history import build_history
from .hypotheses import generate_hypotheses
from .types import AssessConfig, ThreatAssessment

log = logging.getLogger(__name__)


def _dec(x):
    return Decimal(repr(float(x)))


def blend(p_gnn, p_lam, config: AssessConfig | None = None):
    """``w_gnn * p_gnn + w_lam * p_lam``.

    Evaluated in decimal on the shortest representation of each input and
    rounded once, so that e.g. ``blend(0.8, 0.9)`` is the float ``0.84``
    rather than ``0.8400000000000001``. Rounding is monotone, so the result
    still lies between ``p_gnn`` and ``p_lam``.
    """
    config = config or AssessConfig()
    return float(_dec(config.w_gnn) * _dec(p_gnn) + _dec(config.w_lam) * _dec(p_lam))


def assess(node, p_gnn, graph: TransactionGraph, history=None, engine=None,
           config: AssessConfig | None = None) -> ThreatAssessment:
    """Refine one node's score.

    Nodes at or below the threshold pass through unchanged. Above it the
    ``hops``-hop subgraph and the node's history are analysed; the best
    hypothesis score ``p_lam`` is blended in and explained. Scoring failures
    degrade to a passthrough with ``warning`` set.
    """
    config = config or AssessConfig()
    p_gnn = float(p_gnn)
    if not 0.0 <= p_gnn <= 1.0:
        raise ConfigError(f"p_gnn must lie in [0, 1], got {p_gnn}")
    node = int(node)
    if not p_gnn > config.threshold:
        return ThreatAssessment(node, p_gnn, p_gnn)
    engine = engine or RuleEngine()
    subgraph = khop_subgraph(graph, node, config.hops)
    if history is None:
        history = build_history(graph, node, window=config.history_window)
    hypotheses = tuple(generate_hypotheses(subgraph, history))
    try:
        scores = [float(engine.score(subgraph, history, h)) for h in hypotheses]
        if any(not 0.0 <= s <= 1.0 for s in scores):
            raise ValueError("engine returned a score outside [0, 1]")
        if scores:
            best = max(range(len(scores)), key=lambda i: scores[i])
            p_lam, winner = scores[best], hypotheses[best]
            explanation = tuple(engine.explain(winner, subgraph, history))
        else:
            p_lam, winner = 0.0, None
            explanation = ()
    except Exception as exc:  # fail open on scoring, never on the pipeline
        log.warning("engine failed on node %d: %s", node, exc)
        return ThreatAssessment(node, p_gnn, p_gnn, hypotheses=hypotheses,
                                warning=f"engine failure: {exc}")
    return ThreatAssessment(
        node=node,
        p_gnn=p_gnn,
        p_final=blend(p_gnn, p_lam, config),
        p_lam=p_lam,
        hypothesis=winner,
        explanation=explanation,
        hypotheses=hypotheses,
    )


def assess_nodes(node_ids, scores, graph, engine=None, config=None):
    """Assess every node; returns assessments in input order."""
    engine = engine or RuleEngine()
    return [assess(v, p, graph, engine=engine, config=config) for v, p in zip(node_ids, scores)]


def write_assessments(assessments, path):
    """One JSON object per line, in the given order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for a in assessments:
            fh.write(json.dumps(a.to_dict(), sort_keys=True) + "\n")
    return path


def read_assessments(path):
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
