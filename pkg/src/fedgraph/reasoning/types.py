"""Value types for the second-stage threat assessment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..graph.types import ScenarioKind

STEP_NAMES = (
    "precondition_check",
    "privilege_path",
    "timing_consistency",
    "causal_chain",
    "verdict",
)


@dataclass(frozen=True)
class Event:
    """One transaction seen from the history owner's side."""

    ts: int
    counterparty: int
    amount: float
    kind: int
    off_hours: bool
    outgoing: bool = True


@dataclass(frozen=True)
class TransactionHistory:
    """Time-ordered events of one node, most recent ``window`` at most."""

    node: int
    events: tuple = ()

    def __post_init__(self):
        ts = [e.ts for e in self.events]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("history events must be strictly ordered by timestamp")

    def __len__(self):
        return len(self.events)

    def edge_of(self, i):
        e = self.events[i]
        return (self.node, e.counterparty) if e.outgoing else (e.counterparty, self.node)

    @property
    def off_hours_rate(self):
        if not self.events:
            return 0.0
        return sum(e.off_hours for e in self.events) / len(self.events)

    def as_array(self):
        """``(T, 5)`` raw rows: timestamp, counterparty, amount, type, off-hours flag."""
        return np.array([[e.ts, e.counterparty, e.amount, e.kind, float(e.off_hours)]
                         for e in self.events], dtype=np.float64).reshape(-1, 5)


@dataclass(frozen=True)
class ThreatHypothesis:
    """A template instantiation: kind plus the slots that ground it in evidence.

    ``nodes`` and ``edges`` reference the evidence subgraph; ``events`` are
    indices into the history that the template used; ``window`` is the
    ``(first, last)`` timestamp span of the grounding events.
    """

    kind: ScenarioKind
    nodes: tuple = ()
    edges: tuple = ()
    events: tuple = ()
    window: tuple | None = None
    detail: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "nodes": [int(v) for v in self.nodes],
            "edges": [[int(a), int(b)] for a, b in self.edges],
            "events": [int(i) for i in self.events],
            "window": None if self.window is None else [int(t) for t in self.window],
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ExplanationStep:
    step: str
    text: str
    evidence_nodes: tuple = ()
    evidence_edges: tuple = ()

    def to_dict(self):
        return {
            "step": self.step,
            "text": self.text,
            "evidence_nodes": [int(v) for v in self.evidence_nodes],
            "evidence_edges": [[int(a), int(b)] for a, b in self.evidence_edges],
        }


@dataclass(frozen=True)
class AssessConfig:
    threshold: float = 0.7
    w_gnn: float = 0.6
    w_lam: float = 0.4
    hops: int = 2
    history_window: int = 256

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must lie in [0, 1]")
        if self.w_gnn < 0 or self.w_lam < 0 or abs(self.w_gnn + self.w_lam - 1.0) > 1e-12:
            raise ConfigError("blend weights must be non-negative and sum to 1")
        if self.hops < 0 or self.history_window < 1:
            raise ConfigError("hops must be >= 0 and history_window >= 1")


@dataclass(frozen=True)
class ThreatAssessment:
    node: int
    p_gnn: float
    p_final: float
    p_lam: float | None = None
    hypothesis: ThreatHypothesis | None = None
    explanation: tuple | None = None
    hypotheses: tuple = ()
    warning: str | None = None

    @property
    def deep(self):
        return self.explanation is not None

    def to_dict(self):
        return {
            "node": int(self.node),
            "p_gnn": float(self.p_gnn),
            "p_lam": None if self.p_lam is None else float(self.p_lam),
            "p_final": float(self.p_final),
            "hypothesis": None if self.hypothesis is None else self.hypothesis.to_dict(),
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "explanation": None if self.explanation is None else [s.to_dict() for s in self.explanation],
            "warning": self.warning,
        }
