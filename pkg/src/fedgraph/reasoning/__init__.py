"""Second-stage reasoning: hypotheses, causal attention, rule engine, assessment."""

from .assess import assess, assess_nodes, blend, read_assessments, write_assessments
from .attention import (
    CausalAttentionParams,
    causal_attention,
    event_embeddings,
    precondition_concentration,
)
from .engine import BIAS, WEIGHTS, ReasoningEngine, RuleEngine, explain, logistic
from .history import build_history
from .hypotheses import find_chain, generate_hypotheses
from .types import (
    STEP_NAMES,
    AssessConfig,
    Event,
    ExplanationStep,
    ThreatAssessment,
    ThreatHypothesis,
    TransactionHistory,
)

__all__ = [
    "assess",
    "assess_nodes",
    "blend",
    "read_assessments",
    "write_assessments",
    "CausalAttentionParams",
    "causal_attention",
    "event_embeddings",
    "precondition_concentration",
    "BIAS",
    "WEIGHTS",
    "ReasoningEngine",
    "RuleEngine",
    "explain",
    "logistic",
    "build_history",
    "find_chain",
    "generate_hypotheses",
    "STEP_NAMES",
    "AssessConfig",
    "Event",
    "ExplanationStep",
    "ThreatAssessment",
    "ThreatHypothesis",
    "TransactionHistory",
]
