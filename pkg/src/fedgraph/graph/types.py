"""Domain types for the attributed transaction graph."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..errors import ConfigError, DimensionError, UnknownNodeError

NODE_FEATURES = (
    "degree",
    "in_out_ratio",
    "betweenness",
    "tx_frequency",
    "mean_amount",
    "amount_std",
    "off_hours_rate",
    "cross_border_ratio",
    "account_age",
    "role_level",
    "noise_0",
    "noise_1",
    "noise_2",
    "noise_3",
    "noise_4",
)
EDGE_FEATURES = (
    "log_count",
    "log_total_amount",
    "log_mean_amount",
    "log_amount_var",
    "first_ts_frac",
    "last_ts_frac",
    "off_hours_frac",
    "type_entropy",
)
NODE_DIM = len(NODE_FEATURES)
EDGE_DIM = len(EDGE_FEATURES)
ROLE_COLUMN = NODE_FEATURES.index("role_level")

# transaction types
TRANSFER, PAYMENT, WITHDRAWAL, PRIVILEGE = 0, 1, 2, 3
TX_TYPES = ("transfer", "payment", "withdrawal", "privilege")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class ScenarioKind(str, enum.Enum):
    PRIVILEGE_ESCALATION = "PrivilegeEscalation"
    COLLUSION_NETWORK = "CollusionNetwork"
    LAUNDERING_CHAIN = "LaunderingChain"
    OFF_HOURS_ACTIVITY = "OffHoursActivity"


SCENARIO_KINDS = tuple(ScenarioKind)


@dataclass(frozen=True)
class Transactions:
    """Columnar transaction log, sorted by timestamp."""

    ts: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    amount: np.ndarray
    kind: np.ndarray
    off_hours: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ts", _frozen(self.ts, np.int64))
        object.__setattr__(self, "src", _frozen(self.src, np.int64))
        object.__setattr__(self, "dst", _frozen(self.dst, np.int64))
        object.__setattr__(self, "amount", _frozen(self.amount, np.float64))
        object.__setattr__(self, "kind", _frozen(self.kind, np.int64))
        object.__setattr__(self, "off_hours", _frozen(self.off_hours, np.bool_))
        n = len(self.ts)
        for name in ("src", "dst", "amount", "kind", "off_hours"):
            if len(getattr(self, name)) != n:
                raise DimensionError(f"transaction column {name} has wrong length")

    def __len__(self):
        return len(self.ts)

    @classmethod
    def empty(cls):
        return cls(*(np.zeros(0) for _ in range(6)))

    def subset(self, mask):
        return Transactions(
            self.ts[mask], self.src[mask], self.dst[mask],
            self.amount[mask], self.kind[mask], self.off_hours[mask],
        )

    def equals(self, other):
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("ts", "src", "dst", "amount", "kind", "off_hours")
        )


@dataclass(frozen=True, eq=False)
class TransactionGraph:
    """Directed attributed graph with node labels and optional transaction log.

    Node ids are arbitrary non-negative integers; rows of ``node_features``,
    ``labels`` and ``jurisdiction`` follow the order of ``node_ids``. Edges
    reference node ids, not row positions.
    """

    node_ids: np.ndarray
    node_features: np.ndarray
    labels: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_features: np.ndarray
    edge_ts: np.ndarray
    jurisdiction: np.ndarray | None = None
    transactions: Transactions | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("node_ids", _frozen(self.node_ids, np.int64))
        n = len(self.node_ids)
        feats = np.asarray(self.node_features, dtype=np.float64)
        if feats.size == 0:
            feats = feats.reshape(n, -1) if n else np.zeros((0, NODE_DIM))
        set_("node_features", _frozen(feats, np.float64))
        set_("labels", _frozen(self.labels, np.int8))
        set_("edge_src", _frozen(self.edge_src, np.int64))
        set_("edge_dst", _frozen(self.edge_dst, np.int64))
        efeats = np.asarray(self.edge_features, dtype=np.float64)
        if efeats.size == 0:
            efeats = np.zeros((len(self.edge_src), EDGE_DIM))
        set_("edge_features", _frozen(efeats, np.float64))
        set_("edge_ts", _frozen(self.edge_ts, np.int64))
        if self.jurisdiction is not None:
            set_("jurisdiction", _frozen(self.jurisdiction, np.int64))

        if self.node_features.ndim != 2 or self.node_features.shape[0] != n:
            raise DimensionError("node_features must be an N x d matrix")
        if self.labels.shape != (n,):
            raise DimensionError("labels must have one entry per node")
        if n and not np.isin(self.labels, (0, 1)).all():
            raise ConfigError("labels must be 0 or 1")
        if self.jurisdiction is not None and self.jurisdiction.shape != (n,):
            raise DimensionError("jurisdiction must have one entry per node")
        m = len(self.edge_src)
        if self.edge_dst.shape != (m,) or self.edge_ts.shape != (m,):
            raise DimensionError("edge columns have inconsistent lengths")
        if self.edge_features.ndim != 2 or self.edge_features.shape[0] != m:
            raise DimensionError("edge_features must be an E x d_e matrix")
        if len(np.unique(self.node_ids)) != n:
            raise ConfigError("node ids must be unique")
        if m:
            known = np.isin(self.edge_src, self.node_ids) & np.isin(self.edge_dst, self.node_ids)
            if not known.all():
                bad = int(np.flatnonzero(~known)[0])
                raise UnknownNodeError(f"edge {bad} references an unknown node")

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_edges(self):
        return len(self.edge_src)

    @property
    def node_dim(self):
        return self.node_features.shape[1]

    @property
    def edge_dim(self):
        return self.edge_features.shape[1]

    @cached_property
    def index(self):
        """Map node id -> row position."""
        return {int(v): i for i, v in enumerate(self.node_ids)}

    def rows(self, ids):
        idx = self.index
        try:
            return np.array([idx[int(v)] for v in ids], dtype=np.int64)
        except KeyError as exc:
            raise UnknownNodeError(f"unknown node {exc.args[0]}") from None

    def has_node(self, node):
        return int(node) in self.index

    def role_level(self, node):
        return int(round(self.node_features[self.index[int(node)], ROLE_COLUMN]))

    @cached_property
    def edge_lookup(self):
        """Map (src, dst) -> edge position."""
        return {(int(s), int(d)): i for i, (s, d) in enumerate(zip(self.edge_src, self.edge_dst))}

    @cached_property
    def undirected_adjacency(self):
        adj = {int(v): set() for v in self.node_ids}
        for s, d in zip(self.edge_src.tolist(), self.edge_dst.tolist()):
            if s != d:
                adj[s].add(d)
                adj[d].add(s)
        return adj

    def equals(self, other):
        """Bit-identical comparison of every field except ``meta``."""
        if not isinstance(other, TransactionGraph):
            return False
        for name in ("node_ids", "node_features", "labels", "edge_src",
                     "edge_dst", "edge_features", "edge_ts"):
            if not np.array_equal(getattr(self, name), getattr(other, name)):
                return False
        if (self.jurisdiction is None) != (other.jurisdiction is None):
            return False
        if self.jurisdiction is not None and not np.array_equal(self.jurisdiction, other.jurisdiction):
            return False
        if (self.transactions is None) != (other.transactions is None):
            return False
        if self.transactions is not None and not self.transactions.equals(other.transactions):
            return False
        return True

    def induced(self, ids):
        """Induced subgraph on the given node ids (order preserved from self)."""
        keep = np.isin(self.node_ids, np.asarray(list(ids), dtype=np.int64))
        kept_ids = self.node_ids[keep]
        emask = np.isin(self.edge_src, kept_ids) & np.isin(self.edge_dst, kept_ids)
        tx = None
        if self.transactions is not None:
            t = self.transactions
            tx = t.subset(np.isin(t.src, kept_ids) & np.isin(t.dst, kept_ids))
        return TransactionGraph(
            node_ids=kept_ids,
            node_features=self.node_features[keep],
            labels=self.labels[keep],
            edge_src=self.edge_src[emask],
            edge_dst=self.edge_dst[emask],
            edge_features=self.edge_features[emask],
            edge_ts=self.edge_ts[emask],
            jurisdiction=None if self.jurisdiction is None else self.jurisdiction[keep],
            transactions=tx,
            meta=dict(self.meta),
        )


@dataclass(frozen=True)
class GeneratorConfig:
    n_nodes: int = 1000
    n_transactions: int = 50_000
    n_jurisdictions: int = 10
    anomaly_rate: float = 0.0493
    cross_border_fraction: float = 0.32
    duration_days: int = 730
    seed: int = 0
    scenario_mix: tuple = (0.2, 0.3, 0.3, 0.2)
    avg_degree: float = 2.991
    # non-IID knobs: jurisdiction size skew, spread of per-jurisdiction
    # behavioural shifts, and per-jurisdiction concentration of scenario mix
    size_skew: float = 0.0
    feature_shift: float = 0.0
    mix_concentration: float = 0.0
    decoy_rate: float = 0.06

    def __post_init__(self):
        if isinstance(self.scenario_mix, dict):
            mix = tuple(float(self.scenario_mix.get(k.value, 0.0)) for k in SCENARIO_KINDS)
            object.__setattr__(self, "scenario_mix", mix)
        else:
            object.__setattr__(self, "scenario_mix", tuple(float(w) for w in self.scenario_mix))
        self.validate()

    def validate(self):
        if int(self.n_nodes) < 1:
            raise ConfigError("n_nodes must be >= 1")
        if int(self.n_jurisdictions) < 1:
            raise ConfigError("n_jurisdictions must be >= 1")
        if self.n_jurisdictions > self.n_nodes:
            raise ConfigError("n_jurisdictions cannot exceed n_nodes")
        if not 0.0 <= self.anomaly_rate <= 1.0:
            raise ConfigError("anomaly_rate must lie in [0, 1]")
        if not 0.0 <= self.cross_border_fraction <= 1.0:
            raise ConfigError("cross_border_fraction must lie in [0, 1]")
        if self.n_transactions < 0 or self.duration_days < 1:
            raise ConfigError("n_transactions must be >= 0 and duration_days >= 1")
        if len(self.scenario_mix) != len(SCENARIO_KINDS) or min(self.scenario_mix) < 0:
            raise ConfigError("scenario_mix needs four non-negative weights")
        if self.anomaly_rate > 0 and sum(self.scenario_mix) <= 0:
            raise ConfigError("scenario_mix must have positive total weight")
        if self.avg_degree <= 0 or self.size_skew < 0 or self.feature_shift < 0:
            raise ConfigError("avg_degree must be > 0; skew and shift must be >= 0")
        if not 0.0 <= self.decoy_rate <= 1.0:
            raise ConfigError("decoy_rate must lie in [0, 1]")

    def to_dict(self):
        d = dict(self.__dict__)
        d["scenario_mix"] = {k.value: w for k, w in zip(SCENARIO_KINDS, self.scenario_mix)}
        return d


@dataclass(frozen=True)
class ThreatScenario:
    kind: ScenarioKind
    participants: tuple
    edges: tuple  # ((src, dst, ts), ...) in time order

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "participants": [int(p) for p in self.participants],
            "edges": [[int(s), int(d), int(t)] for s, d, t in self.edges],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            ScenarioKind(d["kind"]),
            tuple(int(p) for p in d["participants"]),
            tuple(tuple(int(x) for x in e) for e in d["edges"]),
        )


@dataclass(frozen=True)
class LocalView:
    """One jurisdiction's share of the graph."""

    node_ids: np.ndarray
    edge_index: np.ndarray  # positions into the global edge arrays

    @property
    def n_nodes(self):
        return len(self.node_ids)


@dataclass(frozen=True, eq=False)
class JurisdictionPartition:
    K: int
    assignment: np.ndarray  # jurisdiction index per global node row
    local_views: tuple
    cross_border_edges: np.ndarray  # positions into the global edge arrays
    graph: TransactionGraph = field(repr=False, default=None)

    def jurisdiction_of(self, node):
        return int(self.assignment[self.graph.index[int(node)]])

    def sizes(self):
        return np.array([v.n_nodes for v in self.local_views])

    def cross_border_fraction(self):
        if self.graph.n_edges == 0:
            return 0.0
        return len(self.cross_border_edges) / self.graph.n_edges
