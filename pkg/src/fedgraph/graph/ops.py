"""Partitioning, neighbourhood extraction and train/val/test splitting."""

from __future__ import annotations

from collections import deque

import numpy as np

from ..errors import ConfigError, SplitError, UnknownNodeError
from .types import JurisdictionPartition, LocalView, TransactionGraph


def _uniform_assignment(n, k, seed):
    base = np.arange(n) % k
    rng = np.random.default_rng(seed)
    return base[rng.permutation(n)]


def partition_graph(graph: TransactionGraph, K: int, seed=0, strategy="auto", assignment=None):
    """Split ``graph`` over ``K`` jurisdictions.

    Strategies:
      ``native``     use the jurisdiction column emitted by the generator;
      ``uniform``    seeded random balanced assignment (sizes differ by <= 1);
      ``contiguous`` consecutive blocks in node order;
      ``auto``       ``native`` when the graph carries ``K`` jurisdictions,
                     otherwise ``uniform``.
    An explicit ``assignment`` (one index per node row) overrides the strategy.
    """
    K = int(K)
    n = graph.n_nodes
    if K < 1:
        raise ConfigError("K must be >= 1")
    if K > n:
        raise ConfigError(f"K={K} exceeds node count {n}")

    if assignment is not None:
        assign = np.asarray(assignment, dtype=np.int64)
        if assign.shape != (n,) or (n and (assign.min() < 0 or assign.max() >= K)):
            raise ConfigError("assignment must map every node to [0, K)")
    else:
        if strategy == "auto":
            native_ok = (
                graph.jurisdiction is not None
                and n > 0
                and int(graph.jurisdiction.max()) < K
                and len(np.unique(graph.jurisdiction)) == K
            )
            strategy = "native" if native_ok else "uniform"
        if strategy == "native":
            if graph.jurisdiction is None:
                raise ConfigError("graph carries no jurisdiction column")
            assign = graph.jurisdiction.copy()
            if n and assign.max() >= K:
                raise ConfigError("graph jurisdictions exceed K")
        elif strategy == "uniform":
            assign = _uniform_assignment(n, K, seed)
        elif strategy == "contiguous":
            sizes = np.full(K, n // K)
            sizes[: n % K] += 1
            assign = np.repeat(np.arange(K), sizes)
        else:
            raise ConfigError(f"unknown partition strategy {strategy!r}")

    rows_src = graph.rows(graph.edge_src) if graph.n_edges else np.zeros(0, np.int64)
    rows_dst = graph.rows(graph.edge_dst) if graph.n_edges else np.zeros(0, np.int64)
    j_src, j_dst = assign[rows_src], assign[rows_dst]
    cross = np.flatnonzero(j_src != j_dst)
    views = []
    for k in range(K):
        ids = graph.node_ids[assign == k]
        internal = np.flatnonzero((j_src == k) & (j_dst == k))
        views.append(LocalView(node_ids=ids, edge_index=internal))
    assign.setflags(write=False)
    return JurisdictionPartition(
        K=K,
        assignment=assign,
        local_views=tuple(views),
        cross_border_edges=cross,
        graph=graph,
    )


def khop_nodes(graph: TransactionGraph, center, h):
    """Node ids within ``h`` undirected hops of ``center``, in BFS order."""
    if not graph.has_node(center):
        raise UnknownNodeError(f"unknown node {center}")
    if h < 0:
        raise ConfigError("hop count must be >= 0")
    adj = graph.undirected_adjacency
    seen = {int(center): 0}
    queue = deque([int(center)])
    while queue:
        v = queue.popleft()
        if seen[v] == h:
            continue
        for u in sorted(adj[v]):
            if u not in seen:
                seen[u] = seen[v] + 1
                queue.append(u)
    return list(seen)


def khop_subgraph(graph: TransactionGraph, center, h):
    """Induced subgraph on every node within ``h`` undirected hops of ``center``."""
    sub = graph.induced(khop_nodes(graph, center, h))
    meta = dict(sub.meta)
    meta["center"] = int(center)
    meta["hops"] = int(h)
    object.__setattr__(sub, "meta", meta)
    return sub


def stratum_counts(m, ratios):
    """Per-split counts for a stratum of size ``m``.

    Train and validation take ``round(r * m)`` (half rounds up), capped so the
    total never exceeds ``m``; test receives the remainder.
    """
    r_train, r_val, _ = ratios
    n_train = min(m, int(np.floor(r_train * m + 0.5)))
    n_val = min(m - n_train, int(np.floor(r_val * m + 0.5)))
    return n_train, n_val, m - n_train - n_val


def split_dataset(graph: TransactionGraph, ratios=(0.6, 0.2, 0.2), seed=0, assignment=None):
    """Stratified (jurisdiction x label) split into disjoint train/val/test id sets."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError("ratios must be three non-negative numbers summing to 1")
    if assignment is None:
        assignment = graph.jurisdiction if graph.jurisdiction is not None else np.zeros(graph.n_nodes, np.int64)
    assignment = np.asarray(assignment)
    rng = np.random.default_rng(seed)
    needed = sum(r > 0 for r in ratios)
    parts = ([], [], [])
    for k in np.unique(assignment):
        in_k = assignment == k
        if in_k.sum() < needed:
            raise SplitError(
                f"jurisdiction {int(k)} has {int(in_k.sum())} node(s); "
                f"cannot fill {needed} non-empty splits"
            )
        for y in (0, 1):
            ids = graph.node_ids[in_k & (graph.labels == y)]
            ids = ids[rng.permutation(len(ids))]
            a, b, _ = stratum_counts(len(ids), ratios)
            parts[0].extend(ids[:a].tolist())
            parts[1].extend(ids[a:a + b].tolist())
            parts[2].extend(ids[a + b:].tolist())
    return tuple(np.array(sorted(p), dtype=np.int64) for p in parts)
