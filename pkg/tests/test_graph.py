from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from fedgraph.errors import ConfigError, DatasetParseError, InfeasibleScenarioError, SplitError, UnknownNodeError
from fedgraph.graph import (
    EDGE_DIM,
    NODE_DIM,
    GeneratorConfig,
    TransactionGraph,
    generate_dataset,
    table1_config,
)
from fedgraph.graph.io import EDGE_HEADER, NODE_HEADER, load_dataset, load_scenarios, save_dataset
from fedgraph.graph.ops import khop_nodes, khop_subgraph, partition_graph, split_dataset, stratum_counts


def _graph(n, edges, labels=None, jur=None):
    src = [e[0] for e in edges]
    dst = [e[1] for e in edges]
    return TransactionGraph(
        node_ids=np.arange(n),
        node_features=np.zeros((n, NODE_DIM)),
        labels=np.zeros(n, int) if labels is None else labels,
        edge_src=src,
        edge_dst=dst,
        edge_features=np.zeros((len(edges), EDGE_DIM)),
        edge_ts=np.zeros(len(edges), int),
        jurisdiction=jur,
    )


# --- generator ---------------------------------------------------------------

def test_default_matches_dataset_statistics(default_dataset):
    g, scenarios = default_dataset
    assert g.n_nodes == 1000
    assert g.node_dim == 15 and g.edge_dim == 8
    assert abs(g.labels.mean() - 0.0493) <= 0.005
    assert len(g.transactions) == 50_000
    assert abs(g.n_edges - 2991) <= 150
    part = partition_graph(g, 10)
    assert abs(part.cross_border_fraction() - 0.32) <= 0.02
    assert scenarios


def test_zero_anomaly_rate_gives_no_scenarios():
    g, scenarios = generate_dataset(table1_config(seed=3, n_nodes=200, n_transactions=4000, anomaly_rate=0.0))
    assert scenarios == []
    assert g.labels.sum() == 0


def test_small_config_counts_by_scan():
    g, scenarios = generate_dataset(GeneratorConfig(n_nodes=12, n_transactions=40, n_jurisdictions=2,
                                                    anomaly_rate=0.25))
    assert g.n_nodes == 12
    labeled = [int(v) for v, y in zip(g.node_ids, g.labels) if y == 1]
    assert len(labeled) == 3
    planted = set()
    for s in scenarios:
        for p in s.participants:
            assert g.labels[g.index[p]] == 1
            planted.add(p)
    assert planted == set(labeled)
    assert len(g.transactions) <= 40


def test_generator_is_deterministic():
    cfg = table1_config(seed=9, n_nodes=150, n_transactions=3000)
    a, sa = generate_dataset(cfg)
    b, sb = generate_dataset(cfg)
    assert a.equals(b)
    assert [s.to_dict() for s in sa] == [s.to_dict() for s in sb]


def test_invalid_config_raises():
    with pytest.raises(ConfigError):
        GeneratorConfig(anomaly_rate=1.5)
    with pytest.raises(ConfigError):
        GeneratorConfig(n_nodes=3, n_jurisdictions=5)


def test_infeasible_scenario_names_it():
    with pytest.raises(InfeasibleScenarioError) as exc:
        generate_dataset(GeneratorConfig(n_nodes=3, n_transactions=20, n_jurisdictions=1, anomaly_rate=0.9,
                                         scenario_mix=(0, 0, 1, 0)))
    assert "LaunderingChain" in str(exc.value)


# --- partition -----------------------------------------------------------------

def test_single_jurisdiction_has_no_cross_border(default_dataset):
    part = partition_graph(default_dataset[0], 1)
    assert len(part.cross_border_edges) == 0


def test_path_graph_contiguous_split_one_cross_edge():
    g = _graph(6, [(i, i + 1) for i in range(5)])
    part = partition_graph(g, 2, strategy="contiguous")
    assert part.sizes().tolist() == [3, 3]
    assert part.cross_border_edges.tolist() == [2]
    # enumerate the edges against the assignment
    a = part.assignment
    assert sum(a[s] != a[d] for s, d in zip(g.edge_src, g.edge_dst)) == 1


def test_partition_k_exceeds_nodes():
    with pytest.raises(ConfigError):
        partition_graph(_graph(3, [(0, 1)]), 4)


def test_partition_views_cover_nodes(desk_dataset):
    g = desk_dataset[0]
    part = partition_graph(g, 5)
    ids = np.concatenate([v.node_ids for v in part.local_views])
    assert sorted(ids.tolist()) == g.node_ids.tolist()
    internal = sum(len(v.edge_index) for v in part.local_views)
    assert internal + len(part.cross_border_edges) == g.n_edges


# --- k-hop ---------------------------------------------------------------------

def _bfs(n, edges, c, h):
    adj = {i: set() for i in range(n)}
    for s, d in edges:
        adj[s].add(d)
        adj[d].add(s)
    dist = {c: 0}
    q = deque([c])
    while q:
        v = q.popleft()
        for u in adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return {v for v, d in dist.items() if d <= h}


def test_khop_zero_is_center_only():
    g = _graph(4, [(0, 1), (1, 2)])
    sub = khop_subgraph(g, 1, 0)
    assert sub.node_ids.tolist() == [1]
    assert sub.meta["center"] == 1


def test_khop_star_is_whole_star():
    g = _graph(6, [(0, i) for i in range(1, 6)])
    assert sorted(khop_nodes(g, 0, 1)) == list(range(6))


def test_khop_matches_bfs_oracle():
    rng = np.random.default_rng(4)
    edges = [tuple(int(x) for x in rng.choice(10, 2, replace=False)) for _ in range(12)]
    g = _graph(10, edges)
    assert set(khop_nodes(g, 0, 2)) == _bfs(10, edges, 0, 2)


def test_khop_unknown_node():
    with pytest.raises(UnknownNodeError):
        khop_nodes(_graph(2, [(0, 1)]), 7, 1)


# --- split ---------------------------------------------------------------------

def test_split_all_train():
    g = _graph(10, [], labels=np.array([0] * 8 + [1] * 2))
    tr, va, te = split_dataset(g, (1, 0, 0))
    assert len(tr) == 10 and len(va) == 0 and len(te) == 0


def test_split_default_sizes(default_dataset):
    g = default_dataset[0]
    tr, va, te = split_dataset(g, (0.6, 0.2, 0.2), seed=1)
    assert abs(len(tr) - 600) <= 10 and abs(len(va) - 200) <= 10 and abs(len(te) - 200) <= 10
    assert len(tr) + len(va) + len(te) == 1000
    assert not set(tr) & set(va) and not set(tr) & set(te) and not set(va) & set(te)


def test_split_positive_counts_follow_rounding_oracle():
    labels = np.array([1] * 5 + [0] * 15)
    g = _graph(20, [], labels=labels)
    parts = split_dataset(g, (0.6, 0.2, 0.2), seed=0)
    # 5 positives: round(3.0)=3, round(1.0)=1, rest 1; 15 negatives: 9, 3, 3
    assert stratum_counts(5, (0.6, 0.2, 0.2)) == (3, 1, 1)
    assert stratum_counts(15, (0.6, 0.2, 0.2)) == (9, 3, 3)
    assert [int(labels[p].sum()) for p in parts] == [3, 1, 1]
    assert [len(p) for p in parts] == [12, 4, 4]


def test_split_too_small_stratum():
    g = _graph(4, [], jur=np.array([0, 0, 0, 1]))
    with pytest.raises(SplitError, match="jurisdiction 1"):
        split_dataset(g, (0.6, 0.2, 0.2))


# --- io ------------------------------------------------------------------------

def test_roundtrip(tmp_path, default_dataset):
    g, scenarios = default_dataset
    save_dataset(g, tmp_path / "d", scenarios)
    back = load_dataset(tmp_path / "d")
    assert back.equals(g)
    assert [s.to_dict() for s in load_scenarios(tmp_path / "d")] == [s.to_dict() for s in scenarios]


def test_empty_graph_roundtrip(tmp_path):
    g = _graph(0, [])
    save_dataset(g, tmp_path)
    back = load_dataset(tmp_path)
    assert back.n_nodes == 0 and back.n_edges == 0


def _write_fixture(path):
    feats = ",".join(["0.5"] * NODE_DIM)
    efeats = ",".join(["1.0"] * EDGE_DIM)
    (path / "nodes.csv").write_text(
        ",".join(NODE_HEADER) + "\n"
        + f"10,{feats},0,0\n20,{feats},1,0\n30,{feats},0,1\n"
    )
    (path / "edges.csv").write_text(",".join(EDGE_HEADER) + "\n" + f"10,20,{efeats},5\n20,30,{efeats},7\n")
    (path / "meta.json").write_text("{}")


def test_hand_written_fixture(tmp_path):
    _write_fixture(tmp_path)
    g = load_dataset(tmp_path)
    assert g.node_ids.tolist() == [10, 20, 30]
    assert g.labels.tolist() == [0, 1, 0]
    assert g.jurisdiction.tolist() == [0, 0, 1]
    assert list(zip(g.edge_src.tolist(), g.edge_dst.tolist())) == [(10, 20), (20, 30)]
    assert g.edge_ts.tolist() == [5, 7]
    assert np.all(g.node_features == 0.5)


def test_malformed_file_reports_location(tmp_path):
    _write_fixture(tmp_path)
    text = (tmp_path / "nodes.csv").read_text().replace("\n20,0.5", "\n20,abc", 1)
    (tmp_path / "nodes.csv").write_text(text)
    with pytest.raises(DatasetParseError) as exc:
        load_dataset(tmp_path)
    assert exc.value.line == 3
    assert "nodes.csv" in str(exc.value)
