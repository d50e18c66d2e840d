from __future__ import annotations

import dataclasses
import json
import math
import os

import mpmath
import numpy as np
import pytest

from fedgraph.errors import ConfigError
from fedgraph.graph import desk_config, generate_dataset
from fedgraph.graph.io import load_dataset, save_dataset
from fedgraph.graph.types import EDGE_DIM, NODE_FEATURES
from fedgraph.harness.cli import main
from fedgraph.harness.config import load_config, profile_dict
from fedgraph.harness.experiments import (
    SIGNAL_FAMILIES,
    family_ranks,
    feature_importance,
    prepare,
    run_comparison,
    run_importance,
    run_privacy_sweep,
    run_scalability,
    run_variant,
    train_plan,
    variant_plan,
)
from fedgraph.harness.metrics import auc_score, compute_metrics

# a few-second configuration: 300 nodes, 3 rounds
FAST = ["dataset.n_nodes=300", "dataset.n_transactions=6000", "federation.rounds=3"]
PLANTED = 10  # feature column that carries the label in the separable fixture


def fast_config(*extra, profile=None):
    return load_config(overrides=[*FAST, *extra], profile=profile)


@pytest.fixture(scope="module")
def separable_dir(tmp_path_factory):
    """An edgeless dataset whose label is a copy of one binary feature column."""
    graph, scenarios = generate_dataset(desk_config(seed=4, n_nodes=300, n_transactions=6000))
    rng = np.random.default_rng(0)
    y = (rng.random(graph.n_nodes) < 0.2).astype(np.int8)
    x = graph.node_features.copy()
    x[:, PLANTED] = y
    empty = np.zeros(0, dtype=np.int64)
    g = dataclasses.replace(graph, labels=y, node_features=x, edge_src=empty, edge_dst=empty,
                            edge_ts=empty, edge_features=np.zeros((0, EDGE_DIM)), transactions=None)
    path = tmp_path_factory.mktemp("separable")
    save_dataset(g, path, scenarios)
    return path


# --- config -------------------------------------------------------------------------------

def test_default_profile():
    cfg = load_config()
    assert cfg.profile == "desk"
    assert cfg.partition.K == 5
    assert cfg.federation.rounds == 20
    assert (cfg.gnn.hidden_dim, cfg.gnn.heads) == (32, 2)
    assert cfg.generator_config(1).n_nodes == 1000


def test_paper_profile():
    d = profile_dict("paper")
    assert d["partition"]["K"] == 10
    assert d["federation"]["rounds"] == 100
    assert (d["gnn"]["hidden_dim"], d["gnn"]["heads"]) == (256, 8)


def test_overrides_and_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"federation": {"rounds": 7}, "gnn": {"hidden_dim": 16}}))
    cfg = load_config(p, ["gnn.learning_rate=0.02", "privacy.mode=dp"])
    assert cfg.federation.rounds == 7
    assert cfg.gnn.hidden_dim == 16
    assert cfg.gnn.learning_rate == 0.02
    assert cfg.privacy.mode == "dp"
    assert cfg.federation.aggregation == "moe"  # untouched default


@pytest.mark.parametrize("override", ["gnn.hiden_dim=3", "bogus=1", "federation.aggregation=median",
                                      "partition.K=0", "experiment.epsilons=[0]"])
def test_invalid_config(override):
    with pytest.raises(ConfigError):
        load_config(overrides=[override])


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        load_config(tmp_path / "nope.json")


# --- metrics ------------------------------------------------------------------------------

def test_perfect_separation():
    m = compute_metrics([0.9, 0.2, 0.7, 0.1], [1, 0, 1, 0])
    assert (m.accuracy, m.precision, m.recall, m.f1, m.auc) == (1.0, 1.0, 1.0, 1.0, 1.0)


def test_auc_pair_counting():
    assert auc_score([0.9, 0.1, 0.8, 0.4], [1, 0, 1, 0]) == 1.0
    # exhaustive pairs: 2 of 4 ordered correctly, none tied
    assert auc_score([0.9, 0.5, 0.3, 0.4], [1, 0, 1, 0]) == 0.5
    assert auc_score([0.5, 0.5], [1, 0]) == 0.5


def test_single_class_auc_undefined():
    assert compute_metrics([0.1, 0.9], [0, 0]).auc is None


def test_all_negative_predictor(default_dataset):
    y = default_dataset[0].labels
    m = compute_metrics(np.zeros(len(y)), y)
    assert m.recall == 0.0 and m.f1 == 0.0
    assert m.accuracy == pytest.approx(1 - y.sum() / len(y), abs=1e-12)
    assert m.accuracy == pytest.approx(0.9507, abs=0.005)


def test_confusion_consistency(rng):
    y = rng.integers(0, 2, 200)
    m = compute_metrics(rng.random(200), y)
    assert m.n == 200
    assert m.accuracy == (m.tp + m.tn) / 200
    assert m.recall == m.tp / (m.tp + m.fn)
    assert m.precision == m.tp / (m.tp + m.fp)


# --- runners ------------------------------------------------------------------------------

def test_separable_dataset_all_methods(separable_dir):
    cfg = load_config(overrides=[f'dataset={{"path": "{separable_dir}"}}', "federation.rounds=10",
                                 "gnn.learning_rate=0.01"])
    table = run_comparison(cfg, seeds=[1])
    for r in table.results:
        assert r.metrics.accuracy >= 0.99, r.name
    assert len({r.split_hash for r in table.results}) == 1


def test_noise_feature_importance(separable_dir):
    cfg = load_config(overrides=[f'dataset={{"path": "{separable_dir}"}}', "federation.rounds=10",
                                 "gnn.learning_rate=0.01", "experiment.importance_repeats=3"])
    imps = run_importance(cfg, seed=1)
    by = {i.feature: i.importance for i in imps}
    assert imps[0].feature == NODE_FEATURES[PLANTED]
    assert math.isclose(sum(by.values()), 1.0, abs_tol=1e-9)
    top = imps[0].importance
    for name in NODE_FEATURES[PLANTED + 1:]:  # untouched noise columns
        assert by[name] < top / 15


def test_no_privacy_equals_full_at_zero_noise():
    cfg = fast_config("privacy.mode=dp", "privacy.sigma=0.0")
    prep = prepare(cfg, 2)
    full = run_variant(cfg, "full", 2, prep)
    off = run_variant(cfg, "no_privacy", 2, prep)
    assert full.metrics == off.metrics
    np.testing.assert_array_equal(full.run.params.vector, off.run.params.vector)


def test_no_fed_trains_smallest_client():
    cfg = fast_config()
    prep = prepare(cfg, 2)
    plan = variant_plan(cfg, "no_fed", 2)
    run = train_plan(prep, plan)
    sizes = np.bincount(prep.partition.assignment)
    assert len(run.clients) == 1
    assert run.clients[0].n_nodes == sizes.min()
    r = run_variant(cfg, "no_fed", 2, prep)
    assert r.n_test == len(prep.splits[2])


def test_sweep_reference_and_sigma():
    cfg = fast_config("privacy.mode=dp")
    curve, ref = run_privacy_sweep(cfg, epsilons=[0.5, 10.0], seed=3)
    plain = run_variant(fast_config(), "full", 3)
    assert ref.metrics == plain.metrics
    assert ref.sigma == 0.0
    for p in curve:
        mp = mpmath.mpf(1) / mpmath.mpf(p.epsilon) * mpmath.sqrt(2 * mpmath.log(mpmath.mpf("1.25") / mpmath.mpf("1e-5")))
        assert abs(p.sigma - float(mp)) <= 1e-12
        assert p.epsilon_total > 0


def test_scale_single_client_bytes():
    cfg = fast_config()
    (pt,) = run_scalability(cfg, client_counts=[1], seed=1, rounds=1)
    prep = prepare(cfg, 1, K=1)
    plan = variant_plan(cfg, "full", 1)
    run = train_plan(prep, dataclasses.replace(plan, round_config=dataclasses.replace(plan.round_config, rounds=1)))
    P = run.params.spec.size
    G = run.state.gating.size
    broadcast = 8 * (P + G)
    update = 8 * (P + 1) + 8 * G  # params and gate mean, then the gate gradient
    assert pt.bytes_per_round == broadcast + update


def test_scale_bytes_increase():
    pts = run_scalability(fast_config(), client_counts=[1, 2, 4], seed=1, rounds=1)
    b = [p.bytes_per_round for p in pts]
    assert b[0] < b[1] < b[2]


@pytest.mark.slow
@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs at least 4 threads")
def test_scale_seconds_sublinear():
    pts = run_scalability(load_config(), client_counts=[1, 4], seed=1, rounds=2)
    assert pts[1].seconds_per_round / pts[0].seconds_per_round < 4


def test_comparison_shares_splits():
    table = run_comparison(fast_config(), seeds=[1], methods=["fedavg_tabular", "fedgnn_avg"])
    assert len({r.split_hash for r in table.results}) == 1
    assert len({r.n_test for r in table.results}) == 1


@pytest.mark.slow
def test_signal_families_rank_top5():
    """Every signal family places a feature in the top 5 on the desk profile."""
    imps = run_importance(load_config(), seed=1)
    ranks = family_ranks(imps)
    assert set(ranks) == set(SIGNAL_FAMILIES)
    assert all(r <= 5 for r in ranks.values()), ranks


def test_importance_needs_matching_names():
    cfg = fast_config()
    prep = prepare(cfg, 1)
    run = train_plan(prep, variant_plan(cfg, "full", 1))
    with pytest.raises(ConfigError):
        feature_importance(run, np.random.default_rng(0), 1, feature_names=("a", "b"))


# --- cli ----------------------------------------------------------------------------------

def test_cli_generate(tmp_path):
    out = tmp_path / "data"
    code = main(["generate", "--set", "dataset.n_nodes=120", "--set", "dataset.n_transactions=2000",
                 "--seed", "3", "--out", str(out)])
    assert code == 0
    g = load_dataset(out)
    assert g.n_nodes == 120


def test_cli_generate_from_config_file(tmp_path):
    cfg = tmp_path / "default.json"
    cfg.write_text(json.dumps({"dataset": {"n_nodes": 100, "n_transactions": 1500}}))
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "data")]) == 0
    assert (tmp_path / "data" / "nodes.csv").is_file()


def test_cli_missing_config(tmp_path, capsys):
    path = tmp_path / "missing.json"
    assert main(["train", "--config", str(path), "--seed", "1"]) == 1
    assert str(path) in capsys.readouterr().err


def test_cli_usage_errors(capsys):
    assert main(["train", "--bogus", "--seed", "1"]) == 1
    assert main(["train"]) == 1  # --seed is mandatory
    assert main(["train", "--seed", "1", "2"]) == 1
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_cli_runtime_failure(tmp_path):
    # a dataset path with no dataset in it loads at run time
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dataset": {"path": str(tmp_path / "empty")}}))
    assert main(["train", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "o")]) == 2


def test_cli_train_outputs(tmp_path):
    out = tmp_path / "run"
    args = ["train", "--seed", "1", "--out", str(out)] + [a for s in FAST for a in ("--set", s)]
    assert main(args) == 0
    for name in ("metrics.json", "history.csv", "config.json", "assessments.jsonl"):
        assert (out / name).is_file(), name
    m = json.loads((out / "metrics.json").read_text())
    assert m["tp"] + m["fp"] + m["tn"] + m["fn"] > 0


def test_cli_compare_byte_identical(tmp_path):
    base = ["--seed", "1", "--methods", "fedavg_tabular", "fedgnn_avg"] + [a for s in FAST for a in ("--set", s)]
    assert main(["compare", "--out", str(tmp_path / "a"), *base]) == 0
    assert main(["compare", "--out", str(tmp_path / "b"), *base]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix == ".csv")
    assert "comparison.csv" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
