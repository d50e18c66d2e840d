"""Dataset directory format.

A dataset is a directory holding:

``nodes.csv``
    ``node_id, <15 feature columns>, label, jurisdiction``
``edges.csv``
    ``src, dst, <8 feature columns>, first_ts``
``transactions.csv``
    ``ts, src, dst, amount, type, off_hours`` (optional; needed for reasoning)
``meta.json``
    config echo, seed, counts and planted scenarios.

Floats are written with 17 significant digits so a save/load round trip is
bit-exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import DatasetParseError
from .types import EDGE_FEATURES, NODE_FEATURES, ThreatScenario, Transactions, TransactionGraph

NODE_HEADER = ["node_id", *NODE_FEATURES, "label", "jurisdiction"]
EDGE_HEADER = ["src", "dst", *EDGE_FEATURES, "first_ts"]
TX_HEADER = ["ts", "src", "dst", "amount", "type", "off_hours"]


def fmt(x):
    return format(float(x), ".17g")


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def save_dataset(graph: TransactionGraph, path, scenarios=None):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    jur = graph.jurisdiction
    _write(
        path / "nodes.csv",
        NODE_HEADER,
        (
            [int(v), *map(fmt, graph.node_features[i]), int(graph.labels[i]),
             "" if jur is None else int(jur[i])]
            for i, v in enumerate(graph.node_ids)
        ),
    )
    _write(
        path / "edges.csv",
        EDGE_HEADER,
        (
            [int(graph.edge_src[i]), int(graph.edge_dst[i]),
             *map(fmt, graph.edge_features[i]), int(graph.edge_ts[i])]
            for i in range(graph.n_edges)
        ),
    )
    if graph.transactions is not None:
        t = graph.transactions
        _write(
            path / "transactions.csv",
            TX_HEADER,
            (
                [int(t.ts[i]), int(t.src[i]), int(t.dst[i]), fmt(t.amount[i]),
                 int(t.kind[i]), int(t.off_hours[i])]
                for i in range(len(t))
            ),
        )
    meta = dict(graph.meta)
    if scenarios is not None:
        meta["scenarios"] = [s.to_dict() for s in scenarios]
    meta.setdefault("n_nodes", graph.n_nodes)
    meta.setdefault("n_edges", graph.n_edges)
    meta["has_transactions"] = graph.transactions is not None
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _read(path, header):
    rows = []
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise DatasetParseError(path, 0, "<file>", "file not found") from None
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first != header:
            raise DatasetParseError(path, 1, "<header>", f"expected {header}, got {first}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetParseError(path, lineno, "<row>",
                                        f"expected {len(header)} columns, got {len(row)}")
            rows.append((lineno, row))
    return rows


def _parse(path, lineno, field, text, kind):
    try:
        return kind(text)
    except ValueError:
        raise DatasetParseError(path, lineno, field, f"cannot parse {text!r} as {kind.__name__}") from None


def _parse_table(path, header, kinds):
    rows = _read(path, header)
    cols = [[] for _ in header]
    for lineno, row in rows:
        for j, (name, text, kind) in enumerate(zip(header, row, kinds)):
            if kind is None:
                cols[j].append(text)
            else:
                cols[j].append(_parse(path, lineno, name, text, kind))
    return cols


def load_dataset(path):
    """Load a dataset directory written by :func:`save_dataset`."""
    path = Path(path)
    meta_path = path / "meta.json"
    try:
        meta = json.loads(meta_path.read_text())
    except FileNotFoundError:
        raise DatasetParseError(meta_path, 0, "<file>", "file not found") from None
    except json.JSONDecodeError as exc:
        raise DatasetParseError(meta_path, exc.lineno, "<json>", exc.msg) from None

    nd = len(NODE_FEATURES)
    ncols = _parse_table(
        path / "nodes.csv", NODE_HEADER, [int] + [float] * nd + [int, None]
    )
    jur_text = ncols[-1]
    if all(t == "" for t in jur_text):
        jur = None
    else:
        jur = []
        for i, t in enumerate(jur_text):
            jur.append(_parse(path / "nodes.csv", i + 2, "jurisdiction", t, int))
    ed = len(EDGE_FEATURES)
    ecols = _parse_table(path / "edges.csv", EDGE_HEADER, [int, int] + [float] * ed + [int])

    n = len(ncols[0])
    m = len(ecols[0])
    labels = ncols[nd + 1]
    for i, y in enumerate(labels):
        if y not in (0, 1):
            raise DatasetParseError(path / "nodes.csv", i + 2, "label", f"label must be 0 or 1, got {y}")
    node_ids = np.array(ncols[0], dtype=np.int64)
    known = set(node_ids.tolist())
    for i in range(m):
        for field, col in (("src", 0), ("dst", 1)):
            if ecols[col][i] not in known:
                raise DatasetParseError(path / "edges.csv", i + 2, field,
                                        f"unknown node {ecols[col][i]}")

    tx = None
    if meta.get("has_transactions", (path / "transactions.csv").exists()):
        tcols = _parse_table(path / "transactions.csv", TX_HEADER, [int, int, int, float, int, int])
        tx = Transactions(*(np.array(c) for c in tcols[:5]), np.array(tcols[5], dtype=bool))

    scen = meta.get("scenarios")
    if scen is not None:
        meta["scenarios"] = scen
    return TransactionGraph(
        node_ids=node_ids,
        node_features=np.array(ncols[1:nd + 1], dtype=np.float64).T.reshape(n, nd),
        labels=np.array(labels, dtype=np.int8),
        edge_src=np.array(ecols[0], dtype=np.int64),
        edge_dst=np.array(ecols[1], dtype=np.int64),
        edge_features=np.array(ecols[2:2 + ed], dtype=np.float64).T.reshape(m, ed),
        edge_ts=np.array(ecols[2 + ed], dtype=np.int64),
        jurisdiction=None if jur is None else np.array(jur, dtype=np.int64),
        transactions=tx,
        meta=meta,
    )


def load_scenarios(path):
    meta = json.loads((Path(path) / "meta.json").read_text())
    return [ThreatScenario.from_dict(d) for d in meta.get("scenarios", [])]
