"""Per-jurisdiction training data derived from a partitioned graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gnn.view import GraphView, build_view, standardize
from ..graph.types import JurisdictionPartition, TransactionGraph


@dataclass(eq=False)
class ClientData:
    """Everything one jurisdiction holds locally.

    ``view`` carries ghost entries for remote neighbours across cross-border
    edges; ghost ``g`` stands for node ``ghost_ids[g]`` owned by client
    ``ghost_owner[g]``. Feature columns are standardized with local statistics.
    """

    client_id: int
    node_ids: np.ndarray
    view: GraphView
    y: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    ghost_ids: np.ndarray
    ghost_owner: np.ndarray
    _row: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_train(self):
        return int(self.train_mask.sum())

    @property
    def n_ghost(self):
        return len(self.ghost_ids)

    def labels(self, split="train"):
        mask = {"train": self.train_mask, "val": self.val_mask, "test": self.test_mask}[split]
        return np.where(mask, self.y, -1).astype(np.int64)

    def rows(self, ids):
        return np.array([self._row[int(v)] for v in ids], dtype=np.int64)

    def owns(self, node_id):
        return int(node_id) in self._row


def _edge_stats(attr):
    if len(attr) == 0:
        return None, None
    return attr.mean(axis=0), attr.std(axis=0)


def build_clients(graph: TransactionGraph, partition: JurisdictionPartition, splits, *,
                  with_edges=True, with_ghosts=True):
    """Build one :class:`ClientData` per jurisdiction.

    ``splits`` is ``(train_ids, val_ids, test_ids)``. ``with_edges=False``
    yields self-loop-only views (a graph-free model); ``with_ghosts=False``
    drops cross-border neighbours.
    """
    train, val, test = (set(np.asarray(s).tolist()) for s in splits)
    gsrc, gdst = graph.edge_src, graph.edge_dst
    cross = set(partition.cross_border_edges.tolist())
    assign = partition.assignment
    clients = []
    for k, lv in enumerate(partition.local_views):
        ids = np.asarray(lv.node_ids, dtype=np.int64)
        row = {int(v): i for i, v in enumerate(ids)}
        grows = graph.rows(ids) if len(ids) else np.zeros(0, np.int64)
        x, _, _ = standardize(graph.node_features[grows])
        y = graph.labels[grows].astype(np.int64)

        es, ed, ea = [], [], []
        gd, gs, ga, ghost_ids, ghost_owner = [], [], [], [], []
        if with_edges:
            for e in lv.edge_index:
                es.append(row[int(gsrc[e])])
                ed.append(row[int(gdst[e])])
            ea = graph.edge_features[np.asarray(lv.edge_index, dtype=np.int64)]
            if with_ghosts:
                slot = {}
                touching = [e for e in sorted(cross) if int(gsrc[e]) in row or int(gdst[e]) in row]
                remote = sorted({int(gdst[e]) if int(gsrc[e]) in row else int(gsrc[e]) for e in touching})
                for r in remote:
                    slot[r] = len(ghost_ids)
                    ghost_ids.append(r)
                    ghost_owner.append(int(assign[graph.index[r]]))
                for e in touching:
                    a, b = int(gsrc[e]), int(gdst[e])
                    local, far = (a, b) if a in row else (b, a)
                    gd.append(row[local])
                    gs.append(slot[far])
                    ga.append(graph.edge_features[e])
        d_e = graph.edge_features.shape[1]
        ea = np.asarray(ea, dtype=np.float64).reshape(-1, d_e)
        ga = np.asarray(ga, dtype=np.float64).reshape(-1, d_e)
        mean, std = _edge_stats(np.vstack([ea, ga]))
        if mean is not None:
            ea = standardize(ea, mean, std)[0]
            ga = standardize(ga, mean, std)[0]
        view = build_view(
            x, es, ed, ea,
            ghost_dst=gd, ghost_src=gs, ghost_attr=ga, n_ghost=len(ghost_ids),
            node_ids=ids, ghost_ids=np.array(ghost_ids, dtype=np.int64),
        )
        in_split = lambda s: np.array([int(v) in s for v in ids], dtype=bool)
        clients.append(ClientData(
            client_id=k,
            node_ids=ids,
            view=view,
            y=y,
            train_mask=in_split(train),
            val_mask=in_split(val),
            test_mask=in_split(test),
            ghost_ids=np.array(ghost_ids, dtype=np.int64),
            ghost_owner=np.array(ghost_owner, dtype=np.int64),
            _row=row,
        ))
    return clients
