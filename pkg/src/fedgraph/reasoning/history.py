"""Per-node transaction histories from the graph's transaction log."""

from __future__ import annotations

import numpy as np

from ..errors import UnknownNodeError
from ..graph.types import TransactionGraph
from .types import Event, TransactionHistory


def build_history(graph: TransactionGraph, node, window=256, until=None):
    """Most recent ``window`` transactions touching ``node`` (up to ``until``).

    The generator's log has strictly increasing timestamps, so events come out
    strictly ordered. Self-transfers are dropped.
    """
    node = int(node)
    if not graph.has_node(node):
        raise UnknownNodeError(f"unknown node {node}")
    tx = graph.transactions
    if tx is None or len(tx) == 0:
        return TransactionHistory(node, ())
    touch = (tx.src == node) ^ (tx.dst == node)
    if until is not None:
        touch &= tx.ts <= until
    idx = np.flatnonzero(touch)[-int(window):]
    events = []
    for i in idx.tolist():
        out = int(tx.src[i]) == node
        events.append(Event(
            ts=int(tx.ts[i]),
            counterparty=int(tx.dst[i] if out else tx.src[i]),
            amount=float(tx.amount[i]),
            kind=int(tx.kind[i]),
            off_hours=bool(tx.off_hours[i]),
            outgoing=out,
        ))
    return TransactionHistory(node, tuple(events))
