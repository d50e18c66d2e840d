"""Threat hypothesis templates and their structural preconditions.

Each template either instantiates once (grounded in concrete nodes, edges and
history events) or not at all:

* ``LaunderingChain``: a temporal path of at least 3 hops through the centre
  where every hop follows the previous one within ``CHAIN_MAX_GAP`` and
  forwards 90-100% of the incoming amount.
* ``CollusionNetwork``: a clique of at least 3 accounts containing the centre
  that transacts in a coordinated burst: inside one ``COLLUSION_WINDOW`` every
  pair has at least ``BURST_MIN_TX`` transactions, making up at least
  ``BURST_SHARE`` of that pair's traffic.
* ``PrivilegeEscalation``: consecutive outgoing privilege operations towards
  accounts of strictly increasing role level, each within
  ``ESCALATION_MAX_GAP`` of the last.
* ``OffHoursActivity``: at least ``OFF_HOURS_MIN_RATE`` of the history falls
  outside local business hours.
"""

from __future__ import annotations

import bisect
import itertools
from collections import defaultdict

import networkx as nx
import numpy as np

from ..graph.types import PRIVILEGE, ScenarioKind, TransactionGraph
from .types import ThreatHypothesis, TransactionHistory

HOUR = 3_600
DAY = 86_400
CHAIN_MIN_HOPS = 3
CHAIN_MAX_GAP = 18 * HOUR
CHAIN_RATIO = (0.9, 1.0)
COLLUSION_MIN_SIZE = 3
COLLUSION_WINDOW = 60 * DAY
BURST_MIN_TX = 2
BURST_SHARE = 0.5
MAX_CLIQUE = 8
ESCALATION_MAX_GAP = 30 * DAY
OFF_HOURS_MIN_RATE = 0.2


def _center(subgraph: TransactionGraph, history: TransactionHistory | None):
    if history is not None:
        return int(history.node)
    return int(subgraph.meta.get("center", subgraph.node_ids[0]))


def _history_index(history):
    return {e.ts: i for i, e in enumerate(history.events)} if history is not None else {}


# --- laundering chains ------------------------------------------------------

def _longest_paths(src, dst, ts, amt, reverse=False):
    """Longest consistent temporal path ending (or starting) at each transaction.

    Returns ``(length, link)`` where ``length`` counts hops and ``link`` is the
    previous (next, if ``reverse``) transaction on that path or -1.
    """
    m = len(ts)
    length = np.ones(m, dtype=np.int64)
    link = np.full(m, -1, dtype=np.int64)
    lo, hi = CHAIN_RATIO
    by_node = defaultdict(list)  # node -> tx indices in time order
    key = src if reverse else dst
    for i in range(m):
        by_node[int(key[i])].append(i)
    times = {v: [int(ts[i]) for i in idx] for v, idx in by_node.items()}
    order = range(m - 1, -1, -1) if reverse else range(m)
    for i in order:
        v = int(dst[i]) if reverse else int(src[i])
        cand = by_node.get(v)
        if not cand:
            continue
        t = times[v]
        if reverse:
            a = bisect.bisect_right(t, int(ts[i]))
            b = bisect.bisect_right(t, int(ts[i]) + CHAIN_MAX_GAP)
        else:
            a = bisect.bisect_left(t, int(ts[i]) - CHAIN_MAX_GAP)
            b = bisect.bisect_left(t, int(ts[i]))
        for p in cand[a:b]:
            ratio = amt[p] / amt[i] if reverse else amt[i] / amt[p]
            if lo <= ratio <= hi and length[p] + 1 > length[i]:
                length[i] = length[p] + 1
                link[i] = p
    return length, link


def find_chain(subgraph: TransactionGraph, center):
    """Longest consistent temporal path through ``center`` as transaction indices."""
    tx = subgraph.transactions
    if tx is None or len(tx) < CHAIN_MIN_HOPS:
        return []
    src, dst, ts, amt = tx.src, tx.dst, tx.ts, tx.amount
    back, prev = _longest_paths(src, dst, ts, amt)
    fwd, nxt = _longest_paths(src, dst, ts, amt, reverse=True)
    touching = np.flatnonzero((src == center) | (dst == center))
    if touching.size == 0:
        return []
    total = back[touching] + fwd[touching] - 1
    best = int(touching[int(np.argmax(total))])  # first maximum = earliest
    if total.max() < CHAIN_MIN_HOPS:
        return []
    path = [best]
    while prev[path[0]] >= 0:
        path.insert(0, int(prev[path[0]]))
    while nxt[path[-1]] >= 0:
        path.append(int(nxt[path[-1]]))
    return path


def _chain_hypothesis(subgraph, history, center):
    path = find_chain(subgraph, center)
    if not path:
        return None
    tx = subgraph.transactions
    nodes = [int(tx.src[path[0]])] + [int(tx.dst[i]) for i in path]
    edges = tuple((int(tx.src[i]), int(tx.dst[i])) for i in path)
    hidx = _history_index(history)
    events = tuple(hidx[int(tx.ts[i])] for i in path if int(tx.ts[i]) in hidx)
    members = tuple(dict.fromkeys(nodes))
    amounts = [float(tx.amount[i]) for i in path]
    return ThreatHypothesis(
        ScenarioKind.LAUNDERING_CHAIN,
        nodes=members,
        edges=edges,
        events=events,
        window=(int(tx.ts[path[0]]), int(tx.ts[path[-1]])),
        detail={
            "hops": len(path),
            "path": nodes,
            "gaps_h": [round((int(tx.ts[b]) - int(tx.ts[a])) / HOUR, 2) for a, b in zip(path, path[1:])],
            "forwarded": [round(b / a, 4) for a, b in zip(amounts, amounts[1:])],
        },
    )


# --- collusion networks ------------------------------------------------------

def _pair_times(tx, members):
    ms = set(members)
    out = defaultdict(list)
    for s, d, t in zip(tx.src.tolist(), tx.dst.tolist(), tx.ts.tolist()):
        if s in ms and d in ms and s != d:
            out[frozenset((s, d))].append(t)
    return out


def coordinated_window(tx, members, width=COLLUSION_WINDOW):
    """Earliest ``(start, end)`` burst window for ``members``, or None.

    In the window every pair needs ``BURST_MIN_TX`` transactions that are at
    least ``BURST_SHARE`` of the pair's total.
    """
    times = _pair_times(tx, members)
    pairs = [frozenset(p) for p in itertools.combinations(members, 2)]
    if any(len(times.get(p, ())) < BURST_MIN_TX for p in pairs):
        return None
    sorted_times = {p: sorted(times[p]) for p in pairs}
    need = {p: max(BURST_MIN_TX, BURST_SHARE * len(v)) for p, v in sorted_times.items()}
    starts = sorted(set(itertools.chain.from_iterable(sorted_times.values())))
    for t0 in starts:
        t1 = t0 + width
        if all(bisect.bisect_right(v, t1) - bisect.bisect_left(v, t0) >= need[p]
               for p, v in sorted_times.items()):
            return t0, t1
    return None


def _collusion_hypothesis(subgraph, history, center):
    tx = subgraph.transactions
    if tx is None or len(tx) == 0:
        return None
    adj = subgraph.undirected_adjacency
    ego = nx.Graph()
    nbrs = sorted(adj.get(center, ()))
    ego.add_nodes_from([center] + nbrs)
    for u in nbrs:
        for w in adj[u]:
            if w in ego and w != u:
                ego.add_edge(u, w)
        ego.add_edge(center, u)
    best = None
    for clique in nx.find_cliques(ego):
        if center not in clique or len(clique) < COLLUSION_MIN_SIZE:
            continue
        others = sorted(v for v in clique if v != center)[: MAX_CLIQUE - 1]
        for size in range(len(others), COLLUSION_MIN_SIZE - 2, -1):
            if best is not None and size + 1 < len(best[0]):
                break
            for combo in itertools.combinations(others, size):
                members = (center,) + combo
                win = coordinated_window(tx, members)
                if win is None:
                    continue
                key = (len(members), tuple(-v for v in sorted(members)))
                if best is None or key > (len(best[0]), tuple(-v for v in sorted(best[0]))):
                    best = (members, win)
                break
    if best is None:
        return None
    members, (t0, t1) = best
    mset = set(members)
    lookup = subgraph.edge_lookup
    edges = tuple(sorted(e for e in lookup if e[0] in mset and e[1] in mset and e[0] != e[1]))
    hidx = []
    if history is not None:
        hidx = [i for i, e in enumerate(history.events)
                if e.counterparty in mset and t0 <= e.ts <= t1]
    return ThreatHypothesis(
        ScenarioKind.COLLUSION_NETWORK,
        nodes=tuple(sorted(members)),
        edges=edges,
        events=tuple(hidx),
        window=(int(t0), int(t1)),
        detail={"size": len(members)},
    )


# --- privilege escalation ------------------------------------------------------

def _escalation_hypothesis(subgraph, history, center):
    if history is None:
        return None
    priv = [i for i, e in enumerate(history.events)
            if e.kind == PRIVILEGE and e.outgoing and subgraph.has_node(e.counterparty)]
    if len(priv) < 2:
        return None
    roles = {i: subgraph.role_level(history.events[i].counterparty) for i in priv}
    best, run = [priv[0]], [priv[0]]
    for a, b in zip(priv, priv[1:]):
        ea, eb = history.events[a], history.events[b]
        if roles[b] > roles[a] and eb.ts - ea.ts <= ESCALATION_MAX_GAP:
            run.append(b)
        else:
            run = [b]
        if len(run) > len(best) or (len(run) == len(best) and
                                     roles[run[-1]] - roles[run[0]] > roles[best[-1]] - roles[best[0]]):
            best = list(run)
    if len(best) < 2:
        return None
    cps = [history.events[i].counterparty for i in best]
    levels = [roles[i] for i in best]
    return ThreatHypothesis(
        ScenarioKind.PRIVILEGE_ESCALATION,
        nodes=tuple(dict.fromkeys([center] + cps)),
        edges=tuple(dict.fromkeys((center, c) for c in cps)),
        events=tuple(best),
        window=(history.events[best[0]].ts, history.events[best[-1]].ts),
        detail={
            "start_role": subgraph.role_level(center),
            "target_roles": levels,
            "magnitude": levels[-1] - min(levels[0], subgraph.role_level(center)),
        },
    )


# --- off-hours activity ----------------------------------------------------------

def _off_hours_hypothesis(subgraph, history, center):
    if history is None or len(history) == 0:
        return None
    rate = history.off_hours_rate
    if rate < OFF_HOURS_MIN_RATE:
        return None
    idx = [i for i, e in enumerate(history.events) if e.off_hours and subgraph.has_node(e.counterparty)]
    cps = list(dict.fromkeys(history.events[i].counterparty for i in idx))
    edges = tuple(dict.fromkeys(history.edge_of(i) for i in idx))
    return ThreatHypothesis(
        ScenarioKind.OFF_HOURS_ACTIVITY,
        nodes=tuple([center] + [c for c in cps if c != center]),
        edges=edges,
        events=tuple(idx),
        window=(history.events[idx[0]].ts, history.events[idx[-1]].ts) if idx else None,
        detail={"rate": round(rate, 6), "n_events": len(history)},
    )


TEMPLATES = (
    _escalation_hypothesis,
    _collusion_hypothesis,
    _chain_hypothesis,
    _off_hours_hypothesis,
)


def generate_hypotheses(subgraph: TransactionGraph, history: TransactionHistory | None = None):
    """All templates whose preconditions hold around the centre node.

    The centre is ``history.node`` when a history is given, else
    ``subgraph.meta["center"]``. At most one hypothesis per kind; the order
    follows the template catalogue.
    """
    if subgraph.n_nodes == 0:
        return []
    center = _center(subgraph, history)
    if not subgraph.has_node(center):
        return []
    out = []
    for template in TEMPLATES:
        h = template(subgraph, history, center)
        if h is not None:
            out.append(h)
    return out
