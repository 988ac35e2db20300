"""Independent brute-force oracles used by the test suite.

None of these share code with the library's matching engine: cardinalities
come from the min-cut/defect formula by subset enumeration, augmenting paths
from a plain recursive Kuhn search, and flow values from networkx.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def defect_max_fmatching(adj: np.ndarray, caps) -> int:
    """Maximum f-matching size = sum(K) - max_X (sum_X K - |N(X)|).

    Pure subset enumeration over the left side (min-cut duality); independent
    of any augmenting-path code.
    """
    M = adj.shape[0]
    caps = np.asarray(caps)
    deficiency = 0
    for r in range(1, M + 1):
        for subset in itertools.combinations(range(M), r):
            nb = np.zeros(adj.shape[1], dtype=bool)
            for i in subset:
                nb |= adj[i]
            deficiency = max(deficiency, int(caps[list(subset)].sum()) - int(nb.sum()))
    return int(caps.sum()) - deficiency


def kuhn_max_matching(adj: np.ndarray) -> int:
    """Maximum-cardinality matching by exhaustive augmenting-path search."""
    M, N = adj.shape
    match_r = [-1] * N

    def augment(u, seen):
        for n in range(N):
            if adj[u, n] and not seen[n]:
                seen[n] = True
                if match_r[n] == -1 or augment(match_r[n], seen):
                    match_r[n] = u
                    return True
        return False

    return sum(augment(u, [False] * N) for u in range(M))


def flow_max_fmatching(adj: np.ndarray, caps) -> int:
    """Maximum f-matching size via networkx max-flow on the standard network."""
    import networkx as nx

    M, N = adj.shape
    g = nx.DiGraph()
    for m in range(M):
        g.add_edge("s", ("u", m), capacity=int(caps[m]))
        for n in range(N):
            if adj[m, n]:
                g.add_edge(("u", m), ("v", n), capacity=1)
    for n in range(N):
        g.add_edge(("v", n), "t", capacity=1)
    if g.number_of_edges() == 0 or "s" not in g or "t" not in g:
        return 0
    try:
        return int(nx.maximum_flow_value(g, "s", "t"))
    except nx.NetworkXError:
        return 0


def some_max_misses_user(adj: np.ndarray, caps, m: int) -> bool:
    """True iff some maximum f-matching leaves user m below its cap.

    Shorting user m by one keeps the maximum cardinality exactly when such a
    matching exists.
    """
    caps = list(caps)
    full = defect_max_fmatching(adj, caps)
    reduced = list(caps)
    reduced[m] -= 1
    return defect_max_fmatching(adj, reduced) == full


def prefix_saturable(adj: np.ndarray, caps, prefix) -> bool:
    """True iff some maximum f-matching saturates every user in ``prefix``.

    A set of users is saturable by some matching iff Hall's condition holds
    inside it, and any matching saturating it extends to a maximum one
    (augmenting paths never unsaturate an internal left vertex).
    """
    caps = np.asarray(caps)
    prefix = list(prefix)
    for r in range(1, len(prefix) + 1):
        for subset in itertools.combinations(prefix, r):
            nb = np.zeros(adj.shape[1], dtype=bool)
            for i in subset:
                nb |= adj[i]
            if int(caps[list(subset)].sum()) > int(nb.sum()):
                return False
    return True


def iter_bitmask_graphs(num_users: int, num_subchannels: int, edges_iter):
    """Yield dense adjacency matrices from iterables of present-edge bitmasks."""
    for mask in edges_iter:
        adj = np.zeros((num_users, num_subchannels), dtype=bool)
        for bit in range(num_users * num_subchannels):
            if mask >> bit & 1:
                adj[bit // num_subchannels, bit % num_subchannels] = True
        yield adj


def extra_disjoint_path_exists(
    layer0, left_succ, right_next, final_free, banned_left, banned_right
) -> bool:
    """Exhaustively search the layered graph for one more augmenting path that
    avoids the banned (already-used) vertices; certifies pvdp maximality."""

    def rec(u, seen_l, seen_r):
        for n in left_succ.get(u, []):
            if n in banned_right or n in seen_r:
                continue
            if n in final_free:
                return True
            w = right_next.get(n)
            if w is None or w in banned_left or w in seen_l:
                continue
            if rec(w, seen_l | {w}, seen_r | {n}):
                return True
        return False

    for u0 in layer0:
        if u0 in banned_left:
            continue
        if rec(int(u0), {int(u0)}, set()):
            return True
    return False


def random_bipartite(rng, num_users, num_subchannels, p_edge):
    adj = rng.random((num_users, num_subchannels)) < p_edge
    return np.asarray(adj, dtype=bool)
