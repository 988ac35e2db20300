"""Phase-limited parallel-style Hopcroft-Karp on expanded bipartite graphs.

One phase = layered BFS from the free left vertices (pbfs), extraction of a
maximal set of vertex-disjoint shortest augmenting paths (pvdp), and parallel
augmentation (pa).  The depth cap l* = 2 ln^eta(N) + 1 turns the exact solver
into the log^{-eta}(N)-approximate variant; with the cap removed the loop is
plain Hopcroft-Karp.

"Parallel" here means the per-phase work is expressed as frontier sweeps whose
result is independent of how the frontier would be partitioned across workers;
phases themselves are a sequential barrier chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fmatchlab.graph import (
    BipartiteGraph,
    FMatching,
    FProfile,
    _project_matching,
    expand_vertices,
    rotation_order,
)

INF_DEPTH = math.inf


@dataclass
class Matching:
    """Unit-capacity matching on an expanded graph (clones vs subchannels)."""

    left_to_right: np.ndarray
    right_to_left: np.ndarray

    @classmethod
    def empty(cls, num_left: int, num_right: int) -> "Matching":
        return cls(
            left_to_right=np.full(num_left, -1, dtype=np.int64),
            right_to_left=np.full(num_right, -1, dtype=np.int64),
        )

    def size(self) -> int:
        return int((self.left_to_right >= 0).sum())

    def copy(self) -> "Matching":
        return Matching(self.left_to_right.copy(), self.right_to_left.copy())

    def is_consistent(self, adj: np.ndarray) -> bool:
        for u, n in enumerate(self.left_to_right):
            if n >= 0 and (not adj[u, n] or self.right_to_left[n] != u):
                return False
        for n, u in enumerate(self.right_to_left):
            if u >= 0 and self.left_to_right[u] != n:
                return False
        return True


@dataclass
class OrientedGraph:
    """Digraph view of (expanded graph, matching).

    Matched edges point left -> right, unmatched edges right -> left.  The
    layered search walks alternating paths, i.e. it crosses unmatched edges
    against their orientation and matched edges along it on the way back.
    """

    adj: np.ndarray
    matching: Matching

    def out_left(self, u: int) -> list[int]:
        """Directed successors of left vertex u (its matched subchannel)."""
        n = self.matching.left_to_right[u]
        return [int(n)] if n >= 0 else []

    def out_right(self, n: int) -> list[int]:
        """Directed successors of right vertex n (users on unmatched edges)."""
        u_matched = self.matching.right_to_left[n]
        return [int(u) for u in np.flatnonzero(self.adj[:, n]) if u != u_matched]

    def free_left(self) -> np.ndarray:
        return np.flatnonzero(self.matching.left_to_right < 0)

    def free_right(self) -> np.ndarray:
        return np.flatnonzero(self.matching.right_to_left < 0)


@dataclass
class LayeredGraph:
    """Shortest alternating-path layers: free left -> right -> ... -> free right.

    ``layers[2i]`` holds left vertices, ``layers[2i+1]`` right vertices; only
    edges between consecutive layers survive.  ``left_succ`` keeps, per left
    vertex, the next-layer right vertices reachable over unmatched edges
    (ascending); internal right vertices continue through their matched edge
    via ``right_next``.
    """

    layers: list[np.ndarray] = field(default_factory=list)
    left_succ: dict[int, list[int]] = field(default_factory=dict)
    right_next: dict[int, int] = field(default_factory=dict)
    final_free: set[int] = field(default_factory=set)
    depth: float = INF_DEPTH


@dataclass
class PhaseTrace:
    """Per-phase observability rows: (phase, path length, paths, matching size)."""

    rows: list[tuple[int, int, int, int]] = field(default_factory=list)

    def record(self, phase: int, length: int, n_paths: int, size: int) -> None:
        self.rows.append((phase, length, n_paths, size))

    def lengths(self) -> list[int]:
        return [r[1] for r in self.rows]


def orient(graph: BipartiteGraph, matching: Matching) -> OrientedGraph:
    """Build the digraph view used by the layered search."""
    if not matching.is_consistent(graph.adj):
        raise ValueError("matching is not a matching of the given graph")
    return OrientedGraph(adj=graph.adj, matching=matching)


def pbfs(
    free_left: np.ndarray,
    free_right: np.ndarray,
    oriented: OrientedGraph,
    l_star: float | None = None,
) -> tuple[LayeredGraph, float]:
    """Layered BFS for the shortest augmenting-path length.

    Expands one alternating level per sweep, stopping at the first right layer
    that touches a free right vertex; that layer is pruned to its free
    vertices.  Returns depth inf when no augmenting path exists or the depth
    would exceed ``l_star``.  The level assignment is a function of the
    frontier as a set, so any partitioning of the sweep yields the same layer
    graph.
    """
    adj = oriented.adj
    m = oriented.matching
    cap = INF_DEPTH if l_star is None else l_star
    free_right_mask = np.zeros(adj.shape[1], dtype=bool)
    if len(free_right):
        free_right_mask[np.asarray(free_right, dtype=np.int64)] = True

    layered = LayeredGraph()
    right_level: dict[int, int] = {}
    seen_left: set[int] = set(int(u) for u in free_left)
    frontier = [int(u) for u in free_left]
    layered.layers.append(np.array(frontier, dtype=np.int64))
    depth = 1
    while frontier:
        if depth > cap:
            return LayeredGraph(), INF_DEPTH
        next_right: list[int] = []
        for u in frontier:
            succ: list[int] = []
            for n in np.flatnonzero(adj[u]):
                n = int(n)
                if m.left_to_right[u] == n:
                    continue
                if n not in right_level:
                    right_level[n] = depth
                    next_right.append(n)
                if right_level[n] == depth:
                    succ.append(n)
            layered.left_succ[u] = succ
        if not next_right:
            return LayeredGraph(), INF_DEPTH
        if any(free_right_mask[n] for n in next_right):
            final = [n for n in next_right if free_right_mask[n]]
            layered.layers.append(np.array(final, dtype=np.int64))
            layered.final_free = set(final)
            for u in frontier:
                layered.left_succ[u] = [
                    n for n in layered.left_succ[u] if free_right_mask[n]
                ]
            layered.depth = depth
            return layered, depth
        layered.layers.append(np.array(next_right, dtype=np.int64))
        next_left: list[int] = []
        for n in next_right:
            u = int(m.right_to_left[n])
            layered.right_next[n] = u
            if u not in seen_left:
                seen_left.add(u)
                next_left.append(u)
        layered.layers.append(np.array(next_left, dtype=np.int64))
        frontier = next_left
        depth += 2
    return LayeredGraph(), INF_DEPTH


def pvdp(layered: LayeredGraph, length: float) -> list[list[int]]:
    """Maximal set of vertex-disjoint augmenting paths of exactly ``length`` edges.

    Greedy leftmost-first DFS from layer 0 with permanent vertex locking:
    vertices explored by failed branches can never carry a disjoint length-l
    path that the search would have missed, so the returned set is maximal.
    Paths alternate left/right vertex ids.
    """
    if math.isinf(length) or not layered.layers:
        return []
    used_left: set[int] = set()
    used_right: set[int] = set()
    paths: list[list[int]] = []
    for u0 in layered.layers[0]:
        u0 = int(u0)
        if u0 in used_left:
            continue
        path = _dfs_path(layered, u0, used_left, used_right)
        if path is not None:
            paths.append(path)
    return paths


def _dfs_path(
    layered: LayeredGraph, u0: int, used_left: set[int], used_right: set[int]
) -> list[int] | None:
    """Leftmost-first locking DFS; returns one augmenting path or None."""
    lefts = [u0]
    rights: list[int] = []
    cursor = [0]
    while lefts:
        u = lefts[-1]
        succ = layered.left_succ.get(u, [])
        advanced = False
        while cursor[-1] < len(succ):
            n = succ[cursor[-1]]
            cursor[-1] += 1
            if n in used_right:
                continue
            if n in layered.final_free:
                used_right.add(n)
                used_left.update(lefts)
                full: list[int] = []
                for i, v in enumerate(lefts):
                    full.append(v)
                    if i < len(rights):
                        full.append(rights[i])
                full.append(n)
                return full
            nxt = layered.right_next.get(n)
            if nxt is None or nxt in used_left:
                continue
            used_right.add(n)  # permanent lock on entry
            lefts.append(nxt)
            rights.append(n)
            cursor.append(0)
            advanced = True
            break
        if not advanced:
            used_left.add(u)  # dead end, lock permanently
            lefts.pop()
            cursor.pop()
            if rights:
                rights.pop()
    return None


def pa(paths: list[list[int]], matching: Matching) -> Matching:
    """Parallel augmentation: apply the symmetric difference of disjoint paths.

    Rejects inputs whose paths share a vertex; the result is again a valid
    matching with size increased by the number of paths.
    """
    seen_left: set[int] = set()
    seen_right: set[int] = set()
    for path in paths:
        lefts = path[0::2]
        rights = path[1::2]
        if len(lefts) != len(rights):
            raise ValueError("augmenting path must end at a right vertex")
        if seen_left & set(lefts) or seen_right & set(rights):
            raise ValueError("augmenting paths are not vertex-disjoint")
        seen_left.update(lefts)
        seen_right.update(rights)
    out = matching.copy()
    for path in paths:
        for u, n in zip(path[0::2], path[1::2]):
            out.left_to_right[u] = n
            out.right_to_left[n] = u
    return out


def run_phases(
    adj: np.ndarray,
    order: np.ndarray,
    l_star: float | None = None,
    trace: PhaseTrace | None = None,
) -> tuple[np.ndarray, np.ndarray, PhaseTrace]:
    """Run augmentation phases until no paths remain or the depth cap trips.

    ``order`` fixes the processing order of left vertices (post-rotation clone
    order); together with ascending subchannel scans it makes the result a
    deterministic function of (adj, order, l_star).
    """
    P, N = adj.shape
    graph_like = BipartiteGraph(num_users=P, num_subchannels=N, num_bands=N, adj=adj)
    trace = trace if trace is not None else PhaseTrace()
    matching = Matching.empty(P, N)
    phase = 0
    while True:
        oriented = orient(graph_like, matching)
        free_left = np.array(
            [u for u in order if matching.left_to_right[u] < 0], dtype=np.int64
        )
        layered, depth = pbfs(free_left, oriented.free_right(), oriented, l_star)
        if math.isinf(depth):
            break
        paths = pvdp(layered, depth)
        if not paths:
            break
        matching = pa(paths, matching)
        phase += 1
        trace.record(phase, int(depth), len(paths), matching.size())
    return matching.left_to_right, matching.right_to_left, trace


def depth_cap(num_subchannels: int, eta: float) -> float:
    """l* = 2 ln^eta(N) + 1 with the log floored at 1."""
    return 2.0 * max(math.log(num_subchannels), 1.0) ** eta + 1.0


def pver2hk(
    graph: BipartiteGraph,
    profile: FProfile,
    eta: float,
    rng: np.random.Generator,
    trace: PhaseTrace | None = None,
) -> FMatching:
    """Approximate maximum f-matching with phase depth capped at 2 ln^eta(N) + 1.

    Guarantees |result| >= (1 - ln^{-eta}(N)) * |maximum f-matching| and always
    returns a valid f-matching; identical (graph, profile, eta, seed) give the
    identical matching.
    """
    if eta < 1:
        raise ValueError("eta must be >= 1")
    if graph.num_subchannels < 2:
        raise ValueError("need at least 2 subchannels")
    expanded = expand_vertices(graph, profile)
    uniforms = rng.random(1 + int(profile.total))
    order = rotation_order(profile.caps, uniforms)
    l_star = depth_cap(graph.num_subchannels, eta)
    _, match_right, _ = run_phases(expanded.adj, order, l_star=l_star, trace=trace)
    return _project_matching(graph, profile.caps, match_right)
