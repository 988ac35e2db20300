"""Random bipartite graphs between users and subchannels, and f-matching allocation.

Left vertices are users with degree caps f(u_m) = K_m, right vertices are
subchannels with f(s_n) = 1 and unit edge weights.  The maximum f-matching is
computed by cloning each user into K_m unit-capacity vertices and running the
phase engine from :mod:`fmatchlab.pver2hk` (uncapped depth), after a seeded
fairness rotation of the clone ordering.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from fmatchlab.channel import CsiMatrix, SystemConfig


@dataclass
class BipartiteGraph:
    """User-subchannel bipartite graph with band bookkeeping.

    ``adj[m, n]`` is True when subchannel n is not in outage for user m.  All
    N_c subchannels of one band have identical adjacency columns when the graph
    comes from a CSI matrix.
    """

    num_users: int
    num_subchannels: int
    num_bands: int
    adj: np.ndarray

    def __post_init__(self):
        self.adj = np.asarray(self.adj, dtype=bool)
        if self.adj.shape != (self.num_users, self.num_subchannels):
            raise ValueError("adjacency shape does not match vertex counts")
        if self.num_subchannels % self.num_bands != 0:
            raise ValueError("num_bands must divide num_subchannels")

    @property
    def n_per_band(self) -> int:
        return self.num_subchannels // self.num_bands

    def band_of(self, n: int) -> int:
        return n // self.n_per_band

    def neighbors(self, m: int) -> np.ndarray:
        """Subchannels adjacent to user m."""
        return np.flatnonzero(self.adj[m])

    def sub_neighbors(self, n: int) -> np.ndarray:
        """Users adjacent to subchannel n."""
        return np.flatnonzero(self.adj[:, n])

    def num_edges(self) -> int:
        return int(self.adj.sum())

    def degree(self, m: int) -> int:
        return int(self.adj[m].sum())


@dataclass
class FProfile:
    """Per-user degree caps K_m; subchannel caps are implicitly 1, weights 1."""

    caps: np.ndarray

    def __post_init__(self):
        self.caps = np.asarray(self.caps, dtype=np.int64)
        if self.caps.ndim != 1 or np.any(self.caps < 1):
            raise ValueError("caps must be a vector of integers >= 1")

    @property
    def total(self) -> int:
        return int(self.caps.sum())


@dataclass
class FMatching:
    """An f-matching: each subchannel is assigned to at most one user.

    ``sub_owner[n]`` is the matched user of subchannel n, or -1.
    """

    num_users: int
    sub_owner: np.ndarray

    def __post_init__(self):
        self.sub_owner = np.asarray(self.sub_owner, dtype=np.int64)

    def degrees(self) -> np.ndarray:
        """Matched subchannel count k_m per user."""
        k = np.zeros(self.num_users, dtype=np.int64)
        for owner in self.sub_owner:
            if owner >= 0:
                k[owner] += 1
        return k

    def size(self) -> int:
        return int((self.sub_owner >= 0).sum())

    def edges(self) -> list[tuple[int, int]]:
        return [(int(m), n) for n, m in enumerate(self.sub_owner) if m >= 0]

    def matched_subchannels(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.sub_owner == m)

    def is_valid_for(self, graph: BipartiteGraph, profile: FProfile) -> bool:
        """Degree-feasibility check: every edge exists and no cap is exceeded."""
        for m, n in self.edges():
            if not graph.adj[m, n]:
                return False
        return bool(np.all(self.degrees() <= profile.caps))


@dataclass
class Allocation:
    """Final per-user subchannel sets after the random completion step."""

    sets: list[np.ndarray]
    matched_counts: np.ndarray

    def __post_init__(self):
        self.matched_counts = np.asarray(self.matched_counts, dtype=np.int64)


def build_rbg(csi: CsiMatrix, config: SystemConfig) -> BipartiteGraph:
    """Graph with an edge (u_m, s_n) iff the CSI bit of s_n's band is 1."""
    n_c = config.n_per_band
    adj = np.repeat(csi.q.astype(bool), n_c, axis=1)
    return BipartiteGraph(
        num_users=config.num_users,
        num_subchannels=config.num_subchannels,
        num_bands=config.num_bands,
        adj=adj,
    )


def sample_rbg(p_s: float, config: SystemConfig, rng: np.random.Generator) -> BipartiteGraph:
    """Sample the random bipartite graph: each (user, band) block is present
    independently with probability q_s = 1 - p_s."""
    if not 0 <= p_s <= 1:
        raise ValueError("p_s must lie in [0, 1]")
    bits = (rng.random((config.num_users, config.num_bands)) >= p_s).astype(np.uint8)
    return build_rbg(CsiMatrix(q=bits), config)


def clone_owners(caps: np.ndarray) -> np.ndarray:
    """Owner user index of each expanded clone, in user order."""
    return np.repeat(np.arange(len(caps)), caps)


def expand_vertices(graph: BipartiteGraph, profile: FProfile) -> BipartiteGraph:
    """Clone user m into K_m unit-capacity vertices sharing its neighborhood.

    The expanded graph has a perfect matching iff the original has a perfect
    f-matching, which is how the phase engine computes f-matchings.
    """
    if len(profile.caps) != graph.num_users:
        raise ValueError("profile length must equal the number of users")
    owners = clone_owners(profile.caps)
    return BipartiteGraph(
        num_users=int(profile.total),
        num_subchannels=graph.num_subchannels,
        num_bands=graph.num_bands,
        adj=graph.adj[owners],
    )


def rotation_order(caps: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Fairness rotation of the expanded clones.

    Clones are striped round-robin into min(K_m) groups (group g takes each
    user's clones j with j % G == g), the group sequence gets a uniform cyclic
    shift, and each group is shuffled independently.  Uniforms are consumed in
    a fixed order so the same vector reproduces the same permutation anywhere.
    """
    caps = np.asarray(caps, dtype=np.int64)
    n_groups = int(caps.min())
    offsets = np.concatenate([[0], np.cumsum(caps)[:-1]])
    buckets = [
        [int(offsets[m] + j) for m in range(len(caps)) for j in range(caps[m]) if j % n_groups == g]
        for g in range(n_groups)
    ]
    shift = min(int(uniforms[0] * n_groups), n_groups - 1)
    ptr = 1
    order: list[int] = []
    for g in range(n_groups):
        bucket = list(buckets[(g + shift) % n_groups])
        for i in range(len(bucket) - 1, 0, -1):
            j = min(int(uniforms[ptr] * (i + 1)), i)
            ptr += 1
            bucket[i], bucket[j] = bucket[j], bucket[i]
        order.extend(bucket)
    return np.array(order, dtype=np.int64)


def _project_matching(graph: BipartiteGraph, caps: np.ndarray, clone_owner_of_sub: np.ndarray) -> FMatching:
    owners = clone_owners(caps)
    sub_owner = np.where(clone_owner_of_sub >= 0, owners[clone_owner_of_sub], -1)
    return FMatching(num_users=graph.num_users, sub_owner=sub_owner)


def hopcroft_karp(graph: BipartiteGraph) -> FMatching:
    """Maximum-cardinality matching (unit caps on both sides).

    Runs the phase engine with uncapped depth and natural vertex order; at
    termination no augmenting path exists, certifying maximality.
    """
    from fmatchlab.pver2hk import run_phases

    order = np.arange(graph.num_users, dtype=np.int64)
    match_left, match_right, _ = run_phases(graph.adj, order, l_star=None)
    return FMatching(num_users=graph.num_users, sub_owner=match_right)


def max_f_matching_from_uniforms(
    graph: BipartiteGraph,
    profile: FProfile,
    uniforms: np.ndarray,
    l_star: float | None = None,
    trace=None,
) -> FMatching:
    """Deterministic core of :func:`max_f_matching`: rotation from an explicit
    uniform vector (length >= 1 + sum K_m), then the phase engine."""
    from fmatchlab.pver2hk import run_phases

    expanded = expand_vertices(graph, profile)
    order = rotation_order(profile.caps, uniforms)
    _, match_right, _ = run_phases(expanded.adj, order, l_star=l_star, trace=trace)
    return _project_matching(graph, profile.caps, match_right)


def max_f_matching(
    graph: BipartiteGraph, profile: FProfile, rng: np.random.Generator
) -> FMatching:
    """Maximum f-matching via vertex expansion, fairness rotation, phase engine.

    The rotation is the only source of randomness; tie-breaking inside the
    engine follows the post-rotation clone order, so runs are reproducible
    given (graph, profile, seed).
    """
    uniforms = rng.random(1 + int(profile.total))
    return max_f_matching_from_uniforms(graph, profile, uniforms)


def fisher_yates(items: list[int], uniforms: np.ndarray) -> list[int]:
    """In-place-style Fisher-Yates driven by an explicit uniform vector."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = min(int(uniforms[len(out) - 1 - i] * (i + 1)), i)
        out[i], out[j] = out[j], out[i]
    return out


def complete_allocation_from_uniforms(
    matching: FMatching,
    targets: np.ndarray,
    uniforms: np.ndarray,
    *,
    require_partition: bool = True,
) -> Allocation:
    """Deterministic core of :func:`complete_allocation` driven by an explicit
    uniform vector (length >= number of unmatched subchannels - 1)."""
    targets = np.asarray(targets, dtype=np.int64)
    n = len(matching.sub_owner)
    k = matching.degrees()
    if np.any(k > targets):
        raise ValueError("matching degrees exceed allocation targets")
    if require_partition and int(targets.sum()) != n:
        raise ValueError(f"targets sum to {targets.sum()}, expected {n}")
    if int(targets.sum()) > n:
        raise ValueError("targets exceed the number of subchannels")
    unmatched = [n_ for n_ in range(n) if matching.sub_owner[n_] < 0]
    shuffled = fisher_yates(unmatched, uniforms)
    sets = []
    ptr = 0
    for m in range(matching.num_users):
        need = int(targets[m] - k[m])
        extra = shuffled[ptr : ptr + need]
        ptr += need
        sets.append(np.sort(np.concatenate([matching.matched_subchannels(m), extra]).astype(int)))
    return Allocation(sets=sets, matched_counts=k)


def complete_allocation(
    matching: FMatching,
    targets: np.ndarray,
    rng: np.random.Generator,
    *,
    require_partition: bool = True,
) -> Allocation:
    """Second allocation step: top up each user to its target subchannel count.

    Matched subchannels are kept; the remaining targets[m] - k_m slots are
    filled from the unmatched (outage) subchannels via a single uniform random
    permutation consumed in user order.  With ``require_partition`` the targets
    must sum to N so the sets partition the whole subchannel set.
    """
    n_unmatched = int((matching.sub_owner < 0).sum())
    uniforms = rng.random(max(n_unmatched - 1, 0))
    return complete_allocation_from_uniforms(
        matching, targets, uniforms, require_partition=require_partition
    )


def deficiency_witness(
    graph: BipartiteGraph, profile: FProfile, m: int, *, limit: int = 12
) -> tuple[int, ...] | None:
    """Subset certificate that some maximum f-matching leaves user m unsaturated.

    By the defect formula, max |M_f| = sum(K) - D with
    D = max_X (sum_X K - |N(X)|); user m can be left short by a maximum
    f-matching exactly when every deficiency-maximizing subset contains m.
    Returns such a maximizer (containing m, with positive deficiency), else
    None.  Enumerates all 2^M subsets, so M is capped at ``limit``.
    """
    M = graph.num_users
    if M > limit:
        raise ValueError(f"deficiency_witness enumerates 2^M subsets; M={M} > limit={limit}")
    caps = profile.caps
    best_all = 0
    best_without_m = 0
    arg_with_m: tuple[int, ...] | None = None
    best_with_m = -(10**9)
    for r in range(1, M + 1):
        for subset in itertools.combinations(range(M), r):
            nb = np.zeros(graph.num_subchannels, dtype=bool)
            for i in subset:
                nb |= graph.adj[i]
            d = int(caps[list(subset)].sum()) - int(nb.sum())
            best_all = max(best_all, d)
            if m in subset:
                if d > best_with_m:
                    best_with_m = d
                    arg_with_m = subset
            else:
                best_without_m = max(best_without_m, d)
    if best_all >= 1 and best_with_m == best_all and best_without_m < best_all:
        return arg_with_m
    return None


def edge_count_threshold(
    num_users: int, num_subchannels: int, caps: np.ndarray, m: int
) -> tuple[int, int]:
    """Saturation threshold pair (K_m^th, minimal |E| guaranteeing saturation).

    K_m^th = N + 1 - ceil(M/(M-1) * sum_{i != m} K_i).  Any edge set with
    |E| >= (M-1)N + K_m saturates user m when K_m <= K_m^th; otherwise
    |E| >= M(sum K - 1) + 1 is required.
    """
    M, N = num_users, num_subchannels
    if not (2 <= M <= N):
        raise ValueError("need 2 <= num_users <= num_subchannels")
    caps = np.asarray(caps, dtype=np.int64)
    ksum_others = int(caps.sum() - caps[m])
    k_th = N + 1 - int(np.ceil(M / (M - 1) * ksum_others - 1e-12))
    if caps[m] <= k_th:
        return k_th, (M - 1) * N + int(caps[m])
    return k_th, M * (int(caps.sum()) - 1) + 1


def dump_graph(graph: BipartiteGraph) -> str:
    """Line-oriented text form: header ``M N L`` then one ``m n`` pair per edge."""
    lines = [f"{graph.num_users} {graph.num_subchannels} {graph.num_bands}"]
    for m in range(graph.num_users):
        for n in graph.neighbors(m):
            lines.append(f"{m} {n}")
    return "\n".join(lines) + "\n"


def load_graph(text: str) -> BipartiteGraph:
    """Parse the text format produced by :func:`dump_graph` (0-indexed)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty graph file")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError("header must be 'M N L'")
    M, N, L = (int(x) for x in header)
    adj = np.zeros((M, N), dtype=bool)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line: {ln!r}")
        m, n = int(parts[0]), int(parts[1])
        if not (0 <= m < M and 0 <= n < N):
            raise ValueError(f"edge ({m}, {n}) out of range")
        adj[m, n] = True
    return BipartiteGraph(num_users=M, num_subchannels=N, num_bands=L, adj=adj)

