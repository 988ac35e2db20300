import itertools
import math

import numpy as np
import pytest

from _oracles import (
    defect_max_fmatching,
    flow_max_fmatching,
    kuhn_max_matching,
    prefix_saturable,
    random_bipartite,
    some_max_misses_user,
)
from fmatchlab.channel import CsiMatrix, SystemConfig
from fmatchlab.graph import (
    BipartiteGraph,
    FProfile,
    build_rbg,
    complete_allocation,
    deficiency_witness,
    dump_graph,
    edge_count_threshold,
    expand_vertices,
    hopcroft_karp,
    load_graph,
    max_f_matching,
    rotation_order,
    sample_rbg,
)


def _graph(adj, bands=None):
    adj = np.asarray(adj, dtype=bool)
    return BipartiteGraph(
        num_users=adj.shape[0],
        num_subchannels=adj.shape[1],
        num_bands=bands or adj.shape[1],
        adj=adj,
    )


class TestBuildRbg:
    def test_all_ones_is_complete(self, cfg_rb):
        g = build_rbg(CsiMatrix(q=np.ones((2, 6), dtype=np.uint8)), cfg_rb)
        assert g.adj.all() and g.num_edges() == 24

    def test_all_zeros_is_empty(self, cfg_rb):
        g = build_rbg(CsiMatrix(q=np.zeros((2, 6), dtype=np.uint8)), cfg_rb)
        assert g.num_edges() == 0

    def test_edge_count_tracks_csi_ones(self, cfg_rb, rng):
        q = (rng.random((2, 6)) < 0.5).astype(np.uint8)
        g = build_rbg(CsiMatrix(q=q), cfg_rb)
        assert g.num_edges() == cfg_rb.n_per_band * int(q.sum())

    def test_band_columns_identical(self, cfg_rb, rng):
        q = (rng.random((2, 6)) < 0.5).astype(np.uint8)
        g = build_rbg(CsiMatrix(q=q), cfg_rb)
        for n in range(12):
            base = (n // 2) * 2
            assert np.array_equal(g.adj[:, n], g.adj[:, base])

    def test_fig3_fixture_adjacency(self, fig3_graph):
        assert fig3_graph.neighbors(0).tolist() == [0, 1, 2, 3, 4, 5]
        assert fig3_graph.neighbors(1).tolist() == [4]
        assert fig3_graph.neighbors(2).tolist() == [0, 1, 2, 3, 4, 5]


class TestSampleRbg:
    def test_degenerate_probabilities(self, cfg_rb, rng):
        assert sample_rbg(0.0, cfg_rb, rng).adj.all()
        assert not sample_rbg(1.0, cfg_rb, rng).adj.any()

    def test_mean_edges_binomial(self):
        # M=2, L=6, N_c=1, p_s=0.5: E|E| = 6
        cfg = SystemConfig(2, 6, 6, 10.0, target_rates=(1.0, 1.0))
        rng = np.random.default_rng(0)
        total = sum(sample_rbg(0.5, cfg, rng).num_edges() for _ in range(100_000))
        assert abs(total / 100_000 - 6.0) < 0.1


class TestExpandVertices:
    def test_unit_caps_isomorphic(self, fig3_graph):
        out = expand_vertices(fig3_graph, FProfile(np.array([1, 1, 1])))
        assert np.array_equal(out.adj, fig3_graph.adj)

    def test_fig3_expansion(self, fig3_graph):
        out = expand_vertices(fig3_graph, FProfile(np.array([2, 2, 2])))
        assert out.num_users == 6
        for clone, owner in enumerate([0, 0, 1, 1, 2, 2]):
            assert out.degree(clone) == fig3_graph.degree(owner)

    def test_perfect_matching_iff_perfect_fmatching(self, rng):
        # exhaustive spot family; the full sweep lives in the acceptance suite
        for _ in range(300):
            M = int(rng.integers(2, 4))
            N = int(rng.integers(M, 7))
            caps = rng.integers(1, 3, size=M)
            adj = random_bipartite(rng, M, N, float(rng.random()))
            g = _graph(adj)
            expanded = expand_vertices(g, FProfile(caps))
            hk = hopcroft_karp(expanded).size()
            perfect_expanded = hk == int(caps.sum()) == expanded.num_subchannels
            perfect_f = (
                defect_max_fmatching(adj, caps) == int(caps.sum()) == N
            )
            assert perfect_expanded == perfect_f


class TestHopcroftKarp:
    def test_empty(self):
        assert hopcroft_karp(_graph(np.zeros((2, 3)))).size() == 0

    def test_complete_saturates_left(self):
        assert hopcroft_karp(_graph(np.ones((3, 5)))).size() == 3

    def test_against_kuhn_oracle(self, rng):
        for _ in range(1000):
            M = int(rng.integers(1, 6))
            N = int(rng.integers(1, 8))
            adj = random_bipartite(rng, M, N, float(rng.random()))
            assert hopcroft_karp(_graph(adj)).size() == kuhn_max_matching(adj)


class TestMaxFMatching:
    def test_fig3_instance(self, fig3_graph, rng):
        m = max_f_matching(fig3_graph, FProfile(np.array([2, 2, 2])), rng)
        assert m.size() == 5
        assert m.degrees().tolist() == [2, 1, 2]
        assert m.sub_owner[4] == 1  # the only edge at user 1

    def test_complete_graph_saturates_everyone(self, rng):
        g = _graph(np.ones((3, 8)))
        m = max_f_matching(g, FProfile(np.array([2, 3, 2])), rng)
        assert m.degrees().tolist() == [2, 3, 2]

    def test_against_flow_oracle(self, rng):
        for trial in range(1000):
            M = int(rng.integers(2, 5))
            N = int(rng.integers(M, 9))
            caps = rng.integers(1, 4, size=M)
            adj = random_bipartite(rng, M, N, float(rng.random()))
            got = max_f_matching(_graph(adj), FProfile(caps), rng).size()
            assert got == flow_max_fmatching(adj, caps)

    def test_degree_feasibility_and_validity(self, rng):
        for _ in range(200):
            M, N = 3, 7
            caps = rng.integers(1, 4, size=M)
            adj = random_bipartite(rng, M, N, 0.5)
            g = _graph(adj)
            m = max_f_matching(g, FProfile(caps), rng)
            assert m.is_valid_for(g, FProfile(caps))

    def test_within_band_relabeling_keeps_counts(self, cfg_rb, rng):
        q = (rng.random((2, 6)) < 0.6).astype(np.uint8)
        g = build_rbg(CsiMatrix(q=q), cfg_rb)
        uniforms = rng.random(1 + 12)
        from fmatchlab.graph import max_f_matching_from_uniforms

        base = max_f_matching_from_uniforms(g, FProfile(np.array([6, 6])), uniforms)
        # swap the two subchannels inside each band: identical adjacency rows
        perm = np.arange(12).reshape(6, 2)[:, ::-1].ravel()
        g2 = _graph(g.adj[:, perm], bands=6)
        swapped = max_f_matching_from_uniforms(g2, FProfile(np.array([6, 6])), uniforms)
        assert np.array_equal(base.degrees(), swapped.degrees())

    def test_rotation_balances_users_on_average(self):
        # one contended subchannel: the rotation should split it evenly
        adj = np.zeros((2, 2), dtype=bool)
        adj[0, 0] = adj[1, 0] = True
        g = _graph(adj)
        rng = np.random.default_rng(3)
        wins = np.zeros(2)
        for _ in range(4000):
            m = max_f_matching(g, FProfile(np.array([1, 1])), rng)
            wins[m.sub_owner[0]] += 1
        assert abs(wins[0] - wins[1]) < 4 * math.sqrt(4000) / 2 + 1


class TestRotationOrder:
    def test_is_permutation(self, rng):
        for _ in range(100):
            caps = rng.integers(1, 4, size=int(rng.integers(2, 5)))
            total = int(caps.sum())
            order = rotation_order(caps, rng.random(1 + total))
            assert sorted(order.tolist()) == list(range(total))

    def test_striping_groups_interleave_users(self):
        # zero shift, identity shuffles (u -> 1 keeps Fisher-Yates in place):
        # group 0 = first clones of each user, group 1 = second clones
        caps = np.array([2, 2, 2])
        uniforms = np.concatenate([[0.0], np.full(6, 0.999999)])
        order = rotation_order(caps, uniforms)
        assert order.tolist() == [0, 2, 4, 1, 3, 5]


class TestCompleteAllocation:
    def test_saturated_matching_is_exact(self, rng):
        g = _graph(np.ones((2, 4)))
        m = max_f_matching(g, FProfile(np.array([2, 2])), rng)
        alloc = complete_allocation(m, np.array([2, 2]), rng)
        assert sorted(np.concatenate(alloc.sets).tolist()) == [0, 1, 2, 3]
        assert all(len(s) == 2 for s in alloc.sets)

    def test_fig3_completion(self, fig3_graph, rng):
        m = max_f_matching(fig3_graph, FProfile(np.array([2, 2, 2])), rng)
        alloc = complete_allocation(m, np.array([2, 2, 2]), rng)
        assert all(len(s) == 2 for s in alloc.sets)
        assert 4 in alloc.sets[1]
        union = sorted(np.concatenate(alloc.sets).tolist())
        assert union == list(range(6))

    def test_empty_matching_uniform_partition(self, rng):
        from fmatchlab.graph import FMatching

        m = FMatching(num_users=3, sub_owner=np.full(6, -1))
        alloc = complete_allocation(m, np.array([2, 2, 2]), rng)
        assert sorted(np.concatenate(alloc.sets).tolist()) == list(range(6))

    def test_rejects_bad_targets(self, rng):
        from fmatchlab.graph import FMatching

        m = FMatching(num_users=2, sub_owner=np.full(4, -1))
        with pytest.raises(ValueError):
            complete_allocation(m, np.array([1, 1]), rng)

    def test_conservation_across_random_trials(self, cfg_rb, rng):
        for _ in range(100):
            q = (rng.random((2, 6)) < rng.random()).astype(np.uint8)
            g = build_rbg(CsiMatrix(q=q), cfg_rb)
            m = max_f_matching(g, FProfile(np.array([6, 6])), rng)
            alloc = complete_allocation(m, np.array([6, 6]), rng)
            assert sorted(np.concatenate(alloc.sets).tolist()) == list(range(12))


class TestDeficiencyWitness:
    def test_complete_graph_has_none(self, rng):
        g = _graph(np.ones((3, 6)))
        assert deficiency_witness(g, FProfile(np.array([2, 2, 2])), 0) is None

    def test_isolated_user(self):
        adj = np.ones((3, 6), dtype=bool)
        adj[1] = False
        w = deficiency_witness(_graph(adj), FProfile(np.array([2, 2, 2])), 1)
        assert w == (1,)

    def test_limit_guard(self):
        g = _graph(np.ones((13, 13)))
        with pytest.raises(ValueError):
            deficiency_witness(g, FProfile(np.ones(13, dtype=int)), 0, limit=12)

    def test_matches_matching_computation_exhaustively(self):
        # all graphs on 3 users x 3 subchannels, caps in {1,2}^3
        for caps in itertools.product((1, 2), repeat=3):
            profile = FProfile(np.array(caps))
            for mask in range(1 << 9):
                adj = np.array(
                    [[bool(mask >> (3 * m + n) & 1) for n in range(3)] for m in range(3)]
                )
                g = _graph(adj)
                for m in range(3):
                    witness = deficiency_witness(g, profile, m)
                    expected = some_max_misses_user(adj, caps, m)
                    assert (witness is not None) == expected
                    if witness is not None:
                        nb = np.zeros(3, dtype=bool)
                        for i in witness:
                            nb |= adj[i]
                        assert m in witness
                        assert sum(caps[i] for i in witness) > int(nb.sum())

    def test_matches_matching_computation_random_m4(self, rng):
        for _ in range(400):
            caps = rng.integers(1, 4, size=4)
            adj = random_bipartite(rng, 4, int(rng.integers(4, 8)), float(rng.random()))
            g = _graph(adj)
            m = int(rng.integers(0, 4))
            assert (deficiency_witness(g, FProfile(caps), m) is not None) == (
                some_max_misses_user(adj, caps, m)
            )


class TestEdgeCountThreshold:
    def test_worked_example(self):
        # M=2, N=12, others hold 3: K^th = 12 + 1 - ceil(2*3) = 7
        k_th, thr = edge_count_threshold(2, 12, np.array([5, 3]), 0)
        assert k_th == 7
        assert thr == (2 - 1) * 12 + 5

    def test_unit_cap_threshold(self):
        for M, N in ((2, 6), (3, 8)):
            caps = np.ones(M, dtype=int)
            _, thr = edge_count_threshold(M, N, caps, 0)
            assert thr == (M - 1) * N + 1

    def test_branch_switch(self):
        # (2,4) caps (2,2): K^th = 1 < 2 -> all-users branch
        k_th, thr = edge_count_threshold(2, 4, np.array([2, 2]), 0)
        assert k_th == 1
        assert thr == 2 * (4 - 1) + 1

    def test_single_user_threshold_sufficient_and_tight(self):
        # (M-1)N + K_m edges always allow saturating user m; one fewer does not
        M, N, caps = 2, 4, (2, 2)
        thr = (M - 1) * N + caps[0]
        total = M * N
        for mask in range(1 << total):
            edges = bin(mask).count("1")
            if edges < thr:
                continue
            adj = np.array(
                [[bool(mask >> (N * m + n) & 1) for n in range(N)] for m in range(M)]
            )
            assert prefix_saturable(adj, caps, [0]), adj
        # counterexample at thr - 1: user 0 keeps only one edge
        adj = np.ones((M, N), dtype=bool)
        adj[0, :] = False
        adj[0, 0] = True
        assert adj.sum() == thr - 1
        assert not prefix_saturable(adj, caps, [0])


class TestDumpLoad:
    def test_round_trip(self, rng):
        adj = random_bipartite(rng, 3, 6, 0.4)
        g = _graph(adj, bands=3)
        g2 = load_graph(dump_graph(g))
        assert np.array_equal(g.adj, g2.adj)
        assert g2.num_bands == 3

    def test_rejects_bad_header(self):
        with pytest.raises(ValueError):
            load_graph("3 6\n0 0\n")

    def test_rejects_out_of_range_edge(self):
        with pytest.raises(ValueError):
            load_graph("2 3 3\n2 0\n")
