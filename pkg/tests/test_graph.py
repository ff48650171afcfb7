import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from caps.graph import (
    CycleError,
    Dag,
    Permutation,
    descendants,
    full_dag_from_permutation,
    is_acyclic,
    read_adjacency_csv,
    read_dag,
    read_edge_list,
    sample_er,
    sample_sf,
    topological_sort,
    write_adjacency_csv,
    write_edge_list,
)


def adj_from(d, edges):
    a = np.zeros((d, d), dtype=bool)
    for i, j in edges:
        a[i, j] = True
    return a


@st.composite
def dags(draw, max_d=10):
    d = draw(st.integers(1, max_d))
    order = draw(st.permutations(range(d)))
    bits = draw(st.lists(st.booleans(), min_size=d * d, max_size=d * d))
    adj = np.zeros((d, d), dtype=bool)
    for a in range(d):
        for b in range(a + 1, d):
            if bits[a * d + b]:
                adj[order[a], order[b]] = True
    return Dag(adj)


class TestAcyclic:
    def test_empty(self):
        assert is_acyclic(np.zeros((3, 3), dtype=bool))

    def test_two_cycle(self):
        assert not is_acyclic(adj_from(2, [(0, 1), (1, 0)]))

    def test_transitive_triangle(self):
        assert is_acyclic(adj_from(3, [(0, 1), (1, 2), (0, 2)]))

    def test_dag_rejects_cycle_and_self_loop(self):
        with pytest.raises(CycleError):
            Dag(adj_from(2, [(0, 1), (1, 0)]))
        with pytest.raises(CycleError):
            Dag(adj_from(2, [(0, 0)]))


class TestTopologicalSort:
    def test_chain(self):
        assert topological_sort(Dag.from_edges(3, [(0, 1), (1, 2)])).pos.tolist() == [0, 1, 2]

    def test_edgeless_ties_by_index(self):
        assert topological_sort(Dag.empty(3)).pos.tolist() == [0, 1, 2]

    def test_tie_break_against_enumeration(self):
        g = Dag.from_edges(3, [(1, 0), (2, 0)])
        valid = []
        for order in itertools.permutations(range(3)):
            pos = np.empty(3, dtype=int)
            pos[list(order)] = np.arange(3)
            if all(pos[i] < pos[j] for i, j in g.edges()):
                valid.append(list(order))
        # lexicographically smallest valid order = lowest index first
        expected = Permutation.from_order(min(valid)).pos.tolist()
        assert expected == [2, 0, 1]
        assert topological_sort(g).pos.tolist() == expected

    def test_cycle_detected(self):
        with pytest.raises(CycleError):
            topological_sort(Dag(adj_from(2, [(0, 1), (1, 0)]), check=False))

    @settings(max_examples=200, deadline=None)
    @given(dags())
    def test_respects_edges(self, g):
        pos = topological_sort(g).pos
        assert all(pos[i] < pos[j] for i, j in g.edges())


class TestDescendants:
    chain = Dag.from_edges(3, [(0, 1), (1, 2)])
    diamond = Dag.from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)])

    def test_chain(self):
        assert descendants(self.chain, 0) == {1, 2}
        assert descendants(self.chain, 2) == set()

    def test_diamond(self):
        assert descendants(self.diamond, 1) == {3}


class TestFullDag:
    @pytest.mark.parametrize("pos,edges", [
        ([0, 1], [(0, 1)]),
        ([1, 0], [(1, 0)]),
        ([0, 1, 2], [(0, 1), (0, 2), (1, 2)]),
    ])
    def test_examples(self, pos, edges):
        g = full_dag_from_permutation(Permutation(pos))
        assert sorted(g.edges()) == edges
        assert is_acyclic(g.adj)

    @settings(max_examples=1000, deadline=None)
    @given(dags())
    def test_supergraph_of_source(self, g):
        full = full_dag_from_permutation(topological_sort(g))
        assert not np.any(g.adj & ~full.adj)
        assert full.n_edges == g.d * (g.d - 1) // 2


class TestGenerators:
    def test_er_two_nodes_always_one_edge(self):
        for seed in range(20):
            assert sample_er(2, 1, np.random.default_rng(seed)).n_edges == 1

    @pytest.mark.parametrize("factor,lo,hi", [(1, 8.5, 11.5), (4, 37, 43)])
    def test_er_mean_edges(self, factor, lo, hi):
        counts = [sample_er(10, factor, np.random.default_rng(s)).n_edges for s in range(1000)]
        assert lo <= np.mean(counts) <= hi

    def test_sf_edge_counts(self):
        assert sample_sf(3, 1, np.random.default_rng(0)).n_edges == 2
        for s in range(20):
            assert sample_sf(10, 1, np.random.default_rng(s)).n_edges == 9

    def test_sf_heavy_tail(self):
        hits = 0
        for s in range(500):
            g = sample_sf(50, 1, np.random.default_rng(s))
            deg = g.adj.sum(0) + g.adj.sum(1)
            hits += deg.max() >= 3 * deg.mean()
        assert hits >= 0.9 * 500

    @pytest.mark.parametrize("sampler,factor", [(sample_er, 1), (sample_er, 4), (sample_sf, 1), (sample_sf, 4)])
    def test_generators_emit_dags(self, sampler, factor):
        for s in range(1000):
            g = sampler(8, factor, np.random.default_rng(s))
            assert not np.any(np.diag(g.adj))
            assert is_acyclic(g.adj)

    @pytest.mark.parametrize("sampler", [sample_er, sample_sf])
    def test_seed_determinism(self, sampler):
        a = sampler(12, 2, np.random.default_rng(7))
        b = sampler(12, 2, np.random.default_rng(7))
        assert a.adj.tobytes() == b.adj.tobytes()


class TestIO:
    def test_edge_list_round_trip(self, tmp_path):
        g = sample_er(7, 2, np.random.default_rng(3))
        write_edge_list(g, tmp_path / "g.txt")
        text = (tmp_path / "g.txt").read_text()
        assert text.startswith("# d=7\n")
        assert read_edge_list(tmp_path / "g.txt") == g
        assert read_dag(tmp_path / "g.txt") == g

    def test_isolated_trailing_nodes_kept(self, tmp_path):
        g = Dag.from_edges(5, [(0, 1)])
        write_edge_list(g, tmp_path / "g.txt")
        assert read_edge_list(tmp_path / "g.txt").d == 5

    def test_adjacency_csv_round_trip(self, tmp_path):
        g = sample_er(6, 1, np.random.default_rng(1))
        write_adjacency_csv(g, tmp_path / "g.csv")
        assert read_adjacency_csv(tmp_path / "g.csv") == g
        assert read_dag(tmp_path / "g.csv") == g

    def test_bad_line(self, tmp_path):
        (tmp_path / "g.txt").write_text("# d=3\n0 1 2\n")
        with pytest.raises(ValueError, match=":2:"):
            read_edge_list(tmp_path / "g.txt")
