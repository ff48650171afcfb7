import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from caps.graph import Dag, Permutation, sample_er
from caps.metrics import order_divergence
from caps.ordering import (
    OrderingResult,
    ParentScoreMatrix,
    analytic_parent_scores,
    caps_order,
    check_assumptions,
    leaf_index,
    parent_score_row,
    sortnregress_order,
    true_parent_scores,
)
from caps.score import DegenerateDataError, GaussianPlugin
from caps.synthesis import NoiseSpec, SemSpec, generate_dataset, sample_sem


def linear_sem(seed, d=None, noise=None):
    rng = np.random.default_rng(seed)
    d = d or int(rng.integers(2, 7))
    g = sample_er(d, rng.choice([1, 2]), rng)
    return sample_sem(g, 1.0, noise or NoiseSpec.equal(d), rng)


def chain_spec(w=0.8, variances=(1.0, 1.0)):
    g = Dag.from_edges(2, [(0, 1)])
    return SemSpec(g, np.array([[0.0, w], [0.0, 0.0]]), g.adj.copy(),
                   NoiseSpec("gaussian", np.sqrt(variances), "explicit"))


def dummy(d):
    # the plug-in ignores data, but the ordering still validates its shape
    return np.random.default_rng(0).normal(size=(5, d))


class TestLeafIndex:
    def test_argmax(self):
        assert leaf_index([-3.0, -1.0, -2.0]) == 1

    def test_first_on_ties(self):
        assert leaf_index([-1.0, -1.0]) == 0

    def test_empty(self):
        with pytest.raises(ValueError):
            leaf_index([])


class TestParentScoreRow:
    def test_chain_root_row(self):
        # root 0 loses its child's contribution w^2 when the child is dropped
        clamped, raw = parent_score_row([-1.64, -1.0], [-1.64, -1.64], 0)
        np.testing.assert_allclose(raw, [0.0, -0.64])
        np.testing.assert_allclose(clamped, [0.0, 0.0])

    def test_chain_leaf_row(self):
        clamped, _ = parent_score_row([-1.64, -1.0], [-1.0, -1.0], 1)
        np.testing.assert_allclose(clamped, [0.64, 0.0])

    def test_mismatch(self):
        with pytest.raises(ValueError):
            parent_score_row([0.0, 1.0], [0.0], 0)

    def test_matrix_clamps_and_zeroes_diagonal(self):
        ps = ParentScoreMatrix(np.array([[5.0, -1.0], [2.0, 3.0]]))
        np.testing.assert_array_equal(ps.p, [[0.0, 0.0], [2.0, 0.0]])
        assert ps.raw[0, 1] == -1.0


class TestCapsOrderAnalytic:
    def test_chain(self):
        res = caps_order(dummy(2), GaussianPlugin.from_sem(chain_spec()))
        assert res.perm.pos.tolist() == [0, 1]
        np.testing.assert_allclose(res.pscore.p, [[0, 0], [0.64, 0]], atol=1e-12)

    def test_leaf_diagonal_is_inverse_noise_variance(self):
        spec = chain_spec(variances=(1.0, 0.5))
        res = caps_order(dummy(2), GaussianPlugin.from_sem(spec))
        assert res.jac_trace[0][1][1] == pytest.approx(-2.0)

    @pytest.mark.parametrize("seed", range(200))
    def test_exact_order_equal_variance(self, seed):
        spec = linear_sem(seed)
        res = caps_order(dummy(spec.graph.d), GaussianPlugin.from_sem(spec))
        assert order_divergence(res.perm, spec.graph) == 0

    @pytest.mark.parametrize("seed", range(50))
    def test_leaf_mode_scores_are_exact(self, seed):
        spec = linear_sem(seed)
        res = caps_order(dummy(spec.graph.d), GaussianPlugin.from_sem(spec))
        np.testing.assert_allclose(res.pscore.p, analytic_parent_scores(spec).p, atol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**6))
    def test_zero_pattern(self, seed):
        spec = linear_sem(seed)
        res = caps_order(dummy(spec.graph.d), GaussianPlugin.from_sem(spec))
        non_edge = ~spec.graph.adj.T
        assert np.all(res.pscore.p[non_edge] <= 1e-9)

    def test_full_mode_exact_only_for_sinks(self):
        res = caps_order(dummy(2), GaussianPlugin.from_sem(chain_spec()), pscore_mode="full")
        assert res.pscore.p[1, 0] == pytest.approx(0.64)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            caps_order(dummy(2), GaussianPlugin(np.eye(2)), pscore_mode="nope")


class TestCapsOrderData:
    def test_constant_column(self):
        X = dummy(3)
        X[:, 2] = 0.0
        with pytest.raises(DegenerateDataError):
            caps_order(X)

    def test_too_small(self):
        with pytest.raises(ValueError):
            caps_order(np.zeros((10, 1)))

    def test_deterministic_and_trace_shape(self):
        spec = linear_sem(3, d=4)
        X = generate_dataset(spec, 300, np.random.default_rng(0))
        a, b = caps_order(X), caps_order(X)
        assert a.perm == b.perm
        np.testing.assert_array_equal(a.pscore.p, b.pscore.p)
        assert [len(nodes) for nodes, _ in a.jac_trace] == [4, 3, 2, 1]

    def test_stein_chain(self):
        spec = chain_spec()
        X = generate_dataset(spec, 1000, np.random.default_rng(1))
        assert caps_order(X).perm.pos.tolist() == [0, 1]

    def test_json_round_trip(self, tmp_path):
        spec = linear_sem(5, d=3)
        res = caps_order(dummy(3), GaussianPlugin.from_sem(spec))
        res.save(tmp_path / "o.json")
        import json

        back = OrderingResult.from_dict(json.loads((tmp_path / "o.json").read_text()))
        assert back.perm == res.perm
        np.testing.assert_allclose(back.pscore.p, res.pscore.p)
        assert len(back.jac_trace) == 3


class TestSortnregress:
    def test_increasing_variance(self):
        X = np.random.default_rng(0).normal(size=(500, 3)) * [3.0, 1.0, 2.0]
        assert sortnregress_order(X).order.tolist() == [1, 2, 0]

    def test_ties_keep_index_order(self):
        X = np.array([[1.0, 1.0], [-1.0, -1.0]])
        assert sortnregress_order(X).order.tolist() == [0, 1]


class TestDiagnostics:
    def test_analytic_chain(self):
        np.testing.assert_allclose(analytic_parent_scores(chain_spec(0.5, (1.0, 2.0))).p, [[0, 0], [0.125, 0]])

    def test_true_scores_linear_match_analytic(self):
        spec = linear_sem(7, d=4)
        np.testing.assert_allclose(true_parent_scores(spec).p, analytic_parent_scores(spec).p, atol=1e-9)

    def test_true_scores_nonlinear_positive_on_edges(self):
        rng = np.random.default_rng(8)
        g = sample_er(4, 2, rng)
        spec = sample_sem(g, 0.0, NoiseSpec.equal(4), rng)
        p = true_parent_scores(spec, n=500, rng=np.random.default_rng(0)).p
        assert np.all(p[g.adj.T] > 0)
        assert np.all(p[~g.adj.T] == 0)

    def test_equal_variance_satisfies_cond_i(self):
        spec = linear_sem(9)
        assert check_assumptions(spec, analytic_parent_scores(spec))["cond_i"]

    def test_noisy_root_fails_cond_i(self):
        spec = chain_spec(0.1, (2.0, 0.5))
        flags = check_assumptions(spec, analytic_parent_scores(spec))
        # root gap 1/0.5 - 1/2 = 1.5, outgoing score 0.01/0.5 = 0.02
        assert flags == {"cond_i": False, "cond_ii": False}

    def test_strong_edge_meets_cond_ii(self):
        spec = chain_spec(1.0, (2.0, 0.5))
        flags = check_assumptions(spec, analytic_parent_scores(spec))
        assert flags == {"cond_i": False, "cond_ii": True}

    def test_cond_ii_gives_exact_order(self):
        spec = chain_spec(1.0, (2.0, 0.5))
        res = caps_order(dummy(2), GaussianPlugin.from_sem(spec))
        assert res.perm.pos.tolist() == [0, 1]
