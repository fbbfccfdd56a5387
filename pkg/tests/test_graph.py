import numpy as np
import pytest

from rwnsgcn.graph import (
    apply,
    build_graph,
    sym_normalized_operator,
    transition_operator,
)

from conftest import dense_adjacency, random_graph


def test_path_graph_degrees():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    assert g.num_edges == 2
    assert np.array_equal(g.degrees, [1.0, 2.0, 1.0])


def test_symmetric_duplicate_collapses():
    g = build_graph(2, [(0, 1, 1.0), (1, 0, 1.0)])
    assert g.num_edges == 1
    assert np.array_equal(g.degrees, [1.0, 1.0])
    assert g.duplicates_collapsed == 1


def test_star_degrees():
    g = build_graph(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
    assert np.array_equal(g.degrees, [3.0, 1.0, 1.0, 1.0])


def test_duplicate_last_weight_wins():
    g = build_graph(2, [(0, 1, 1.0), (0, 1, 3.5)])
    assert g.edges() == [(0, 1, 3.5)]
    assert g.duplicates_collapsed == 1


def test_self_loops_dropped_with_count():
    with pytest.warns(UserWarning, match="self-loop"):
        g = build_graph(3, [(0, 0, 1.0), (0, 1, 1.0)])
    assert g.self_loops_dropped == 1
    assert g.num_edges == 1


def test_out_of_range_id_names_edge_index():
    with pytest.raises(ValueError, match="edge 1"):
        build_graph(2, [(0, 1, 1.0), (0, 5, 1.0)])


def test_negative_weight_rejected():
    with pytest.raises(ValueError, match="negative weight"):
        build_graph(2, [(0, 1, -0.5)])


def test_rebuild_from_edges_is_identical():
    rng = np.random.default_rng(0)
    g = random_graph(rng, 20, 0.2, weighted=True)
    g2 = build_graph(g.num_nodes, g.edges())
    assert np.array_equal(g.indptr, g2.indptr)
    assert np.array_equal(g.indices, g2.indices)
    assert np.array_equal(g.weights, g2.weights)


def test_sym_normalized_single_edge_no_loops():
    g = build_graph(2, [(0, 1, 1.0)])
    op = sym_normalized_operator(g, self_loops=False)
    dense = op.matrix.toarray()
    assert dense[0, 1] == pytest.approx(1.0)
    assert dense[1, 0] == pytest.approx(1.0)


def test_sym_normalized_path_hand_values():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    dense = sym_normalized_operator(g, self_loops=False).matrix.toarray()
    assert dense[0, 1] == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert dense[1, 2] == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_sym_normalized_single_edge_with_loops_all_half():
    g = build_graph(2, [(0, 1, 1.0)])
    dense = sym_normalized_operator(g, self_loops=True).matrix.toarray()
    assert np.allclose(dense, 0.5, atol=1e-12)


def test_transition_single_edge_swaps():
    g = build_graph(2, [(0, 1, 1.0)])
    p = transition_operator(g)
    assert np.allclose(p.matrix.toarray(), [[0, 1], [1, 0]])
    assert np.allclose(apply(p, np.array([1.0, 0.0])), [0.0, 1.0])


def test_transition_star_rows():
    g = build_graph(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
    dense = transition_operator(g).matrix.toarray()
    assert np.allclose(dense[0], [0, 1 / 3, 1 / 3, 1 / 3])
    for leaf in (1, 2, 3):
        row = np.zeros(4)
        row[0] = 1.0
        assert np.allclose(dense[leaf], row)


def test_transition_triangle_applied_to_indicator():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    p = transition_operator(g)
    assert np.allclose(p.matrix.toarray(), (np.ones((3, 3)) - np.eye(3)) / 2)
    assert np.allclose(apply(p, np.array([1.0, 0.0, 0.0])), [0.0, 0.5, 0.5])


def test_apply_dimension_mismatch():
    g = build_graph(2, [(0, 1, 1.0)])
    with pytest.raises(ValueError, match="dimension mismatch"):
        apply(transition_operator(g), np.ones(3))


def test_apply_identity_like():
    # self-loop-only normalization of an empty graph is the identity
    g = build_graph(3, [])
    op = sym_normalized_operator(g, self_loops=True)
    x = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert np.allclose(apply(op, x), x, atol=1e-12)


def test_row_stochastic_rows_sum_to_one():
    rng = np.random.default_rng(1)
    for _ in range(20):
        g = random_graph(rng, int(rng.integers(2, 30)), 0.2, weighted=True)
        p = transition_operator(g)
        sums = np.asarray(p.matrix.sum(axis=1)).ravel()
        nonisolated = g.degrees > 0
        assert np.allclose(sums[nonisolated], 1.0, atol=1e-9)
        assert np.allclose(sums[~nonisolated], 0.0)


def test_sym_operator_exactly_symmetric():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = random_graph(rng, 15, 0.3, weighted=True)
        dense = sym_normalized_operator(g, self_loops=True).matrix.toarray()
        assert np.array_equal(dense, dense.T)


@pytest.mark.parametrize("self_loops", [False, True])
def test_operators_match_dense_oracle(self_loops):
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(2, 33))
        g = random_graph(rng, n, 0.25, weighted=True)
        a = dense_adjacency(g)
        if self_loops:
            a_eff = a + np.eye(n)
        else:
            a_eff = a
        d = a_eff.sum(axis=1)
        with np.errstate(divide="ignore"):
            dinv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1)), 0.0)
        expected_sym = dinv_sqrt[:, None] * a_eff * dinv_sqrt[None, :]
        got_sym = sym_normalized_operator(g, self_loops=self_loops).matrix.toarray()
        assert np.allclose(got_sym, expected_sym, atol=1e-12)

        d_plain = a.sum(axis=1)
        dinv = np.where(d_plain > 0, 1.0 / np.where(d_plain > 0, d_plain, 1), 0.0)
        expected_p = dinv[:, None] * a
        got_p = transition_operator(g).matrix.toarray()
        assert np.allclose(got_p, expected_p, atol=1e-12)
