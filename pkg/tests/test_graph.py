import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpflow import DimensionError, Graph, InfeasibleInstanceError, QPFlowError, cycle_basis, residues, validate_instance


def test_single_edge_residue_is_plus_at_tail_minus_at_head():
    g = Graph.from_edges(2, [(0, 1)])
    np.testing.assert_array_equal(residues(g, [1.0]), [1.0, -1.0])


def test_incidence_sign_convention():
    g = Graph.from_edges(3, [(0, 1), (2, 1)])
    B = g.incidence.toarray()
    np.testing.assert_array_equal(B, [[1, -1, 0], [0, -1, 1]])


def test_zero_flow_has_zero_residue(triangle):
    np.testing.assert_array_equal(residues(triangle, np.zeros((3, 2))), np.zeros((3, 2)))


def test_triangle_cycle_flow_is_a_circulation(triangle):
    np.testing.assert_array_equal(residues(triangle, [1.0, 1.0, 1.0]), [0.0, 0.0, 0.0])


def test_residues_shape_and_dimension_errors(triangle):
    assert residues(triangle, np.ones((3, 4))).shape == (3, 4)
    with pytest.raises(DimensionError):
        residues(triangle, np.ones(4))


def test_residues_are_linear(rng, triangle):
    X, Y = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    lhs = residues(triangle, 2.5 * X - 1.5 * Y)
    rhs = 2.5 * residues(triangle, X) - 1.5 * residues(triangle, Y)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(n=2, tails=[0], heads=[0]), "self-loop"),
        (dict(n=2, tails=[0], heads=[1], weights=[0.0]), "positive"),
        (dict(n=2, tails=[0], heads=[1], weights=[-1.0]), "positive"),
        (dict(n=2, tails=[0], heads=[2]), "outside"),
        (dict(n=1, tails=[0], heads=[0]), "at least 2"),
        (dict(n=2, tails=[], heads=[]), "at least one edge"),
    ],
)
def test_graph_rejects_invalid_input(kwargs, match):
    with pytest.raises(QPFlowError, match=match):
        Graph(**kwargs)


def test_graph_arrays_are_read_only(triangle):
    with pytest.raises(ValueError):
        triangle.weights[0] = 3.0


def test_parallel_pair_basis_is_one_signed_cycle():
    g = Graph.from_edges(2, [(0, 1), (0, 1)])
    basis = cycle_basis(g)
    assert len(basis) == 1
    np.testing.assert_array_equal(basis.vectors()[0], [1, -1])


def test_tree_has_empty_basis():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (1, 3)])
    basis = cycle_basis(g)
    assert len(basis) == 0
    assert basis.matrix.shape == (3, 0)
    assert g.bridges.all()


def test_triangle_basis_touches_all_edges_with_zero_residue(triangle):
    basis = cycle_basis(triangle)
    assert len(basis) == 1
    z = basis.vectors()[0]
    assert set(np.abs(z).tolist()) == {1}
    # integer incidence product, independent of the float residue routine
    B = triangle.incidence.toarray().astype(np.int64)
    np.testing.assert_array_equal(B.T @ z, 0)
    assert z[np.flatnonzero(z)[0]] == 1


def test_bridges_mark_edges_on_no_cycle():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)])
    np.testing.assert_array_equal(g.bridges, [False, False, False, True])


def test_basis_is_deterministic():
    edges = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 2), (1, 3)]
    a = cycle_basis(Graph.from_edges(4, edges))
    b = cycle_basis(Graph.from_edges(4, edges))
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert a.non_tree == b.non_tree


@st.composite
def multigraphs(draw):
    n = draw(st.integers(2, 9))
    m = draw(st.integers(1, 18))
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1])
    edges = draw(st.lists(pairs, min_size=m, max_size=m))
    return Graph.from_edges(n, edges)


@settings(max_examples=1000, deadline=None)
@given(multigraphs())
def test_basis_cardinality_independence_and_zero_residues(g):
    basis = cycle_basis(g)
    assert len(basis) == g.m - g.n + g.n_components
    Z = basis.matrix
    B = g.incidence.toarray()
    assert np.all(B.T @ Z == 0)
    if len(basis):
        assert np.linalg.matrix_rank(Z) == len(basis)
        # each closing edge appears in exactly its own cycle
        for i, e in enumerate(basis.non_tree):
            assert np.flatnonzero(Z[e]).tolist() == [i]


def test_connected_demand_is_feasible():
    g = Graph.from_edges(2, [(0, 1)])
    assert validate_instance(g, [1.0, -1.0]).ok


def test_nonzero_column_sum_is_reported():
    g = Graph.from_edges(2, [(0, 1)])
    report = validate_instance(g, [1.0, 0.0])
    assert not report.ok
    assert report.violations[0][:2] == (-1, 0)
    with pytest.raises(InfeasibleInstanceError, match="commodity 0"):
        report.raise_if_infeasible()


def test_demand_across_components_is_reported_per_component():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    d = np.array([[1.0, 0.0], [0.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])
    report = validate_instance(g, d)
    assert not report.ok
    assert {(c, j) for c, j, _ in report.violations} == {(0, 0), (1, 0)}


def test_feasibility_tolerance_scales_with_demand_size():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    big = 1e6
    assert validate_instance(g, [big, -big / 3, -2 * big / 3]).ok
    assert not validate_instance(g, [1.0, -1.0, 1e-9]).ok
