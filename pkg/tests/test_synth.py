import numpy as np
import pytest

from redci.cimodel import VariableUniverse
from redci.exceptions import PreconditionError, TableShapeError
from redci.graphs import Dag, GraphClass, UndirectedGraph, enumerate_graphs, is_spanning_tree
from redci.synth import (
    binary_bn_sample,
    draw_coefficients,
    er_dag,
    exact_covariance,
    factor_gibbs_sample,
    linear_gaussian,
    make_rng,
    random_oriented_tree,
    random_spanning_tree,
    sample,
    two_dataset_dag,
    two_dataset_tables,
    two_dataset_ug,
)


def test_streams_are_reproducible_and_distinct():
    assert np.array_equal(make_rng(5, 3).random(4), make_rng(5, 3).random(4))
    assert not np.array_equal(make_rng(5, 3).random(4), make_rng(5, 4).random(4))
    assert not np.array_equal(make_rng(5).random(4), make_rng(6).random(4))


def test_every_four_node_tree_is_reachable():
    rng = make_rng(0)
    seen = {random_spanning_tree(4, rng) for _ in range(600)}
    assert seen == set(enumerate_graphs(VariableUniverse.of_size(4), GraphClass.SPANNING_TREES))


def test_oriented_tree_has_single_root():
    t = random_oriented_tree(6, make_rng(1))
    assert is_spanning_tree(UndirectedGraph(t.universe, t.edges))
    assert sum(1 for v in t.nodes if not t.parents(v)) == 1


def test_er_edge_count_mean():
    rng = make_rng(2)
    counts = [len(er_dag(6, 0.3, rng).edges) for _ in range(2000)]
    assert np.mean(counts) == pytest.approx(15 * 0.3, abs=0.1)
    with pytest.raises(PreconditionError):
        er_dag(3, 1.5, rng)


def test_coefficient_range():
    c = draw_coefficients(5000, make_rng(3))
    assert np.all((np.abs(c) >= 0.1) & (np.abs(c) < 1.0))
    assert abs(np.mean(c > 0) - 0.5) < 0.03


def test_sample_covariance_approaches_exact():
    g = Dag(["A", "B", "C", "D"], [("A", "B"), ("B", "C"), ("A", "D"), ("C", "D")])
    scm = linear_gaussian(g, make_rng(4))
    d = sample(scm, 200_000, make_rng(5))
    assert np.allclose(np.cov(d.values, rowvar=False), exact_covariance(scm), atol=0.03)


def test_binary_sampler_support_and_marginals():
    g = two_dataset_dag()
    tables = two_dataset_tables(make_rng(6))
    d = binary_bn_sample(g, make_rng(7), 50_000, tables)
    assert set(np.unique(d.values)) <= {0, 1}
    w = d.values[:, 0]
    assert w.mean() == pytest.approx(float(tables["W"]), abs=0.01)
    x = d.values[:, 1]
    assert x[w == 1].mean() == pytest.approx(tables["X"][1], abs=0.015)
    assert np.isclose(tables["X"][0] + tables["X"][1], 1.0)


def test_binary_sampler_rejects_bad_tables():
    g = Dag(["A", "B"], [("A", "B")])
    with pytest.raises(TableShapeError):
        binary_bn_sample(g, make_rng(0), 10)
    with pytest.raises(TableShapeError):
        binary_bn_sample(g, make_rng(0), 10, {"A": np.array(0.5), "B": np.array(0.5)})
    with pytest.raises(TableShapeError):
        binary_bn_sample(g, make_rng(0), 10, {"A": np.array(1.5), "B": np.array([0.2, 0.4])})


def test_gibbs_pair_frequencies_match_normalized_factor():
    ug = UndirectedGraph(["A", "B"], [("A", "B")])
    f = np.array([[0.2, 0.8], [0.7, 0.3]])
    d = factor_gibbs_sample(ug, make_rng(8), 40_000, burn_in=200, factors={("A", "B"): f})
    freq = np.zeros((2, 2))
    np.add.at(freq, (d.values[:, 0], d.values[:, 1]), 1)
    assert np.allclose(freq / freq.sum(), f / f.sum(), atol=0.01)


def test_gibbs_validation_and_shape():
    ug = two_dataset_ug()
    d = factor_gibbs_sample(ug, make_rng(9), 50, burn_in=10)
    assert d.values.shape == (50, 4)
    with pytest.raises(PreconditionError):
        factor_gibbs_sample(ug, make_rng(9), 5, thinning=0)
    with pytest.raises(TableShapeError):
        factor_gibbs_sample(UndirectedGraph(["A", "B"], [("A", "B")]), make_rng(0), 5, factors={("A", "B"): np.zeros((2, 2))})
