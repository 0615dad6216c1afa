import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from redci.cimodel import CiTriple, Status, VariableUniverse, all_triples, markov_distance
from redci.citest import (
    CovarianceOracle,
    DataOracle,
    Dataset,
    GraphOracle,
    chi_square,
    chi_square_table,
    empirical_model,
    fisher_z,
    fisher_z_from_rho,
    graph_oracle,
    mann_whitney_u,
    partial_correlation,
    query,
)
from redci.exceptions import DegenerateStratumError, EmptySampleError, SampleSizeError, SingularityError, TableShapeError
from redci.graphs import Dag, complete_dag, implied_model, remove_edge
from redci.synth import LinearGaussianScm, exact_covariance, linear_gaussian, make_rng


def random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + 0.05 * np.eye(n)


def test_identity_covariance_has_zero_partial_correlations():
    for x, y, z in [(0, 1, ()), (0, 2, (1,)), (1, 3, (0, 2))]:
        for m in ("precision", "recursive"):
            assert partial_correlation(np.eye(4), x, y, z, m) == 0.0


def test_partial_correlation_routes_agree():
    rng = np.random.default_rng(11)
    for _ in range(300):
        c = random_spd(rng, 5)
        z = tuple(rng.choice([2, 3, 4], size=rng.integers(0, 4), replace=False))
        a = partial_correlation(c, 0, 1, z, "precision")
        b = partial_correlation(c, 0, 1, z, "recursive")
        assert abs(a - b) < 1e-9


def test_mediated_chain_has_zero_partial_correlation():
    # X -> Z -> Y with unit noise: Cov via the structural form
    g = Dag(["X", "Z", "Y"], [("X", "Z"), ("Z", "Y")])
    c = exact_covariance(LinearGaussianScm(g, {("X", "Z"): 0.8, ("Z", "Y"): -0.6}))
    assert abs(partial_correlation(c, 0, 2, [1])) < 1e-12
    assert abs(partial_correlation(c, 0, 2, [])) > 0.1


def test_recursion_flags_degenerate_conditioning():
    c = np.array([[1.0, 0.5, 0.5], [0.5, 1.0, 1.0], [0.5, 1.0, 1.0]])
    with pytest.raises(SingularityError):
        partial_correlation(c, 0, 1, [2], "recursive")
    with pytest.raises(SingularityError):
        partial_correlation(c, 0, 1, [2], "precision")


def test_partial_correlation_rejects_repeated_index():
    with pytest.raises(ValueError):
        partial_correlation(np.eye(3), 0, 0)


def test_fisher_z_formula():
    stat, p = fisher_z_from_rho(0.0, 100, 2)
    assert stat == 0.0 and p == 1.0
    stat, p = fisher_z_from_rho(0.3, 50, 1)
    expected = math.sqrt(46) * math.atanh(0.3)
    assert stat == pytest.approx(expected, rel=1e-12)
    assert p == pytest.approx(2 * stats.norm.sf(expected), rel=1e-12)
    with pytest.raises(SampleSizeError):
        fisher_z_from_rho(0.1, 4, 1)


def test_fisher_z_detects_strong_dependence():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(1000)
    y = 0.9 * x + rng.standard_normal(1000)
    r = fisher_z(np.column_stack([x, y]), None, 0, 1)
    assert r.p_value < 1e-6 and r.verdict is Status.DEPENDENT


def test_fisher_z_calibration():
    rng = np.random.default_rng(2024)
    rejections = 0
    trials = 2000
    for _ in range(trials):
        d = rng.standard_normal((200, 3))
        rejections += fisher_z(d, None, 0, 1, [2]).p_value <= 0.01
    assert abs(rejections / trials - 0.01) <= 0.01


def test_chi_square_calibration():
    rng = np.random.default_rng(7)
    rejections = 0
    trials = 2000
    for _ in range(trials):
        d = Dataset.from_array(rng.integers(0, 2, size=(500, 3)), ["X", "Y", "Z"], "discrete")
        rejections += chi_square(d, "X", "Y", "Z").p_value <= 0.01
    assert abs(rejections / trials - 0.01) <= 0.01


def test_chi_square_against_scipy_contingency():
    rng = np.random.default_rng(5)
    x = rng.integers(0, 3, 400)
    y = (x + rng.integers(0, 2, 400)) % 3
    stat, dof = chi_square_table(x, y, np.zeros((400, 0)))
    table = np.zeros((3, 3))
    np.add.at(table, (x, y), 1)
    ref = stats.chi2_contingency(table, correction=False)
    assert stat == pytest.approx(ref.statistic) and dof == ref.dof


def test_chi_square_sums_strata():
    rng = np.random.default_rng(6)
    x, y, z = (rng.integers(0, 2, 300) for _ in range(3))
    total, dof = chi_square_table(x, y, z)
    parts = [chi_square_table(x[z == k], y[z == k], np.zeros(((z == k).sum(), 0))) for k in (0, 1)]
    assert total == pytest.approx(sum(p[0] for p in parts)) and dof == 2


def test_chi_square_extremes():
    x = np.tile([0, 1], 200)
    d = Dataset.from_array(np.column_stack([x, x]), ["X", "Y"], "discrete")
    assert chi_square(d, "X", "Y").p_value < 1e-50
    const = Dataset.from_array(np.column_stack([x, np.zeros_like(x)]), ["X", "Y"], "discrete")
    with pytest.raises(DegenerateStratumError):
        chi_square(const, "X", "Y")


def test_collider_marginal_pair_usually_accepted():
    rng = np.random.default_rng(9)
    accepted = 0
    for _ in range(50):
        a, b = rng.integers(0, 2, (2, 2000))
        c = (a ^ b) ^ (rng.random(2000) < 0.1)
        d = Dataset.from_array(np.column_stack([a, b, c]), ["A", "B", "C"], "discrete")
        accepted += chi_square(d, "A", "B").verdict is Status.INDEPENDENT
        assert chi_square(d, "A", "B", "C").verdict is Status.DEPENDENT
    assert accepted >= 45


def test_mann_whitney_examples():
    assert mann_whitney_u([3.0] * 10, [3.0] * 12) == 1.0
    assert mann_whitney_u(range(1, 51), range(51, 101)) < 1e-10
    with pytest.raises(EmptySampleError):
        mann_whitney_u([], [1.0])
    with pytest.raises(ValueError):
        mann_whitney_u([1.0], [2.0], "sideways")


@settings(max_examples=50)
@given(
    st.lists(st.integers(0, 6), min_size=2, max_size=40),
    st.lists(st.integers(0, 6), min_size=2, max_size=40),
    st.sampled_from(["two-sided", "less", "greater"]),
)
def test_mann_whitney_matches_scipy_asymptotic(a, b, alt):
    if len(set(a + b)) == 1:
        return
    ref = stats.mannwhitneyu(a, b, alternative=alt, method="asymptotic", use_continuity=False).pvalue
    assert mann_whitney_u(a, b, alt) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_mann_whitney_calibration():
    rng = np.random.default_rng(3)
    hits = sum(mann_whitney_u(rng.standard_normal(30), rng.standard_normal(30)) <= 0.05 for _ in range(1000))
    assert abs(hits / 1000 - 0.05) < 0.02


# --- datasets -------------------------------------------------------------------------


def test_dataset_csv_round_trip_and_validation():
    d = Dataset.from_array([[1.5, 2.0], [3.0, -1.0]], ["A", "B"])
    assert Dataset.from_csv_text(d.to_csv()).values.tolist() == d.values.tolist()
    with pytest.raises(ValueError):
        Dataset.from_csv_text("A,B\n1,\n")
    with pytest.raises(TableShapeError):
        Dataset.from_csv_text("A,B\n1,2,3\n")
    cat = Dataset.from_csv_text("A,B\nlow,yes\nhigh,no\nlow,no\n", "discrete")
    assert cat.values.tolist() == [[1, 1], [0, 0], [1, 0]]


# --- oracles -----------------------------------------------------------------------------


def test_graph_oracle_without_flips_matches_implied_model():
    u = VariableUniverse.of_size(4)
    g = Dag(u, [("X1", "X2"), ("X3", "X2"), ("X2", "X4")])
    ts = all_triples(u)
    assert empirical_model(graph_oracle(g), ts) == implied_model(g, ts)


def test_graph_oracle_flip_reproduces_almost_complete_input():
    u = VariableUniverse.of_size(4)
    t = CiTriple.of("X3", "X4", ["X1", "X2"])
    o = GraphOracle(complete_dag(u), [t])
    assert query(o, t).independent
    assert implied_model(remove_edge(complete_dag(u), ("X3", "X4")), [t])[t] is Status.INDEPENDENT
    assert [e.triple for e in o.log] == [t]


@settings(max_examples=30)
@given(st.data())
def test_flip_count_equals_markov_distance(data):
    u = VariableUniverse.of_size(4)
    ts = all_triples(u)
    edges = [e for e in [("X1", "X2"), ("X2", "X3"), ("X3", "X4"), ("X1", "X4")] if data.draw(st.booleans())]
    g = Dag(u, edges)
    flips = data.draw(st.sets(st.sampled_from(ts), max_size=6))
    queried = data.draw(st.lists(st.sampled_from(ts), min_size=1, max_size=24, unique=True))
    emp = empirical_model(GraphOracle(g, flips), queried)
    assert markov_distance(emp, implied_model(g, queried), queried) == len(flips & set(queried))


def test_covariance_oracle_agrees_with_d_separation():
    rng = make_rng(0)
    mismatches = total = 0
    for k in range(10):
        g = Dag(VariableUniverse.of_size(5), [(f"X{i}", f"X{j}") for i in range(1, 6) for j in range(i + 1, 6) if rng.random() < 0.4])
        cov = exact_covariance(linear_gaussian(g, rng))
        o = CovarianceOracle(cov, 10**6)
        for t in all_triples(g.universe):
            total += 1
            mismatches += o.query(t).verdict is not implied_model(g, [t])[t]
    assert mismatches / total <= 0.02


def test_data_oracle_logs_p_values():
    rng = np.random.default_rng(0)
    d = Dataset.from_array(rng.standard_normal((300, 3)), ["A", "B", "C"])
    o = DataOracle(d)
    o.query(CiTriple.of("A", "B", "C"))
    assert len(o.log) == 1 and 0 <= o.log[0].p_value <= 1
    assert o.results[0].verdict is o.log[0].verdict
    with pytest.raises(ValueError):
        o.query(CiTriple.of(["A", "B"], "C"))


def _equicorrelated(rxy, rxw, ryw):
    c = np.eye(4)
    c[0, 1] = c[1, 0] = rxy
    c[0, 2] = c[2, 0] = rxw
    c[1, 2] = c[2, 1] = ryw
    return c


def test_weak_union_bound_can_fail():
    # both marginal partials at 0.1, yet conditioning on the other variable inflates one past 2 * 0.1
    c = _equicorrelated(0.1, -0.1, 0.9)
    eps = max(abs(partial_correlation(c, 0, 1, [3])), abs(partial_correlation(c, 0, 2, [3])))
    assert eps == pytest.approx(0.1)
    assert abs(partial_correlation(c, 0, 1, [3, 2])) == pytest.approx(0.438, abs=1e-3)


def test_intersection_bound_can_fail_on_its_boundary():
    # side condition holds with equality up to rounding; random matrices essentially never land here
    c = _equicorrelated(0.298, 0.298, 0.95)
    eps = max(abs(partial_correlation(c, 0, 1, [3, 2])), abs(partial_correlation(c, 0, 2, [3, 1])))
    assert eps < 0.05 and abs(partial_correlation(c, 2, 1, [3])) <= 1 - eps
    assert abs(partial_correlation(c, 0, 1, [3])) > 4 * eps
