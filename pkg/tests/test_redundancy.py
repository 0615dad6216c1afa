import itertools

import pytest

from oracles import full_conditional_list, lpi
from redci.cimodel import CiStatement, CiTriple, Status, VariableUniverse, all_triples
from redci.exceptions import PreconditionError
from redci.graphoid import GraphoidVerdict, check_consistency, closure, is_graphoid_redundant
from redci.graphs import Dag, GraphClass, UndirectedGraph, enumerate_graphs, is_separated
from redci.redundancy import (
    VACUOUS,
    RedundancyClass,
    SurgeryGraph,
    classify,
    explain,
    graph_surgery,
    graphical_counterexample,
    graphoid_redundant_dependences,
    is_graphically_redundant,
    iterated_candidates,
    sufficient_criterion,
)

D = GraphClass.DAGS
EX1 = [CiStatement.indep("X1", "X2"), CiStatement.dep("X1", "Y"), CiStatement.dep("X2", "Y")]


def order_graph(u, sts):
    idx = u.index
    edges = []
    for st in sts:
        if not st.independent:
            a, b = sorted(st.triple.pair, key=idx.get)
            edges.append((a, b))
    return Dag(u, edges)


def network_graph(u, sts):
    return UndirectedGraph(u, [st.triple.pair for st in sts if not st.independent])


def test_collider_tests_classify():
    assert classify(EX1, CiStatement.dep("X1", "Y", "X2"), D) is RedundancyClass.GRAPHOID_REDUNDANT
    assert classify(EX1, CiStatement.dep("X1", "X2", "Y"), D) is RedundancyClass.PURELY_GRAPHICAL
    assert is_graphically_redundant(EX1, CiStatement.dep("X1", "X2", "Y"), D) is True


def test_graphoid_class_carries_derivation():
    c = explain(EX1, CiStatement.dep("X1", "Y", "X2"), D)
    assert c.derivation["status"] == "dep"
    assert c.to_dict()["class"] == "graphoid_redundant"


def test_empty_list_is_not_redundant():
    u = VariableUniverse(("A", "B", "C"))
    s = CiStatement.dep("A", "B")
    assert is_graphically_redundant([], s, D, u) is False
    assert graphical_counterexample([], s, D, u) is not None


def test_vacuous_when_no_graph_agrees():
    # a spanning tree can never make two nodes marginally independent
    u = VariableUniverse.of_size(3)
    res = is_graphically_redundant([CiStatement.indep("X1", "X2")], CiStatement.dep("X1", "X3"), GraphClass.SPANNING_TREES, u)
    assert res is VACUOUS and not res


@pytest.mark.parametrize("n", [3, 4])
def test_tree_property_forces_last_dependence(n):
    u = VariableUniverse.of_size(n)
    names = u.names
    rest = lambda a, b: [v for v in names if v not in (a, b)]
    sts = [CiStatement.indep(names[i], names[-1], rest(names[i], names[-1])) for i in range(n - 2)]
    s = CiStatement.dep(names[-2], names[-1], rest(names[-2], names[-1]))
    assert is_graphically_redundant(sts, s, GraphClass.SPANNING_TREES, u) is True
    assert is_graphically_redundant(sts, s, GraphClass.UNDIRECTED, u) is False
    assert classify(sts, s, GraphClass.SPANNING_TREES, universe=u) is RedundancyClass.PURELY_GRAPHICAL


def test_studeny_implications_per_dag_enumeration():
    sts = [
        CiStatement.indep("X", "Y", {"Z", "W"}),
        CiStatement.indep("X", "Y"),
        CiStatement.indep("Z", "W", "X"),
        CiStatement.indep("Z", "W", "Y"),
    ]
    for s in [CiStatement.indep("X", "Y", "Z"), CiStatement.indep("Z", "W")]:
        c = explain(sts, s, D)
        assert c.graphoid is GraphoidVerdict.UNDETERMINED
        assert c.graphical is True
        assert c.value is RedundancyClass.PURELY_GRAPHICAL


def test_cpc_style_statements_are_consistent():
    sts = EX1 + [CiStatement.indep("X1", "X2", "Y")]
    assert check_consistency(sts)
    for st in sts:
        others = [o for o in sts if o != st]
        assert is_graphoid_redundant(others, st) is GraphoidVerdict.UNDETERMINED


# --- sufficient criterion ----------------------------------------------------------


def test_chain_non_adjacent_dependences_are_certified():
    u = VariableUniverse.of_size(4)
    g = UndirectedGraph(u, [("X1", "X2"), ("X2", "X3"), ("X3", "X4")])
    sts = full_conditional_list(g)
    for a, b in [("X1", "X3"), ("X1", "X4"), ("X2", "X4")]:
        assert sufficient_criterion(g, sts, CiTriple.of(a, b))


def test_star_collider_pairs_are_certified():
    u = VariableUniverse(("X1", "X2", "X3", "Y"))
    g = Dag(u, [("X1", "Y"), ("X2", "Y"), ("X3", "Y")])
    sts = lpi(g, list(u.names))
    for a, b in itertools.combinations(["X1", "X2", "X3"], 2):
        assert sufficient_criterion(g, sts, CiTriple.of(a, b, "Y"))
    cands = {c.triple for c in iterated_candidates(g, sts)}
    assert {CiTriple.of(a, b, "Y") for a, b in itertools.combinations(["X1", "X2", "X3"], 2)} <= cands


def test_criterion_rejects_dependence_coupled_over_s():
    g = UndirectedGraph(["A", "X", "V", "Y", "B"], [("A", "X"), ("X", "V"), ("V", "Y"), ("Y", "B")])
    assert not sufficient_criterion(g, [CiStatement.dep("A", "B")], CiTriple.of("X", "Y"))


def test_criterion_preconditions():
    g = UndirectedGraph(["A", "B", "C"], [("A", "B")])
    with pytest.raises(PreconditionError):
        sufficient_criterion(g, [], CiTriple.of("A", "C"))
    with pytest.raises(PreconditionError):
        sufficient_criterion(g, [CiStatement.dep("B", "C")], CiTriple.of("A", "B"))


# --- surgery ----------------------------------------------------------------------------


def test_surgery_splits_path_interior():
    g = UndirectedGraph(list("XVWY"), [("X", "V"), ("V", "W"), ("W", "Y")])
    sg = graph_surgery(g, CiTriple.of("X", "Y"))
    assert set(sg.duplicated) == {"V", "W"}
    assert sg.separates(CiTriple.of("X", "Y"))
    v1, v2 = sg.duplicated["V"]
    w1, w2 = sg.duplicated["W"]
    assert sg.base.has_edge("X", v1) and sg.base.has_edge(w2, "Y")
    assert not sg.base.has_edge("X", v2) and not sg.base.has_edge(w1, "Y")
    # original names resolve to their copies
    assert not sg.separates(CiTriple.of("X", "V"))


def test_surgery_drops_lone_edge():
    sg = graph_surgery(UndirectedGraph(["X", "Y"], [("X", "Y")]), CiTriple.of("X", "Y"))
    assert not sg.base.edges and sg.separates(CiTriple.of("X", "Y"))


def test_surgery_on_collider_splits_the_child():
    g = Dag(["X1", "X2", "Y"], [("X1", "Y"), ("X2", "Y")])
    sg = graph_surgery(g, CiTriple.of("X1", "X2", "Y"))
    assert set(sg.duplicated) == {"Y"}
    assert sg.separates(CiTriple.of("X1", "X2", "Y"))
    assert not sg.separates(CiTriple.of("X1", "Y"))


def test_surgery_rejects_separated_pair():
    with pytest.raises(PreconditionError):
        graph_surgery(UndirectedGraph(["X", "Y"]), CiTriple.of("X", "Y"))


def _settings(n):
    u = VariableUniverse.of_size(n)
    for g in enumerate_graphs(u, D):
        sts = lpi(g, list(u.names))
        yield D, u, sts, order_graph(u, sts)
    for g in enumerate_graphs(u, GraphClass.UNDIRECTED):
        sts = full_conditional_list(g)
        yield GraphClass.UNDIRECTED, u, sts, network_graph(u, sts)


@pytest.mark.slow
@pytest.mark.parametrize("n", [3, 4])
def test_surgery_separates_target_and_preserves_inputs(n):
    for _, u, sts, h in _settings(n):
        listed = {st.triple for st in sts}
        for t in all_triples(u):
            if t in listed or is_separated(h, t.x, t.y, t.z):
                continue
            if not sufficient_criterion(h, sts, t):
                continue
            sg = graph_surgery(h, t)
            assert sg.separates(t)
            assert all(sg.separates(st.triple) == st.independent for st in sts)


@pytest.mark.slow
@pytest.mark.parametrize("n", [3, 4])
def test_criterion_implies_graphoid_undetermined(n):
    for kind, u, sts, h in _settings(n):
        res = closure(sts, universe=u, complete=True)
        listed = {st.triple for st in sts}
        for t in all_triples(u):
            if t in listed or is_separated(h, t.x, t.y, t.z):
                continue
            if sufficient_criterion(h, sts, t):
                assert res.status(t) is Status.UNKNOWN
                if kind is GraphClass.UNDIRECTED:
                    assert is_graphically_redundant(sts, CiStatement.dep(t.x, t.y, t.z), kind, u) is True


@pytest.mark.slow
def test_graphoid_matching_implies_graphical_redundancy():
    for kind, u, sts, _ in _settings(4):
        res = closure(sts, universe=u, complete=True)
        listed = {st.triple for st in sts}
        for t in all_triples(u):
            v = res.status(t)
            if t in listed or v is Status.UNKNOWN:
                continue
            got = is_graphically_redundant(sts, CiStatement(t, v), kind, u)
            assert got is True or got is VACUOUS


@pytest.mark.parametrize("kind", [D, GraphClass.UNDIRECTED])
def test_counterexamples_to_criterion_necessity(kind):
    # marginal dependence that every consistent graph implies and the axioms leave open,
    # yet a listed dependence is coupled over it
    u = VariableUniverse.of_size(3)
    if kind is D:
        g = Dag(u, [("X1", "X3"), ("X2", "X3")])
        sts = lpi(g, list(u.names))
        h, s = order_graph(u, sts), CiStatement.dep("X1", "X3")
    else:
        g = UndirectedGraph(u, [("X1", "X2"), ("X1", "X3"), ("X2", "X3")])
        sts = full_conditional_list(g)
        h, s = network_graph(u, sts), CiStatement.dep("X1", "X2")
    assert is_graphically_redundant(sts, s, kind, u) is True
    assert is_graphoid_redundant(sts, s, complete=True) is GraphoidVerdict.UNDETERMINED
    assert sufficient_criterion(h, sts, s.triple) is False


def test_order_setting_counterexample_to_criterion_soundness():
    u = VariableUniverse.of_size(4)
    g = Dag(u, [("X1", "X4"), ("X4", "X3"), ("X2", "X3")])
    sts = lpi(g, list(u.names))
    h = order_graph(u, sts)
    t = CiTriple.of("X1", "X2", "X4")
    assert not is_separated(h, t.x, t.y, t.z)
    assert sufficient_criterion(h, sts, t)
    witness = graphical_counterexample(sts, CiStatement.dep("X1", "X2", "X4"), D, u)
    assert witness is not None and is_separated(witness, t.x, t.y, t.z)


# --- iterated candidates -------------------------------------------------------------------


def _fork_with_isolated_node():
    g = Dag(list("XYZW"), [("X", "Y"), ("Y", "Z")])
    sts = [
        CiStatement.dep("X", "Y"),
        CiStatement.indep("X", "Z", "Y"),
        CiStatement.dep("Y", "Z", "X"),
        CiStatement.indep("X", "W", {"Y", "Z"}),
        CiStatement.indep("Y", "W", {"X", "Z"}),
        CiStatement.indep("Z", "W", {"X", "Y"}),
    ]
    return g, sts


def test_observed_independence_suppresses_later_candidate():
    g, sts = _fork_with_isolated_node()
    u = VariableUniverse(tuple("XYZW"))
    order = sorted(all_triples(u), key=lambda t: -len(t.z))
    it = iterated_candidates(g, sts, triples=order)
    seen = []
    for c in it:
        seen.append(c.triple)
        it.report(Status.INDEPENDENT if c.triple == CiTriple.of("X", "Z", "W") else Status.DEPENDENT)
    assert CiTriple.of("X", "Z", "W") in seen
    assert CiTriple.of("X", "Z") not in seen
    passive = [c.triple for c in iterated_candidates(g, sts, triples=order)]
    assert CiTriple.of("X", "Z") in passive


def test_without_reports_stream_equals_criterion_positives():
    g, sts = _fork_with_isolated_node()
    u = VariableUniverse(tuple("XYZW"))
    listed = {st.triple for st in sts}
    expected = [
        t for t in all_triples(u) if t not in listed and not is_separated(g, t.x, t.y, t.z) and sufficient_criterion(g, sts, t)
    ]
    assert [c.triple for c in iterated_candidates(g, sts)] == expected


def test_report_requires_pending_candidate():
    g, sts = _fork_with_isolated_node()
    it = iterated_candidates(g, sts)
    with pytest.raises(RuntimeError):
        it.report(Status.DEPENDENT)


def test_surgery_graph_wraps_plain_graphs():
    g, _ = _fork_with_isolated_node()
    sg = SurgeryGraph.wrap(g)
    assert SurgeryGraph.wrap(sg) is sg
    assert sg.separates(CiTriple.of("X", "W"))


# --- coupling generator -----------------------------------------------------------------


def test_coupled_dependences_in_both_settings():
    u = VariableUniverse(("X", "Y"))
    out = graphoid_redundant_dependences(Dag(u, [("X", "Y")]))
    assert CiStatement.dep("X", "Y") in out
    assert closure([CiStatement.dep("X", "Y")]).status(CiTriple.of("X", "Y")) is Status.DEPENDENT
    chain = UndirectedGraph(["X", "Y", "Z"], [("X", "Y"), ("Y", "Z")])
    assert CiStatement.dep("X", "Y", "Z") in graphoid_redundant_dependences(chain)
    star = Dag(["X1", "X2", "X3", "Y"], [("X1", "Y"), ("X2", "Y"), ("X3", "Y")])
    assert CiStatement.dep("X1", "X2", "Y") not in graphoid_redundant_dependences(star)


@pytest.mark.parametrize("n", [3, 4])
def test_coupled_dependences_are_graphoid_entailed(n):
    for kind, u, sts, h in _settings(n):
        res = closure(sts, universe=u, complete=True)
        for st in graphoid_redundant_dependences(h, sts, all_triples(u)):
            assert res.status(st.triple) is Status.DEPENDENT, (h, st)
