"""Structure learning from CI verdicts.

Order-based DAG construction, full-conditional Markov networks, sparsest
permutation search, minimum-Markov-distance search over trees and DAGs, a
tree-restricted PC variant and a small PC with Meek rule R1. Estimator
wrappers at the bottom fit these to data matrices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .cimodel import (
    CiStatement,
    CiTriple,
    IndependenceModel,
    Status,
    VariableUniverse,
    all_triples,
    tree_test_triples,
)
from .citest import CiOracle, DataOracle, Dataset, DEFAULT_ALPHA
from .exceptions import CapExceededError, UnknownStatusError
from .graphs import (
    Dag,
    Graph,
    GraphClass,
    UndirectedGraph,
    adjacency_tensor,
    class_table,
    graphs_from_tensor,
    is_connected,
    is_markovian_to,
    is_separated,
    skeleton,
    v_structures,
)

SP_CAP = 7
MMD_DAG_CAP = 5


@dataclass
class DiscoveryReport:
    """Outcome of a discovery run.

    ``graphs`` holds every returned graph (several on ties), ``statements``
    the conducted CI statements in query order, ``annotations`` is free for
    callers (for instance redundancy labels) and ``details`` carries
    algorithm-specific extras.
    """

    graphs: list
    statements: list[CiStatement] = field(default_factory=list)
    annotations: dict = field(default_factory=dict)
    tie: bool = False
    details: dict = field(default_factory=dict)

    @property
    def graph(self):
        return self.graphs[0]

    def to_dict(self) -> dict:
        def g(x):
            if isinstance(x, Pdag):
                return x.to_dict()
            return {"nodes": list(x.nodes), "edges": [list(e) for e in x.sorted_edges()], "directed": x.directed}

        return {
            "graphs": [g(x) for x in self.graphs],
            "statements": [s.to_record() for s in self.statements],
            "annotations": self.annotations,
            "tie": self.tie,
            "details": self.details,
        }


class _Memo:
    """Per-run cache so repeated triples reach the oracle once."""

    def __init__(self, oracle: CiOracle):
        self.oracle = oracle
        self.seen: dict[CiTriple, CiStatement] = {}
        self.order: list[CiStatement] = []

    def __call__(self, t: CiTriple) -> CiStatement:
        st = self.seen.get(t)
        if st is None:
            st = self.seen[t] = self.oracle.query(t)
            self.order.append(st)
        return st


def markov_equivalent(a: Dag, b: Dag) -> bool:
    return skeleton(a).edges == skeleton(b).edges and v_structures(a) == v_structures(b)


def _dedupe_equivalent(dags: Iterable[Dag]) -> list[Dag]:
    out: list[Dag] = []
    for d in dags:
        if not any(markov_equivalent(d, o) for o in out):
            out.append(d)
    return out


# --- order-based and full-conditional construction ----------------------------------


def order_statements(order: Sequence[str]) -> list[CiTriple]:
    """The triples queried by the order-based construction, in query order."""
    out = []
    for j, x in enumerate(order):
        before = order[:j]
        for y in before:
            out.append(CiTriple.of(y, x, [v for v in before if v != y]))
    return out


def _dag_from_order(ask, universe: VariableUniverse, order: Sequence[str]):
    edges, stmts = [], []
    for t in order_statements(order):
        st = ask(t)
        stmts.append(st)
        if not st.independent:
            a, b = t.pair
            # the later node in the order is the child
            edges.append((a, b) if order.index(a) < order.index(b) else (b, a))
    return Dag(universe, edges), stmts


def dag_from_order(oracle: CiOracle, order: Sequence[str] | None = None) -> DiscoveryReport:
    """Parents of each node are the earlier nodes it stays dependent on given all other earlier nodes."""
    u = oracle.universe
    order = tuple(order) if order is not None else u.names
    if sorted(order) != sorted(u.names):
        raise ValueError("order must be a permutation of the universe")
    g, stmts = _dag_from_order(oracle.query, u, order)
    return DiscoveryReport([g], stmts, details={"order": list(order)})


def full_conditional_triples(universe: VariableUniverse) -> list[CiTriple]:
    names = universe.names
    return [CiTriple.of(a, b, [v for v in names if v not in (a, b)]) for a, b in itertools.combinations(names, 2)]


def undirected_full_conditional(oracle: CiOracle) -> DiscoveryReport:
    """Edge a-b iff a and b are dependent given all other variables."""
    u = oracle.universe
    stmts = [oracle.query(t) for t in full_conditional_triples(u)]
    g = UndirectedGraph(u, [st.triple.pair for st in stmts if not st.independent])
    return DiscoveryReport([g], stmts)


# --- sparsest permutation ----------------------------------------------------------


def sp(oracle: CiOracle) -> DiscoveryReport:
    """Sparsest order-based DAGs over all permutations, one per Markov equivalence class."""
    u = oracle.universe
    if len(u) > SP_CAP:
        raise CapExceededError(f"sp enumerates permutations of at most {SP_CAP} variables")
    ask = _Memo(oracle)
    counts, best, best_edges = {}, [], math.inf
    for perm in itertools.permutations(u.names):
        g, _ = _dag_from_order(ask, u, perm)
        counts[",".join(perm)] = len(g.edges)
        if len(g.edges) < best_edges:
            best, best_edges = [g], len(g.edges)
        elif len(g.edges) == best_edges and g not in best:
            best.append(g)
    graphs = _dedupe_equivalent(best)
    return DiscoveryReport(
        graphs,
        ask.order,
        tie=len(graphs) > 1,
        details={
            "edge_counts": counts,
            "edges": best_edges,
            "minimal_dags": [[list(e) for e in g.sorted_edges()] for g in best],
        },
    )


# --- minimum Markov distance --------------------------------------------------------


def _model_vector(model: IndependenceModel, triples: Sequence[CiTriple]) -> np.ndarray:
    out = np.empty(len(triples), dtype=bool)
    for k, t in enumerate(triples):
        v = model[t]
        if v is Status.UNKNOWN:
            raise UnknownStatusError(t)
        out[k] = v is Status.INDEPENDENT
    return out


def markov_distances(model: IndependenceModel, kind: GraphClass, triples: Sequence[CiTriple]) -> np.ndarray:
    """Markov distance of every graph in ``kind`` to ``model`` over ``triples``."""
    triples = list(triples)
    want = _model_vector(model, triples)
    if not triples:
        return np.zeros(len(adjacency_tensor(model.universe, kind)), dtype=np.int64)
    table = class_table(model.universe, kind, triples)
    return (table != want[None, :]).sum(axis=1)


def _minimizers(model: IndependenceModel, kind: GraphClass, triples: Sequence[CiTriple]):
    d = markov_distances(model, kind, triples)
    best = int(d.min())
    rows = np.flatnonzero(d == best)
    graphs = graphs_from_tensor(model.universe, adjacency_tensor(model.universe, kind)[rows], kind is GraphClass.DAGS)
    return graphs, best, d


def mmd_tree(model: IndependenceModel, triples: Sequence[CiTriple] | None = None) -> DiscoveryReport:
    """Spanning trees at minimum Markov distance from ``model``.

    ``triples`` defaults to all singleton triples with one conditioning
    variable; passing another set restricts or extends the comparison.
    """
    if triples is None:
        triples = tree_test_triples(model.universe)
    graphs, best, d = _minimizers(model, GraphClass.SPANNING_TREES, triples)
    graphs.sort(key=lambda g: g.sorted_edges())
    return DiscoveryReport(
        graphs, tie=len(graphs) > 1, details={"distance": best, "n_minimizers": len(graphs), "n_trees": len(d)}
    )


def mmd_dag(model: IndependenceModel, triples: Sequence[CiTriple] | None = None) -> DiscoveryReport:
    """DAGs at minimum Markov distance from ``model``, one per Markov equivalence class."""
    if len(model.universe) > MMD_DAG_CAP:
        raise CapExceededError(f"mmd_dag enumerates DAGs over at most {MMD_DAG_CAP} variables")
    if triples is None:
        triples = all_triples(model.universe)
    graphs, best, _ = _minimizers(model, GraphClass.DAGS, triples)
    graphs = _dedupe_equivalent(sorted(graphs, key=lambda g: (len(g.edges), g.sorted_edges())))
    return DiscoveryReport(graphs, tie=len(graphs) > 1, details={"distance": best, "n_classes": len(graphs)})


def intersection_marginals(model: IndependenceModel) -> tuple[list[CiStatement], list[CiStatement]]:
    """Marginal independences obtained by one Intersection step from |Z|=1 statements.

    For X _||_ Y | W and X _||_ W | Y the rule yields X _||_ {Y, W}, which
    decomposes into X _||_ Y and X _||_ W. Returns the derived marginal
    statements and the premises that produced them, each without repeats.
    """
    names = model.universe.names
    derived: dict[CiTriple, CiStatement] = {}
    used: dict[CiTriple, CiStatement] = {}
    for x in names:
        for y, w in itertools.combinations([v for v in names if v != x], 2):
            p1, p2 = CiTriple.of(x, y, w), CiTriple.of(x, w, y)
            if model[p1] is Status.INDEPENDENT and model[p2] is Status.INDEPENDENT:
                for t in (CiTriple.of(x, y), CiTriple.of(x, w)):
                    derived.setdefault(t, CiStatement(t, Status.INDEPENDENT))
                for t in (p1, p2):
                    used.setdefault(t, CiStatement(t, Status.INDEPENDENT))
    return list(derived.values()), list(used.values())


# --- TreePC -------------------------------------------------------------------------


def _is_tree(edges: set, n: int, u: VariableUniverse) -> bool:
    return len(edges) == n - 1 and is_connected(UndirectedGraph(u, edges))


def tree_pc(oracle: CiOracle) -> DiscoveryReport:
    """PC restricted to one conditioning variable, stopping once the graph is a spanning tree."""
    u = oracle.universe
    n = len(u)
    names = u.names
    adj = {v: set(names) - {v} for v in names}
    edges = {tuple(p) for p in itertools.combinations(names, 2)}
    ask = _Memo(oracle)
    done = _is_tree(edges, n, u)
    for a, b in itertools.combinations(names, 2):
        if done:
            break
        if b not in adj[a]:
            continue
        for z in [v for v in names if v in (adj[a] | adj[b]) - {a, b}]:
            if ask(CiTriple.of(a, b, z)).independent:
                adj[a].discard(b)
                adj[b].discard(a)
                edges.discard((a, b))
                done = _is_tree(edges, n, u)
                break
    g = UndirectedGraph(u, edges)
    is_tree = _is_tree(edges, n, u)
    return DiscoveryReport([g], ask.order, tie=not is_tree, details={"is_tree": is_tree})


# --- PC with R1 -------------------------------------------------------------------


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph: directed pairs plus undirected pairs."""

    universe: VariableUniverse
    directed: frozenset
    undirected: frozenset

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.universe.names

    def adjacent(self, a: str, b: str) -> bool:
        return (a, b) in self.directed or (b, a) in self.directed or frozenset((a, b)) in self.undirected

    def to_dag(self) -> Dag:
        """A DAG extension adding no new v-structures when one exists.

        Repeatedly picks a node with no outgoing directed edge whose
        undirected neighbours are adjacent to all its other neighbours,
        points its undirected edges at it and removes it. If no such node
        remains, the rest is oriented along a topological order of the
        directed part, which keeps the result acyclic.
        """
        idx = self.universe.index
        directed = set(self.directed)
        undirected = {tuple(sorted(e, key=idx.get)) for e in self.undirected}
        left = set(self.nodes)
        out = set(directed)

        def adj(a, b):
            return (a, b) in directed or (b, a) in directed or tuple(sorted((a, b), key=idx.get)) in undirected

        while left:
            for v in sorted(left, key=idx.get):
                if any(a == v and b in left for a, b in directed):
                    continue
                und = [w for w in left if w != v and tuple(sorted((v, w), key=idx.get)) in undirected]
                nbrs = [w for w in left if w != v and adj(v, w)]
                if all(adj(w, o) for w in und for o in nbrs if o != w):
                    out.update((w, v) for w in und)
                    left.discard(v)
                    break
            else:
                break
        if left:
            rank = {v: i for i, v in enumerate(Dag(self.universe, directed)._order)}
            for a, b in undirected:
                if a in left and b in left:
                    out.add((a, b) if (rank[a], idx[a]) < (rank[b], idx[b]) else (b, a))
        return Dag(self.universe, out)

    def to_dict(self) -> dict:
        idx = self.universe.index
        return {
            "nodes": list(self.nodes),
            "directed": sorted([list(e) for e in self.directed], key=lambda e: (idx[e[0]], idx[e[1]])),
            "undirected": sorted([sorted(e, key=idx.get) for e in self.undirected], key=lambda e: (idx[e[0]], idx[e[1]])),
        }


def pc_lite(oracle: CiOracle, max_cond: int | None = None) -> DiscoveryReport:
    """PC skeleton search, collider orientation (first found wins) and Meek rule R1."""
    u = oracle.universe
    names = u.names
    idx = u.index
    ask = _Memo(oracle)
    adj = {v: set(names) - {v} for v in names}
    sepset: dict[frozenset, frozenset] = {}
    level = 0
    while any(len(adj[v]) - 1 >= level for v in names) and (max_cond is None or level <= max_cond):
        for a in names:
            for b in sorted(adj[a], key=idx.get):
                if b not in adj[a]:
                    continue
                cands = sorted(adj[a] - {b}, key=idx.get)
                for s in itertools.combinations(cands, level):
                    if ask(CiTriple.of(a, b, s)).independent:
                        adj[a].discard(b)
                        adj[b].discard(a)
                        sepset[frozenset((a, b))] = frozenset(s)
                        break
        level += 1

    directed: set[tuple[str, str]] = set()
    conflicts = []
    for b in names:
        for a, c in itertools.combinations(sorted(adj[b], key=idx.get), 2):
            if c in adj[a] or b in sepset.get(frozenset((a, c)), frozenset()):
                continue
            for p in (a, c):
                if (b, p) in directed:
                    conflicts.append([p, b])
                else:
                    directed.add((p, b))
    changed = True
    while changed:
        changed = False
        for a, b in sorted(directed):
            for c in sorted(adj[b], key=idx.get):
                if c == a or c in adj[a] or (b, c) in directed or (c, b) in directed:
                    continue
                directed.add((b, c))
                changed = True
    undirected = {
        frozenset((a, b))
        for a in names
        for b in adj[a]
        if (a, b) not in directed and (b, a) not in directed
    }
    pdag = Pdag(u, frozenset(directed), frozenset(undirected))
    dag = pdag.to_dag()
    markovian = is_markovian_to(dag, ask.order)
    return DiscoveryReport(
        [pdag],
        ask.order,
        details={
            "sepsets": {",".join(sorted(k, key=idx.get)): sorted(v, key=idx.get) for k, v in sepset.items()},
            "collider_conflicts": conflicts,
            "markovian": markovian,
            "non_markovian": not markovian,
        },
    )


# --- estimator wrappers -------------------------------------------------------------


class _GraphLearner(BaseEstimator):
    """Shared fitting logic: wrap a data matrix into a test-backed oracle."""

    def _oracle(self, X, feature_names=None) -> DataOracle:
        discrete = self.test == "chi_square"
        X = check_array(X, dtype=None if discrete else np.float64, ensure_min_samples=2, ensure_min_features=2)
        names = feature_names
        if names is None:
            names = getattr(self, "feature_names_in_", None)
        if names is None:
            names = [f"X{i + 1}" for i in range(X.shape[1])]
        names = [str(v) for v in names]
        if len(names) != X.shape[1]:
            raise ValueError(f"expected {X.shape[1]} feature names, got {len(names)}")
        self.n_features_in_ = X.shape[1]
        data = Dataset.from_array(X, names, "discrete" if discrete else "continuous")
        return DataOracle(data, self.test, self.alpha)

    def _finish(self, report: DiscoveryReport):
        self.report_ = report
        self.graph_ = report.graph
        self.statements_ = list(report.statements)
        return self

    def predict(self, triples: Iterable[CiTriple]) -> np.ndarray:
        """Independence (True) or dependence (False) implied by the learned graph for each triple."""
        check_is_fitted(self, "graph_")
        g = self.graph_.to_dag() if isinstance(self.graph_, Pdag) else self.graph_
        return np.array([is_separated(g, t.x, t.y, t.z) for t in triples], dtype=bool)


class OrderDagLearner(_GraphLearner):
    def __init__(self, order: Sequence[str] | None = None, test: str = "fisher_z", alpha: float = DEFAULT_ALPHA):
        self.order = order
        self.test = test
        self.alpha = alpha

    def fit(self, X, y=None, feature_names=None):
        return self._finish(dag_from_order(self._oracle(X, feature_names), self.order))


class FullConditionalLearner(_GraphLearner):
    def __init__(self, test: str = "fisher_z", alpha: float = DEFAULT_ALPHA):
        self.test = test
        self.alpha = alpha

    def fit(self, X, y=None, feature_names=None):
        return self._finish(undirected_full_conditional(self._oracle(X, feature_names)))


class SparsestPermutationLearner(_GraphLearner):
    def __init__(self, test: str = "fisher_z", alpha: float = DEFAULT_ALPHA):
        self.test = test
        self.alpha = alpha

    def fit(self, X, y=None, feature_names=None):
        return self._finish(sp(self._oracle(X, feature_names)))


class TreeMMDLearner(_GraphLearner):
    def __init__(self, test: str = "fisher_z", alpha: float = DEFAULT_ALPHA):
        self.test = test
        self.alpha = alpha

    def fit(self, X, y=None, feature_names=None):
        oracle = self._oracle(X, feature_names)
        triples = tree_test_triples(oracle.universe)
        model = IndependenceModel(oracle.universe, {t: oracle.query(t).verdict for t in triples})
        rep = mmd_tree(model, triples)
        rep.statements = oracle.statements
        return self._finish(rep)


class TreePCLearner(_GraphLearner):
    def __init__(self, test: str = "fisher_z", alpha: float = DEFAULT_ALPHA):
        self.test = test
        self.alpha = alpha

    def fit(self, X, y=None, feature_names=None):
        return self._finish(tree_pc(self._oracle(X, feature_names)))


class PCLiteLearner(_GraphLearner):
    def __init__(self, test: str = "fisher_z", alpha: float = DEFAULT_ALPHA, max_cond: int | None = None):
        self.test = test
        self.alpha = alpha
        self.max_cond = max_cond

    def fit(self, X, y=None, feature_names=None):
        return self._finish(pc_lite(self._oracle(X, feature_names), self.max_cond))
