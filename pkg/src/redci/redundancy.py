"""Graphical, Graphoid and purely graphical redundancy of CI statements."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .cimodel import (
    CiStatement,
    CiTriple,
    Status,
    VariableUniverse,
    all_triples,
    universe_of,
)
from .exceptions import CapExceededError, PreconditionError
from .graphoid import GraphoidVerdict, closure, is_graphoid_redundant
from .graphs import (
    Dag,
    Graph,
    GraphClass,
    UndirectedGraph,
    _coupled_over_sets,
    active_paths,
    class_table,
    coupled,
    graphs_from_tensor,
    adjacency_tensor,
    is_separated,
)

# surgery graphs grow by copying nodes, so path search gets a roomier cap
SURGERY_PATH_CAP = 48


class RedundancyClass(enum.Enum):
    PURELY_GRAPHICAL = "purely_graphical"
    GRAPHOID_REDUNDANT = "graphoid_redundant"
    UNDETERMINED = "graphically_redundant_only_undetermined"
    NOT_GRAPHICALLY_REDUNDANT = "not_graphically_redundant"


class _Vacuous:
    """No graph in the class agrees with the given statements."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "VACUOUS"

    def __bool__(self) -> bool:
        return False


VACUOUS = _Vacuous()


# --- enumeration oracle -------------------------------------------------------


def _universe_for(statements: Sequence[CiStatement], s: CiStatement | None, universe) -> VariableUniverse:
    if universe is not None:
        return universe if isinstance(universe, VariableUniverse) else VariableUniverse(tuple(universe))
    return universe_of(statements, s.triple.variables if s is not None else ())


def _consistent_rows(statements: Sequence[CiStatement], triples: Sequence[CiTriple], table: np.ndarray) -> np.ndarray:
    keep = np.ones(table.shape[0], dtype=bool)
    for j, st in enumerate(statements):
        keep &= table[:, j] == st.independent
    return keep


def is_graphically_redundant(
    statements: Iterable[CiStatement],
    s: CiStatement,
    kind: GraphClass,
    universe: VariableUniverse | None = None,
):
    """True iff every graph of ``kind`` that agrees with ``statements`` also agrees with ``s``.

    Returns :data:`VACUOUS` when no graph agrees with ``statements``.
    """
    statements = list(statements)
    u = _universe_for(statements, s, universe)
    triples = [st.triple for st in statements] + [s.triple]
    table = class_table(u, kind, triples)
    keep = _consistent_rows(statements, triples, table)
    if not keep.any():
        return VACUOUS
    return bool((table[keep, -1] == s.independent).all())


def graphical_counterexample(
    statements: Iterable[CiStatement],
    s: CiStatement,
    kind: GraphClass,
    universe: VariableUniverse | None = None,
) -> Graph | None:
    """A graph of ``kind`` agreeing with ``statements`` but not with ``s``, if one exists."""
    statements = list(statements)
    u = _universe_for(statements, s, universe)
    kind = GraphClass(kind)
    triples = [st.triple for st in statements] + [s.triple]
    table = class_table(u, kind, triples)
    hit = np.flatnonzero(_consistent_rows(statements, triples, table) & (table[:, -1] != s.independent))
    if hit.size == 0:
        return None
    adj = adjacency_tensor(u, kind)[hit[:1]]
    return graphs_from_tensor(u, adj, kind is GraphClass.DAGS)[0]


# --- surgery graphs -----------------------------------------------------------


@dataclass(frozen=True)
class SurgeryGraph:
    """A graph whose original variables may stand for several copied nodes.

    ``groups`` maps each original variable to the nodes of ``base`` that
    represent it; separation of or given a variable means separation of or
    given the whole group.
    """

    base: Graph
    groups: Mapping[str, frozenset[str]]

    @classmethod
    def wrap(cls, g: "Graph | SurgeryGraph") -> "SurgeryGraph":
        if isinstance(g, SurgeryGraph):
            return g
        return cls(g, MappingProxyType({v: frozenset((v,)) for v in g.nodes}))

    @property
    def directed(self) -> bool:
        return self.base.directed

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(self.groups)

    @property
    def duplicated(self) -> dict[str, tuple[str, ...]]:
        return {v: tuple(sorted(ns)) for v, ns in self.groups.items() if len(ns) > 1}

    def resolve(self, names: Iterable[str]) -> frozenset[str]:
        out: set[str] = set()
        for v in names:
            out |= self.groups[v]
        return frozenset(out)

    def separated(self, x, y, z=()) -> bool:
        return self.separates(CiTriple.of(x, y, z))

    def separates(self, t: CiTriple) -> bool:
        return is_separated(self.base, self.resolve(t.x), self.resolve(t.y), self.resolve(t.z))

    def coupled_over(self, a: CiTriple, s: CiTriple) -> bool:
        """Are a's endpoints coupled over ``s`` given a's conditioning set?"""
        r = self.resolve
        return _coupled_over_sets(
            self.base, r(a.x), r(a.y), r(a.z), set(r(s.x)), set(r(s.y)), r(s.z), cap=SURGERY_PATH_CAP
        )


def _copy_name(v: str, k: int, taken: set[str]) -> str:
    name = f"{v}#{k}"
    while name in taken:
        name += "'"
    taken.add(name)
    return name


def _split(base: Graph, n_set: set[str], xs: frozenset, ys: frozenset, groups: Mapping[str, frozenset[str]]):
    taken = set(base.nodes)
    copies = {w: (_copy_name(w, 1, taken), _copy_name(w, 2, taken)) for w in sorted(n_set)}
    nodes = [v for v in base.nodes if v not in n_set]
    for w in sorted(n_set):
        nodes.extend(copies[w])
    edges = []
    for a, b in base.edges:
        ina, inb = a in n_set, b in n_set
        if ina and inb:
            edges += [(copies[a][0], copies[b][0]), (copies[a][1], copies[b][1])]
        elif ina or inb:
            w, o = (a, b) if ina else (b, a)
            if o in xs:
                targets = [copies[w][0]]
            elif o in ys:
                targets = [copies[w][1]]
            else:
                targets = list(copies[w])
            edges += [(c, b) if ina else (a, c) for c in targets]
        elif not ((a in xs and b in ys) or (a in ys and b in xs)):
            edges.append((a, b))
    g = Dag(nodes, edges) if base.directed else UndirectedGraph(nodes, edges)
    new_groups = {}
    for v, ns in groups.items():
        out = set()
        for node in ns:
            out |= set(copies[node]) if node in n_set else {node}
        new_groups[v] = frozenset(out)
    return g, MappingProxyType(new_groups), {c: w for w, cs in copies.items() for c in cs}


def _interior(g: Graph, xs, ys, zs) -> set[str]:
    out: set[str] = set()
    for p in active_paths(g, xs, ys, zs, cap=SURGERY_PATH_CAP):
        out.update(p[1:-1])
    return out


def graph_surgery(g: "Graph | SurgeryGraph", s: CiTriple) -> SurgeryGraph:
    """Cut every active x..y path given z by splitting the nodes on those paths.

    Each node on an active path is replaced by two copies; the first copy
    keeps only the links towards x, the second only those towards y, and
    links to untouched nodes go to both. Direct x..y edges are dropped. If
    copies still meet through an untouched node (for instance a conditioned
    common child), that node is split too and the construction is redone.
    """
    sg = SurgeryGraph.wrap(g)
    base = sg.base
    xs, ys, zs = sg.resolve(s.x), sg.resolve(s.y), sg.resolve(s.z)
    if is_separated(base, xs, ys, zs):
        raise PreconditionError(f"{s} is already separated")
    n_set = _interior(base, xs, ys, zs)
    while True:
        h, groups, origin = _split(base, n_set, xs, ys, sg.groups)
        zs_h = frozenset().union(*(groups[v] for v in s.z)) if s.z else frozenset()
        if is_separated(h, xs, ys, zs_h):
            return SurgeryGraph(h, groups)
        extra = {origin.get(v, v) for v in _interior(h, xs, ys, zs_h)} - n_set
        if not extra:  # cannot happen: every remaining path leaves the copies
            raise RuntimeError("surgery failed to separate")
        n_set |= extra


# --- sufficient criterion -----------------------------------------------------


def _check_markovian(sg: SurgeryGraph, statements: Sequence[CiStatement]) -> None:
    for st in statements:
        if not st.independent and sg.separates(st.triple):
            raise PreconditionError(f"graph separates {st.triple} but it is listed as dependent")


def sufficient_criterion(
    g: "Graph | SurgeryGraph", statements: Iterable[CiStatement], s: CiTriple, check: bool = True
) -> bool:
    """Path criterion for the dependence of ``s`` being purely graphically redundant.

    True iff no listed dependence has its endpoints coupled over ``s``.
    """
    sg = SurgeryGraph.wrap(g)
    statements = list(statements)
    if check:
        if not s.is_singleton:
            raise PreconditionError("the criterion needs singleton endpoints")
        _check_markovian(sg, statements)
        if sg.separates(s):
            raise PreconditionError(f"{s} is separated in the graph")
    return not any(not st.independent and sg.coupled_over(st.triple, s) for st in statements)


class IteratedCandidates(Iterator[CiStatement]):
    """Stream of purely graphically redundant dependences, one per step.

    After taking a candidate the consumer may call :meth:`report` with the
    verdict it observed. An observed independence splits the current graph
    so that later candidates stay redundant; every reported verdict joins
    the known statements. Unreported candidates are left out of them.
    """

    def __init__(
        self,
        g: "Graph | SurgeryGraph",
        statements: Iterable[CiStatement],
        triples: Sequence[CiTriple] | None = None,
    ):
        self.graph = SurgeryGraph.wrap(g)
        self.statements = list(statements)
        _check_markovian(self.graph, self.statements)
        if triples is None:
            triples = all_triples(VariableUniverse(self.graph.nodes))
        self._triples = list(triples)
        self._done = {st.triple for st in self.statements}
        self._pending: CiTriple | None = None

    def __iter__(self):
        return self

    def __next__(self) -> CiStatement:
        self._pending = None
        for t in self._triples:
            if t in self._done:
                continue
            if self.graph.separates(t):
                continue
            if sufficient_criterion(self.graph, self.statements, t, check=False):
                self._done.add(t)
                self._pending = t
                return CiStatement.dep(t.x, t.y, t.z)
        raise StopIteration

    def report(self, verdict) -> None:
        if self._pending is None:
            raise RuntimeError("no candidate awaiting a verdict")
        t, self._pending = self._pending, None
        verdict = verdict if isinstance(verdict, Status) else Status.from_bool(bool(verdict))
        st = CiStatement(t, verdict)
        if st.independent:
            self.graph = graph_surgery(self.graph, t)
        self.statements.append(st)


def iterated_candidates(g, statements, triples=None) -> IteratedCandidates:
    return IteratedCandidates(g, statements, triples)


# --- coupling-based Graphoid-redundant dependences -------------------------------


def graphoid_redundant_dependences(
    g: Graph, statements: Iterable[CiStatement] = (), triples: Iterable[CiTriple] | None = None
) -> set[CiStatement]:
    """Dependences whose endpoint sets are coupled in ``g`` given the conditioning set.

    ``g`` is expected to be the order-built DAG or the full-conditional
    Markov network of ``statements``; the statements themselves are only
    used to skip triples already listed.
    """
    listed = {st.triple for st in statements}
    if triples is None:
        triples = all_triples(g.universe, singleton_only=False)
    return {
        CiStatement(t, Status.DEPENDENT) for t in triples if t not in listed and coupled(g, t.x, t.y, t.z)
    }


# --- classification -----------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    value: RedundancyClass
    graphoid: GraphoidVerdict
    graphical: object  # True, False, VACUOUS or None when not enumerated
    derivation: dict | None = None
    counterexample: Graph | None = None
    criterion: bool | None = None

    def to_dict(self) -> dict:
        g = self.graphical
        return {
            "class": self.value.value,
            "graphoid": self.graphoid.value,
            "graphical": "vacuous" if g is VACUOUS else g,
            "criterion": self.criterion,
            "derivation": self.derivation,
            "counterexample": None
            if self.counterexample is None
            else {
                "nodes": list(self.counterexample.nodes),
                "edges": [list(e) for e in self.counterexample.sorted_edges()],
                "directed": self.counterexample.directed,
            },
        }


def explain(
    statements: Iterable[CiStatement],
    s: CiStatement,
    kind: GraphClass,
    g: "Graph | SurgeryGraph | None" = None,
    universe: VariableUniverse | None = None,
    use_intersection: bool = True,
) -> Classification:
    """Classify ``s`` and keep the evidence behind the verdict."""
    statements = list(statements)
    kind = GraphClass(kind)
    u = _universe_for(statements, s, universe)
    res = closure(statements, use_intersection, u, complete=True)
    gv = is_graphoid_redundant(statements, s, _closure=res)
    if res.contradiction is not None:
        return Classification(RedundancyClass.NOT_GRAPHICALLY_REDUNDANT, gv, None)
    if gv is GraphoidVerdict.MATCHING:
        return Classification(RedundancyClass.GRAPHOID_REDUNDANT, gv, None, res.derivation(s.triple))
    if gv is GraphoidVerdict.CONTRADICTING:
        return Classification(RedundancyClass.NOT_GRAPHICALLY_REDUNDANT, gv, None, res.derivation(s.triple))
    crit = None
    if g is not None and not s.independent:
        sg = SurgeryGraph.wrap(g)
        if not sg.separates(s.triple):
            crit = sufficient_criterion(sg, statements, s.triple)
            if crit:
                return Classification(RedundancyClass.PURELY_GRAPHICAL, gv, None, criterion=True)
    try:
        graphical = is_graphically_redundant(statements, s, kind, u)
    except CapExceededError:
        return Classification(RedundancyClass.UNDETERMINED, gv, None, criterion=crit)
    if graphical is VACUOUS:
        return Classification(RedundancyClass.UNDETERMINED, gv, VACUOUS, criterion=crit)
    if graphical:
        return Classification(RedundancyClass.PURELY_GRAPHICAL, gv, True, criterion=crit)
    return Classification(
        RedundancyClass.NOT_GRAPHICALLY_REDUNDANT,
        gv,
        False,
        counterexample=graphical_counterexample(statements, s, kind, u),
        criterion=crit,
    )


def classify(
    statements: Iterable[CiStatement],
    s: CiStatement,
    kind: GraphClass,
    g: "Graph | SurgeryGraph | None" = None,
    universe: VariableUniverse | None = None,
    use_intersection: bool = True,
) -> RedundancyClass:
    return explain(statements, s, kind, g, universe, use_intersection).value
