"""Fixed-point closure of CI statements under the (semi-)Graphoid axioms.

Triples are handled internally as ``(a, b, z)`` bitmasks over the universe
with ``a < b``. Independences propagate forward through Decomposition, Weak
Union, Contraction and (optionally) Intersection; dependences propagate
through the contrapositive instances of the same rules. Symmetry is built
into the key.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .cimodel import CiStatement, CiTriple, IndependenceModel, Status, VariableUniverse, universe_of
from .exceptions import CapExceededError


class Rule(enum.Enum):
    INPUT = "input"
    DECOMPOSITION = "decomposition"
    WEAK_UNION = "weak_union"
    CONTRACTION = "contraction"
    INTERSECTION = "intersection"
    DECOMPOSITION_CONTRA = "decomposition_contrapositive"
    WEAK_UNION_CONTRA = "weak_union_contrapositive"
    CONTRACTION_CONTRA = "contraction_contrapositive"
    INTERSECTION_CONTRA = "intersection_contrapositive"
    REFUTATION = "refutation"


@dataclass(frozen=True)
class AxiomRule:
    """One ground rule application: premises entail the conclusion."""

    id: Rule
    premises: tuple[tuple[CiTriple, Status], ...]
    conclusion: tuple[CiTriple, Status]


class GraphoidVerdict(enum.Enum):
    MATCHING = "matching"
    CONTRADICTING = "contradicting"
    UNDETERMINED = "undetermined"

    @property
    def determined(self) -> bool:
        return self is not GraphoidVerdict.UNDETERMINED


_I, _D = 1, 0


def _submasks(m: int):
    """Non-empty submasks of ``m`` (including ``m`` itself)."""
    s = m
    while s:
        yield s
        s = (s - 1) & m


def _proper_submasks(m: int):
    for s in _submasks(m):
        if s != m:
            yield s


def _key(a: int, b: int, z: int) -> tuple[int, int, int]:
    return (a, b, z) if a < b else (b, a, z)


@dataclass
class ClosureResult:
    universe: VariableUniverse
    model: IndependenceModel
    contradiction: CiTriple | None
    traces: Mapping[CiTriple, AxiomRule]
    contradiction_traces: tuple[AxiomRule, AxiomRule] | None = None
    _inputs: frozenset = field(default_factory=frozenset, repr=False)

    def status(self, triple: CiTriple) -> Status:
        return self.model[triple]

    def derivation(self, triple: CiTriple, verdict: Status | None = None) -> dict:
        """Nested derivation tree of the status of ``triple``."""
        if verdict is not None and self.contradiction == triple and self.contradiction_traces:
            rule = next(r for r in self.contradiction_traces if r.conclusion[1] is verdict)
        else:
            rule = self.traces.get(triple)
        if rule is None:
            return {"triple": str(triple), "status": self.model[triple].value, "rule": None}
        return self._tree(rule, set())

    def _tree(self, rule: AxiomRule, seen: set) -> dict:
        t, v = rule.conclusion
        node = {"triple": str(t), "status": v.value, "rule": rule.id.value}
        if rule.premises:
            kids = []
            for pt, pv in rule.premises:
                sub = self.traces.get(pt)
                if sub is None or pt in seen or sub.conclusion[1] is not pv:
                    kids.append({"triple": str(pt), "status": pv.value, "rule": None})
                else:
                    kids.append(self._tree(sub, seen | {t}))
            node["premises"] = kids
        return node


class _Engine:
    def __init__(self, universe: VariableUniverse, use_intersection: bool):
        n = len(universe)
        if n > universe.set_valued_cap:
            raise CapExceededError(f"closure works on at most {universe.set_valued_cap} variables, got {n}")
        self.u = universe
        self.full = (1 << n) - 1
        self.use_intersection = use_intersection
        self.status: dict[tuple, int] = {}
        self.trace: dict[tuple, tuple] = {}
        self.queue: deque = deque()
        self.clash = None  # (key, trace_indep, trace_dep)

    # --- bookkeeping -----------------------------------------------------

    def emit(self, a, b, z, v, rule, premises):
        if self.clash is not None:
            return
        k = _key(a, b, z)
        old = self.status.get(k)
        if old is None:
            self.status[k] = v
            self.trace[k] = (rule, premises, v)
            self.queue.append(k)
        elif old != v:
            first = self.trace[k]
            second = (rule, premises, v)
            self.clash = (k, first, second) if old == _I else (k, second, first)

    def get(self, a, b, z):
        return self.status.get(_key(a, b, z))

    def run(self):
        while self.queue and self.clash is None:
            k = self.queue.popleft()
            a, b, c = k
            if self.status[k] == _I:
                self._from_indep(a, b, c, k)
                self._from_indep(b, a, c, k)
            else:
                self._from_dep(a, b, c, k)
                self._from_dep(b, a, c, k)

    # --- rules -----------------------------------------------------------

    def _from_indep(self, x, r, c, k):
        free = self.full & ~(x | r | c)
        emit, get = self.emit, self.get
        prem = ((k, _I),)
        for y in _proper_submasks(r):
            emit(x, y, c, _I, Rule.DECOMPOSITION, prem)
            emit(x, y, c | (r & ~y), _I, Rule.WEAK_UNION, prem)
        for w in _submasks(free):
            # Contraction: I(X,R|C) & I(X,W|C+R) -> I(X,R+W|C)
            if get(x, w, c | r) == _I:
                emit(x, r | w, c, _I, Rule.CONTRACTION, prem + ((_key(x, w, c | r), _I),))
            # contrapositive: I(X,R|C) & D(X,R+W|C) -> D(X,W|C+R)
            if get(x, r | w, c) == _D:
                emit(x, w, c | r, _D, Rule.CONTRACTION_CONTRA, prem + ((_key(x, r | w, c), _D),))
        for y in _submasks(c):
            z = c & ~y
            # Contraction with this triple as second premise: I(X,Y|Z) & I(X,R|Z+Y) -> I(X,Y+R|Z)
            if get(x, y, z) == _I:
                emit(x, y | r, z, _I, Rule.CONTRACTION, ((_key(x, y, z), _I),) + prem)
            # contrapositive: I(X,R|Z+Y) & D(X,Y+R|Z) -> D(X,Y|Z)
            if get(x, y | r, z) == _D:
                emit(x, y, z, _D, Rule.CONTRACTION_CONTRA, prem + ((_key(x, y | r, z), _D),))
            if self.use_intersection:
                # Intersection: I(X,R|Z+Y) & I(X,Y|Z+R) -> I(X,R+Y|Z)
                if get(x, y, z | r) == _I:
                    emit(x, r | y, z, _I, Rule.INTERSECTION, prem + ((_key(x, y, z | r), _I),))
                # contrapositive: I(X,R|Z+Y) & D(X,R+Y|Z) -> D(X,Y|Z+R)
                if get(x, r | y, z) == _D:
                    emit(x, y, z | r, _D, Rule.INTERSECTION_CONTRA, prem + ((_key(x, r | y, z), _D),))

    def _from_dep(self, x, r, c, k):
        free = self.full & ~(x | r | c)
        emit, get = self.emit, self.get
        prem = ((k, _D),)
        for w in _submasks(free):
            emit(x, r | w, c, _D, Rule.DECOMPOSITION_CONTRA, prem)
        for w in _submasks(c):
            emit(x, r | w, c & ~w, _D, Rule.WEAK_UNION_CONTRA, prem)
        for y in _proper_submasks(r):
            w = r & ~y
            # I(X,Y|C) & D(X,Y+W|C) -> D(X,W|C+Y)
            if get(x, y, c) == _I:
                emit(x, w, c | y, _D, Rule.CONTRACTION_CONTRA, ((_key(x, y, c), _I),) + prem)
            # I(X,W|C+Y) & D(X,Y+W|C) -> D(X,Y|C)
            if get(x, w, c | y) == _I:
                emit(x, y, c, _D, Rule.CONTRACTION_CONTRA, ((_key(x, w, c | y), _I),) + prem)
            if self.use_intersection:
                # I(X,Y|C+W) & D(X,Y+W|C) -> D(X,W|C+Y)
                if get(x, y, c | w) == _I:
                    emit(x, w, c | y, _D, Rule.INTERSECTION_CONTRA, ((_key(x, y, c | w), _I),) + prem)

    # --- refutation ------------------------------------------------------

    def refute_unknowns(self, candidates: Iterable[tuple]):
        """Mark D every candidate whose assumed independence clashes.

        Independence rules are Horn clauses, so assuming I(t) and chaining
        forward reaches a known dependence exactly when D(t) is entailed.
        """
        indep = {k for k, v in self.status.items() if v == _I}
        deps = {k for k, v in self.status.items() if v == _D}
        found = []
        for k in candidates:
            if k in self.status:
                continue
            hit = _forward_hits(self.full, indep, deps, k, self.use_intersection)
            if hit is not None:
                found.append((k, hit))
        for k, hit in found:
            if k not in self.status:
                self.status[k] = _D
                self.trace[k] = (Rule.REFUTATION, ((hit, _D),), _D)


def _forward_hits(full, base_indep, deps, start, use_intersection):
    """Chain independences from ``base_indep + {start}``; return a clashing key or None."""
    extra = {start}
    queue = deque([start])

    def has(k):
        return k in base_indep or k in extra

    def add(a, b, z):
        k = _key(a, b, z)
        if k in deps:
            return k
        if not has(k):
            extra.add(k)
            queue.append(k)
        return None

    while queue:
        a0, b0, c = queue.popleft()
        for x, r in ((a0, b0), (b0, a0)):
            free = full & ~(x | r | c)
            for y in _proper_submasks(r):
                hit = add(x, y, c) or add(x, y, c | (r & ~y))
                if hit:
                    return hit
            for w in _submasks(free):
                if has(_key(x, w, c | r)):
                    hit = add(x, r | w, c)
                    if hit:
                        return hit
            for y in _submasks(c):
                z = c & ~y
                if has(_key(x, y, z)):
                    hit = add(x, y | r, z)
                    if hit:
                        return hit
                if use_intersection and has(_key(x, y, z | r)):
                    hit = add(x, r | y, z)
                    if hit:
                        return hit
    return None


def _to_mask_triple(u: VariableUniverse, t: CiTriple) -> tuple[int, int, int]:
    return _key(u.mask(t.x), u.mask(t.y), u.mask(t.z))


def _from_key(u: VariableUniverse, k: tuple[int, int, int]) -> CiTriple:
    a, b, z = k
    return CiTriple(u.names_of(a), u.names_of(b), u.names_of(z))


def _status(v: int) -> Status:
    return Status.INDEPENDENT if v == _I else Status.DEPENDENT


def closure(
    statements: Iterable[CiStatement],
    use_intersection: bool = True,
    universe: VariableUniverse | None = None,
    complete: bool = False,
) -> ClosureResult:
    """Least fixed point of the ground Graphoid rules over all set-valued triples.

    With ``complete=True`` every triple left undetermined is additionally
    tested by refutation (assume independence, chain forward, look for a
    clash), which decides Graphoid-entailment of dependences exactly.
    """
    statements = list(statements)
    u = universe or universe_of(statements)
    eng = _Engine(u, use_intersection)
    inputs = set()
    for st in statements:
        a, b, z = _to_mask_triple(u, st.triple)
        inputs.add((a, b, z))
        eng.emit(a, b, z, _I if st.independent else _D, Rule.INPUT, ())
    eng.run()
    if complete and eng.clash is None:
        eng.refute_unknowns(_all_keys(eng.full))
        # refuted dependences can feed the contrapositive rules again
        eng.queue.extend(k for k, t in eng.trace.items() if t[0] is Rule.REFUTATION)
        eng.run()
    return _result(u, eng, frozenset(inputs))


def _all_keys(full: int):
    n = full.bit_length()
    for assign in range(4**n):
        a = b = z = 0
        code = assign
        for i in range(n):
            d = code & 3
            code >>= 2
            if d == 1:
                a |= 1 << i
            elif d == 2:
                b |= 1 << i
            elif d == 3:
                z |= 1 << i
        if a and b and a < b:
            yield (a, b, z)


def _result(u: VariableUniverse, eng: _Engine, inputs: frozenset) -> ClosureResult:
    cache: dict = {}

    def T(k):
        t = cache.get(k)
        if t is None:
            t = cache[k] = _from_key(u, k)
        return t

    def rule(tr, k):
        rid, prem, v = tr
        return AxiomRule(rid, tuple((T(pk), _status(pv)) for pk, pv in prem), (T(k), _status(v)))

    status = {T(k): _status(v) for k, v in eng.status.items()}
    traces = {T(k): rule(tr, k) for k, tr in eng.trace.items()}
    contradiction = None
    ctraces = None
    if eng.clash is not None:
        k, ti, td = eng.clash
        contradiction = T(k)
        ctraces = (rule(ti, k), rule(td, k))
    return ClosureResult(u, IndependenceModel(u, status), contradiction, traces, ctraces, inputs)


def is_graphoid_redundant(
    statements: Iterable[CiStatement],
    s: CiStatement,
    use_intersection: bool = True,
    universe: VariableUniverse | None = None,
    complete: bool = False,
    _closure: ClosureResult | None = None,
) -> GraphoidVerdict:
    statements = list(statements)
    res = _closure or closure(statements, use_intersection, universe or universe_of(statements, s.triple.variables), complete)
    got = res.status(s.triple)
    if got is Status.UNKNOWN:
        return GraphoidVerdict.UNDETERMINED
    return GraphoidVerdict.MATCHING if got is s.verdict else GraphoidVerdict.CONTRADICTING


@dataclass(frozen=True)
class Consistency:
    ok: bool
    triple: CiTriple | None = None
    derivations: tuple[dict, dict] | None = None

    def __bool__(self) -> bool:
        return self.ok


def check_consistency(
    statements: Iterable[CiStatement], use_intersection: bool = True, universe: VariableUniverse | None = None
) -> Consistency:
    res = closure(statements, use_intersection, universe)
    if res.contradiction is None:
        return Consistency(True)
    t = res.contradiction
    return Consistency(
        False,
        t,
        (res.derivation(t, Status.INDEPENDENT), res.derivation(t, Status.DEPENDENT)),
    )
