"""DAGs and undirected graphs, (d-)separation, coupling predicates, enumeration."""

from __future__ import annotations

import enum
import functools
import heapq
import itertools
import json
from collections import deque
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .cimodel import CiTriple, IndependenceModel, Status, VariableUniverse
from .exceptions import CapExceededError, CycleError, EdgeAbsentError, OverlapError, UnknownVariableError

PATH_CAP = 12


def _universe(nodes) -> VariableUniverse:
    if isinstance(nodes, VariableUniverse):
        return nodes
    return VariableUniverse(tuple(nodes))


class _BaseGraph:
    directed: bool = False

    universe: VariableUniverse
    edges: frozenset

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.universe.names

    def __len__(self) -> int:
        return len(self.edges)

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self.universe.names == other.universe.names and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.universe.names, self.edges))

    def _check_nodes(self, names: Iterable[str]) -> None:
        for n in names:
            if n not in self.universe:
                raise UnknownVariableError(n)

    def neighbours(self, v: str) -> frozenset[str]:
        return self._adj[v]

    def to_json(self) -> str:
        return json.dumps(
            {"nodes": list(self.nodes), "edges": [list(e) for e in self.sorted_edges()], "directed": self.directed}
        )

    def sorted_edges(self) -> list[tuple[str, str]]:
        idx = self.universe.index
        return sorted(self.edges, key=lambda e: (idx[e[0]], idx[e[1]]))


class UndirectedGraph(_BaseGraph):
    """Undirected graph; edges are stored as pairs in universe order."""

    directed = False

    def __init__(self, nodes, edges: Iterable[Sequence[str]] = ()):
        self.universe = _universe(nodes)
        idx = self.universe.index
        es = set()
        for a, b in edges:
            self._check_nodes((a, b))
            if a == b:
                raise ValueError(f"self-loop on {a}")
            es.add((a, b) if idx[a] < idx[b] else (b, a))
        self.edges = frozenset(es)
        adj = {v: set() for v in self.nodes}
        for a, b in es:
            adj[a].add(b)
            adj[b].add(a)
        self._adj = {v: frozenset(s) for v, s in adj.items()}

    def __repr__(self) -> str:
        return f"UndirectedGraph({'; '.join(f'{a}-{b}' for a, b in self.sorted_edges())})"

    def has_edge(self, a: str, b: str) -> bool:
        return b in self._adj[a]

    def adjacency_matrix(self) -> np.ndarray:
        n = len(self.nodes)
        m = np.zeros((n, n), dtype=bool)
        idx = self.universe.index
        for a, b in self.edges:
            m[idx[a], idx[b]] = m[idx[b], idx[a]] = True
        return m


class Dag(_BaseGraph):
    """Directed acyclic graph; acyclicity is checked at construction."""

    directed = True

    def __init__(self, nodes, edges: Iterable[Sequence[str]] = ()):
        self.universe = _universe(nodes)
        es = set()
        for a, b in edges:
            self._check_nodes((a, b))
            if a == b:
                raise ValueError(f"self-loop on {a}")
            es.add((a, b))
        self.edges = frozenset(es)
        pa = {v: set() for v in self.nodes}
        ch = {v: set() for v in self.nodes}
        for a, b in es:
            pa[b].add(a)
            ch[a].add(b)
        self._parents = {v: frozenset(s) for v, s in pa.items()}
        self._children = {v: frozenset(s) for v, s in ch.items()}
        self._adj = {v: self._parents[v] | self._children[v] for v in self.nodes}
        self._order = self._toposort()
        self._desc = None

    def _toposort(self) -> tuple[str, ...]:
        indeg = {v: len(self._parents[v]) for v in self.nodes}
        idx = self.universe.index
        heap = [(idx[v], v) for v, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        out = []
        while heap:
            _, v = heapq.heappop(heap)
            out.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, (idx[c], c))
        if len(out) != len(self.nodes):
            raise CycleError("edges contain a directed cycle")
        return tuple(out)

    def __repr__(self) -> str:
        return f"Dag({'; '.join(f'{a}->{b}' for a, b in self.sorted_edges())})"

    def parents(self, v: str) -> frozenset[str]:
        return self._parents[v]

    def children(self, v: str) -> frozenset[str]:
        return self._children[v]

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self.edges

    def adjacent(self, a: str, b: str) -> bool:
        return b in self._adj[a]

    def descendants(self, v: str) -> frozenset[str]:
        """Strict descendants of ``v``."""
        if self._desc is None:
            desc = {}
            for u in reversed(self._order):
                s = set()
                for c in self._children[u]:
                    s.add(c)
                    s |= desc[c]
                desc[u] = frozenset(s)
            self._desc = desc
        return self._desc[v]

    def ancestors_of(self, vs: Iterable[str]) -> set[str]:
        """``vs`` together with all their ancestors."""
        out = set(vs)
        stack = list(out)
        while stack:
            v = stack.pop()
            for p in self._parents[v]:
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    def adjacency_matrix(self) -> np.ndarray:
        n = len(self.nodes)
        m = np.zeros((n, n), dtype=bool)
        idx = self.universe.index
        for a, b in self.edges:
            m[idx[a], idx[b]] = True
        return m


Graph = UndirectedGraph | Dag


def graph_from_json(text: str) -> Graph:
    data = json.loads(text)
    cls = Dag if data.get("directed", False) else UndirectedGraph
    return cls(data["nodes"], [tuple(e) for e in data.get("edges", ())])


def load_graph(path) -> Graph:
    return graph_from_json(Path(path).read_text())


def save_graph(path, g: Graph) -> None:
    Path(path).write_text(g.to_json())


# --- utilities ------------------------------------------------------------


def skeleton(g: Graph) -> UndirectedGraph:
    return UndirectedGraph(g.universe, g.edges)


def topological_order(g: Dag) -> tuple[str, ...]:
    return g._order


def is_connected(g: Graph) -> bool:
    if not g.nodes:
        return True
    seen = {g.nodes[0]}
    stack = [g.nodes[0]]
    while stack:
        v = stack.pop()
        for w in g.neighbours(v):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(g.nodes)


def is_spanning_tree(g: UndirectedGraph) -> bool:
    return len(g.edges) == len(g.nodes) - 1 and is_connected(g)


def remove_edge(g: Graph, edge: Sequence[str]) -> Graph:
    a, b = edge
    if isinstance(g, Dag):
        if (a, b) not in g.edges:
            raise EdgeAbsentError(f"{a}->{b}")
        return Dag(g.universe, g.edges - {(a, b)})
    if not g.has_edge(a, b):
        raise EdgeAbsentError(f"{a}-{b}")
    key = (a, b) if g.universe.index[a] < g.universe.index[b] else (b, a)
    return UndirectedGraph(g.universe, g.edges - {key})


def add_edge(g: Graph, edge: Sequence[str]) -> Graph:
    return type(g)(g.universe, set(g.edges) | {tuple(edge)})


def complete_dag(universe) -> Dag:
    u = _universe(universe)
    return Dag(u, itertools.combinations(u.names, 2))


def orient_tree(tree: UndirectedGraph, root: str) -> Dag:
    """Orient every edge of a tree away from ``root`` (depth-first)."""
    edges = []
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        for w in sorted(tree.neighbours(v), key=tree.universe.index.__getitem__, reverse=True):
            if w not in seen:
                seen.add(w)
                edges.append((v, w))
                stack.append(w)
    return Dag(tree.universe, edges)


def v_structures(g: Dag) -> frozenset[tuple[str, str, str]]:
    """Unshielded colliders ``(a, c, b)`` with a -> c <- b, a < b."""
    idx = g.universe.index
    out = set()
    for c in g.nodes:
        for a, b in itertools.combinations(sorted(g.parents(c), key=idx.__getitem__), 2):
            if not g.adjacent(a, b):
                out.add((a, c, b))
    return frozenset(out)


def shd(a: Graph, b: Graph) -> int:
    """Structural Hamming distance.

    For two undirected graphs this counts differing adjacencies; for DAGs a
    reversed edge counts once.
    """
    if isinstance(a, Dag) and isinstance(b, Dag):
        d = 0
        sa, sb = skeleton(a).edges, skeleton(b).edges
        d += len(sa ^ sb)
        for e in a.edges:
            if (e[1], e[0]) in b.edges:
                d += 1
        return d
    return len(skeleton(a).edges ^ skeleton(b).edges)


# --- separation -------------------------------------------------------------


def _sets(g: Graph, x, y, z) -> tuple[frozenset, frozenset, frozenset]:
    from .cimodel import _as_set

    x, y, z = _as_set(x), _as_set(y), _as_set(z)
    if x & y or x & z or y & z:
        raise OverlapError(f"sets must be disjoint: {sorted(x)}, {sorted(y)}, {sorted(z)}")
    if not x or not y:
        raise ValueError("x and y must be non-empty")
    g._check_nodes(x | y | z)
    return x, y, z


def separated(g: UndirectedGraph, x, y, z=()) -> bool:
    """True iff every path from x to y passes through z."""
    x, y, z = _sets(g, x, y, z)
    return not (_reach_undirected(g, x, z) & y)


def _reach_undirected(g: UndirectedGraph, start: Iterable[str], z) -> set[str]:
    seen = set(start)
    stack = list(seen)
    while stack:
        v = stack.pop()
        for w in g.neighbours(v):
            if w not in seen and w not in z:
                seen.add(w)
                stack.append(w)
    return seen


def d_separated(g: Dag, x, y, z=()) -> bool:
    """d-separation by Bayes-ball reachability."""
    x, y, z = _sets(g, x, y, z)
    return not (_d_reachable(g, x, z) & y)


def _d_reachable(g: Dag, x: Iterable[str], z: frozenset[str]) -> set[str]:
    # nodes that are z or have a descendant in z open colliders
    opens = g.ancestors_of(z)
    visited = set()
    reachable = set()
    # direction: "up" = arrived from a child, "down" = arrived from a parent
    queue = deque((v, "up") for v in x)
    while queue:
        v, d = queue.popleft()
        if (v, d) in visited:
            continue
        visited.add((v, d))
        if v not in z:
            reachable.add(v)
        if d == "up" and v not in z:
            for p in g.parents(v):
                queue.append((p, "up"))
            for c in g.children(v):
                queue.append((c, "down"))
        elif d == "down":
            if v not in z:
                for c in g.children(v):
                    queue.append((c, "down"))
            if v in opens:
                for p in g.parents(v):
                    queue.append((p, "up"))
    return reachable


def d_separated_moral(g: Dag, x, y, z=()) -> bool:
    """d-separation via separation in the moralised ancestral graph.

    Independent of :func:`d_separated`; used as a cross-check.
    """
    x, y, z = _sets(g, x, y, z)
    anc = g.ancestors_of(x | y | z)
    edges = set()
    for v in anc:
        pa = [p for p in g.parents(v)]
        for p in pa:
            edges.add((p, v))
        for a, b in itertools.combinations(pa, 2):
            edges.add((a, b))
    sub = UndirectedGraph(g.universe, edges)
    return separated(sub, x, y, z)


def is_separated(g: Graph, x, y, z=()) -> bool:
    if isinstance(g, Dag):
        return d_separated(g, x, y, z)
    return separated(g, x, y, z)


def implied_status(g: Graph, triple: CiTriple) -> Status:
    return Status.from_bool(is_separated(g, triple.x, triple.y, triple.z))


def implied_model(g: Graph, triples: Iterable[CiTriple]) -> IndependenceModel:
    return IndependenceModel(g.universe, {t: implied_status(g, t) for t in triples})


def is_markovian_to(g: Graph, statements) -> bool:
    """True iff no separation of ``g`` contradicts a dependence in ``statements``."""
    return all(st.independent or not is_separated(g, st.triple.x, st.triple.y, st.triple.z) for st in statements)


# --- path predicates ----------------------------------------------------------


def _descendant_sets(g: Graph) -> dict[str, frozenset[str]] | None:
    if isinstance(g, Dag):
        return {v: g.descendants(v) for v in g.nodes}
    return None


def _node_active(g: Graph, prev: str, v: str, nxt: str, cond: frozenset, desc) -> bool:
    if desc is None:
        return v not in cond
    collider = (prev, v) in g.edges and (nxt, v) in g.edges
    if collider:
        return v in cond or bool(desc[v] & cond)
    return v not in cond


def path_active(g: Graph, path: Sequence[str], cond: Iterable[str], _desc=None) -> bool:
    """Whether the node sequence ``path`` is active given ``cond``."""
    cond = frozenset(cond)
    desc = _descendant_sets(g) if _desc is None else _desc
    for i in range(1, len(path) - 1):
        if not _node_active(g, path[i - 1], path[i], path[i + 1], cond, desc):
            return False
    return True


def active_paths(g: Graph, a_set, b_set, cond, cap: int = PATH_CAP) -> Iterator[tuple[str, ...]]:
    """Simple paths from a node of ``a_set`` to one of ``b_set`` active given ``cond``.

    Interior nodes avoid ``a_set`` and ``b_set``. Partial paths that are
    already blocked are pruned.
    """
    a_set, b_set, cond = frozenset(a_set), frozenset(b_set), frozenset(cond)
    if len(g.nodes) > cap:
        raise CapExceededError(f"path enumeration is capped at {cap} nodes")
    desc = _descendant_sets(g)
    ends = a_set | b_set

    def extend(path):
        v = path[-1]
        for w in g.neighbours(v):
            if w in path:
                continue
            if len(path) >= 2 and not _node_active(g, path[-2], v, w, cond, desc):
                continue
            if w in b_set:
                yield path + (w,)
            elif w not in ends and not (desc is None and w in cond):
                yield from extend(path + (w,))

    for a in sorted(a_set):
        yield from extend((a,))


def _has_active_xy_segment(g: Graph, path: Sequence[str], xs, ys, zs, desc) -> bool:
    pos_x = [i for i, v in enumerate(path) if v in xs]
    pos_y = [i for i, v in enumerate(path) if v in ys]
    for i in pos_x:
        for j in pos_y:
            lo, hi = (i, j) if i < j else (j, i)
            if path_active(g, path[lo : hi + 1], zs, desc):
                return True
    return False


def s_active_path_exists(g: Graph, a, b, c, s: CiTriple) -> bool:
    """Is some a..b path active given c without an active X..Y segment given Z?"""
    return _s_active_exists(g, {a}, {b}, frozenset(c), set(s.x), set(s.y), frozenset(s.z))


def _s_active_exists(g: Graph, a_set, b_set, c, xs, ys, zs, cap: int = PATH_CAP) -> bool:
    desc = _descendant_sets(g)
    for p in active_paths(g, a_set, b_set, c, cap):
        if not _has_active_xy_segment(g, p, xs, ys, zs, desc):
            return True
    return False


def coupled_over(g: Graph, a, b, c, s: CiTriple) -> bool:
    """a and b are connected given c, but only through active X..Y segments."""
    return _coupled_over_sets(g, {a}, {b}, frozenset(c), set(s.x), set(s.y), frozenset(s.z))


def _coupled_over_sets(g: Graph, a_set, b_set, c, xs, ys, zs, cap: int = PATH_CAP) -> bool:
    desc = _descendant_sets(g)
    any_active = False
    for p in active_paths(g, a_set, b_set, c, cap):
        any_active = True
        if not _has_active_xy_segment(g, p, xs, ys, zs, desc):
            return False
    return any_active


def coupled(g: Graph, x, y, z=()) -> bool:
    """Coupling of x and y given z (edge-based graphical criterion).

    Undirected: an edge u-v with u in x, v in y (or the reverse) and
    Adj(u) inside x|y|z. DAG: an edge u->v between the sides with
    PA(v) inside x|y|z, and some Q with z <= Q <= (x|y|z) - {u, v} that
    d-separates u and v once the edge u->v is removed.
    """
    from .cimodel import _as_set

    x, y, z = _as_set(x), _as_set(y), _as_set(z)
    allv = x | y | z
    pairs = [(u, v) for u in x for v in y] + [(v, u) for u in x for v in y]
    if isinstance(g, UndirectedGraph):
        return any(g.has_edge(u, v) and g.neighbours(u) <= allv for u, v in pairs)
    for u, v in pairs:
        if (u, v) not in g.edges or not g.parents(v) <= allv:
            continue
        h = Dag(g.universe, g.edges - {(u, v)})
        free = sorted(allv - z - {u, v})
        for k in range(len(free) + 1):
            for extra in itertools.combinations(free, k):
                if d_separated(h, {u}, {v}, z | set(extra)):
                    return True
    return False


# --- enumeration ------------------------------------------------------------


class GraphClass(enum.Enum):
    DAGS = "dags"
    UNDIRECTED = "undirected"
    SPANNING_TREES = "trees"


ENUMERATION_CAPS = {GraphClass.DAGS: 5, GraphClass.UNDIRECTED: 6, GraphClass.SPANNING_TREES: 9}


def _check_cap(n: int, kind: GraphClass) -> None:
    if n > ENUMERATION_CAPS[kind]:
        raise CapExceededError(f"enumerating {kind.value} is capped at {ENUMERATION_CAPS[kind]} nodes, got {n}")


@functools.lru_cache(maxsize=None)
def _dag_edge_lists(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    pairs = list(itertools.combinations(range(n), 2))
    out = []
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        parents = [0] * n
        edges = []
        for (i, j), c in zip(pairs, choice):
            if c == 1:
                parents[j] |= 1 << i
                edges.append((i, j))
            elif c == 2:
                parents[i] |= 1 << j
                edges.append((j, i))
        # acyclic iff nodes can be peeled off as sources one at a time
        placed = 0
        progress = True
        while progress and placed != (1 << n) - 1:
            progress = False
            for v in range(n):
                if not placed >> v & 1 and parents[v] & ~placed == 0:
                    placed |= 1 << v
                    progress = True
        if placed == (1 << n) - 1:
            out.append(tuple(edges))
    return tuple(out)


def prufer_decode(seq: Sequence[int], n: int) -> list[tuple[int, int]]:
    """Edges of the labelled tree on range(n) encoded by a Prüfer sequence."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    a, b = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((a, b))
    return edges


def _tree_edge_lists(n: int) -> Iterator[list[tuple[int, int]]]:
    if n == 1:
        yield []
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        yield prufer_decode(seq, n)


def enumerate_graphs(universe, kind: GraphClass) -> Iterator[Graph]:
    """Yield every graph of ``kind`` over ``universe`` exactly once."""
    u = _universe(universe) if not isinstance(universe, int) else VariableUniverse.of_size(universe)
    n = len(u)
    kind = GraphClass(kind)
    _check_cap(n, kind)
    names = u.names
    if kind is GraphClass.DAGS:
        for edges in _dag_edge_lists(n):
            yield Dag(u, [(names[i], names[j]) for i, j in edges])
    elif kind is GraphClass.UNDIRECTED:
        pairs = list(itertools.combinations(names, 2))
        for mask in range(1 << len(pairs)):
            yield UndirectedGraph(u, [p for k, p in enumerate(pairs) if mask >> k & 1])
    else:
        for edges in _tree_edge_lists(n):
            yield UndirectedGraph(u, [(names[i], names[j]) for i, j in edges])


def count_graphs(n: int, kind: GraphClass) -> int:
    kind = GraphClass(kind)
    _check_cap(n, kind)
    if kind is GraphClass.DAGS:
        return len(_dag_edge_lists(n)) if n > 0 else 1
    if kind is GraphClass.UNDIRECTED:
        return 2 ** (n * (n - 1) // 2)
    return sum(1 for _ in _tree_edge_lists(n)) if n > 0 else 1


# --- vectorised separation tables ---------------------------------------------


def adjacency_tensor(universe, kind: GraphClass) -> np.ndarray:
    """Stack of adjacency matrices (graphs x n x n) for a whole graph class."""
    return _adjacency_tensor(len(universe), GraphClass(kind))


@functools.lru_cache(maxsize=None)
def _adjacency_tensor(n: int, kind: GraphClass) -> np.ndarray:
    _check_cap(n, kind)
    if kind is GraphClass.DAGS:
        lists = _dag_edge_lists(n)
        directed = True
    elif kind is GraphClass.UNDIRECTED:
        pairs = list(itertools.combinations(range(n), 2))
        lists = [[p for k, p in enumerate(pairs) if m >> k & 1] for m in range(1 << len(pairs))]
        directed = False
    else:
        lists = list(_tree_edge_lists(n))
        directed = False
    out = np.zeros((len(lists), n, n), dtype=bool)
    for g, edges in enumerate(lists):
        for i, j in edges:
            out[g, i, j] = True
            if not directed:
                out[g, j, i] = True
    out.setflags(write=False)
    return out


def graphs_from_tensor(universe, adj: np.ndarray, directed: bool) -> list[Graph]:
    u = _universe(universe)
    names = u.names
    out = []
    for a in adj:
        ii, jj = np.nonzero(a)
        if directed:
            out.append(Dag(u, [(names[i], names[j]) for i, j in zip(ii, jj)]))
        else:
            out.append(UndirectedGraph(u, [(names[i], names[j]) for i, j in zip(ii, jj) if i < j]))
    return out


def _reach(sym: np.ndarray, start: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Batch reachability. sym: (B,n,n) bool, start/allowed: (B,n) bool."""
    reach = start.copy()
    n = sym.shape[-1]
    for _ in range(n):
        nxt = reach | (np.einsum("bi,bij->bj", reach.astype(np.uint8), sym.astype(np.uint8)) > 0) & allowed
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    return reach


def separation_table(adj: np.ndarray, directed: bool, triples: Sequence[CiTriple], universe) -> np.ndarray:
    """(graphs x triples) boolean table, True where the triple is separated.

    DAGs are handled by moralising the ancestral set of each triple.
    """
    u = _universe(universe)
    idx = u.index
    B, n, _ = adj.shape
    out = np.zeros((B, len(triples)), dtype=bool)
    if directed:
        # ancestors: anc[b, i, j] = i is an ancestor of j (or i == j)
        anc = adj.copy() | np.eye(n, dtype=bool)[None]
        for _ in range(n):
            nxt = (np.einsum("bij,bjk->bik", anc.astype(np.uint8), anc.astype(np.uint8)) > 0)
            if np.array_equal(nxt, anc):
                break
            anc = nxt
        sym = adj | adj.transpose(0, 2, 1)
    else:
        sym = adj
    for k, t in enumerate(triples):
        xs = np.zeros(n, dtype=bool)
        ys = np.zeros(n, dtype=bool)
        zs = np.zeros(n, dtype=bool)
        xs[[idx[v] for v in t.x]] = True
        ys[[idx[v] for v in t.y]] = True
        if t.z:
            zs[[idx[v] for v in t.z]] = True
        if directed:
            keep = anc[:, :, xs | ys | zs].any(axis=2)  # (B, n) ancestral set
            a = adj & keep[:, :, None] & keep[:, None, :]
            au = a.astype(np.uint8)
            married = np.einsum("bik,bjk->bij", au, au) > 0
            g = (a | a.transpose(0, 2, 1) | married) & ~np.eye(n, dtype=bool)[None]
            allowed = keep & ~zs[None]
        else:
            g = sym
            allowed = np.broadcast_to(~zs[None], (B, n))
        start = np.broadcast_to(xs[None], (B, n))
        r = _reach(g, start, allowed)
        out[:, k] = ~(r[:, ys].any(axis=1))
    return out


_COLUMNS: dict[tuple[int, GraphClass], dict[CiTriple, np.ndarray]] = {}


def _cached_columns(n: int, kind: GraphClass, triples: tuple) -> np.ndarray:
    cols = _COLUMNS.setdefault((n, kind), {})
    missing = list(dict.fromkeys(t for t in triples if t not in cols))
    if missing:
        adj = _adjacency_tensor(n, kind)
        tab = separation_table(adj, kind is GraphClass.DAGS, missing, VariableUniverse.of_size(n))
        for k, t in enumerate(missing):
            col = tab[:, k].copy()
            col.setflags(write=False)
            cols[t] = col
    if not triples:
        return np.zeros((len(_adjacency_tensor(n, kind)), 0), dtype=bool)
    return np.stack([cols[t] for t in triples], axis=1)


def class_table(universe, kind: GraphClass, triples: Sequence[CiTriple]) -> np.ndarray:
    """Separation table of every graph in ``kind`` for ``triples``.

    Columns are cached per triple, keyed by variable position, so repeated
    queries over the same universe size only pay for new triples.
    """
    u = _universe(universe)
    kind = GraphClass(kind)
    pos = {name: f"X{i + 1}" for i, name in enumerate(u.names)}
    renamed = tuple(
        CiTriple.of([pos[v] for v in t.x], [pos[v] for v in t.y], [pos[v] for v in t.z]) for t in triples
    )
    return _cached_columns(len(u), kind, renamed)
