"""Synthetic ground truths and samplers.

All randomness flows through :func:`make_rng`, which derives independent
PCG64 streams from a master seed plus an integer key path, so a trial's data
depends only on ``(seed, trial index)`` and not on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from .cimodel import VariableUniverse
from .citest import Dataset
from .exceptions import PreconditionError, TableShapeError
from .graphs import Dag, UndirectedGraph, orient_tree, topological_order


def make_rng(seed: int | None = 0, *keys: int) -> np.random.Generator:
    """Generator for stream ``keys`` under master ``seed``; equal arguments give equal streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(keys))))


def _names(n: int) -> VariableUniverse:
    if n < 1:
        raise PreconditionError("need at least one variable")
    return VariableUniverse.of_size(n)


def random_spanning_tree(n: int, rng: np.random.Generator, universe: VariableUniverse | None = None) -> UndirectedGraph:
    """Maximum-weight spanning tree of a complete graph with U[0, 1) weights."""
    u = universe or _names(n)
    if n < 2:
        raise PreconditionError("a spanning tree needs n >= 2")
    w = rng.random((n, n))
    # shift so every weight is strictly positive: zero entries mean "no edge" to scipy
    cost = np.triu(2.0 - w, k=1)
    mst = minimum_spanning_tree(cost).tocoo()
    names = u.names
    return UndirectedGraph(u, [(names[i], names[j]) for i, j in zip(mst.row, mst.col)])


def random_oriented_tree(n: int, rng: np.random.Generator, universe: VariableUniverse | None = None) -> Dag:
    tree = random_spanning_tree(n, rng, universe)
    root = tree.nodes[int(rng.integers(n))]
    return orient_tree(tree, root)


def er_dag(n: int, p: float, rng: np.random.Generator, universe: VariableUniverse | None = None) -> Dag:
    """Each forward edge along the fixed variable order is present with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("edge probability must lie in [0, 1]")
    u = universe or _names(n)
    names = u.names
    keep = rng.random((n, n)) < p
    return Dag(u, [(names[i], names[j]) for i in range(n) for j in range(i + 1, n) if keep[i, j]])


def draw_coefficients(k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` draws uniform on (-1, -0.1] and [0.1, 1)."""
    mag = rng.uniform(0.1, 1.0, size=k)
    sign = np.where(rng.random(k) < 0.5, -1.0, 1.0)
    return sign * mag


@dataclass(frozen=True)
class LinearGaussianScm:
    """Linear structural model with unit-variance Gaussian noise."""

    dag: Dag
    coefficients: Mapping[tuple[str, str], float]

    def __post_init__(self):
        if set(self.coefficients) != set(self.dag.edges):
            raise PreconditionError("coefficients must be given for exactly the DAG's edges")

    def weight_matrix(self) -> np.ndarray:
        """B with B[i, j] the coefficient of variable i in the equation of j."""
        idx = self.dag.universe.index
        n = len(self.dag.nodes)
        b = np.zeros((n, n))
        for (a, c), v in self.coefficients.items():
            b[idx[a], idx[c]] = v
        return b


def linear_gaussian(dag: Dag, rng: np.random.Generator) -> LinearGaussianScm:
    edges = dag.sorted_edges()
    return LinearGaussianScm(dag, dict(zip(edges, draw_coefficients(len(edges), rng).tolist())))


def exact_covariance(scm: LinearGaussianScm) -> np.ndarray:
    # X = B^T X + e  =>  X = A e with A = (I - B^T)^{-1}, Cov = A A^T
    b = scm.weight_matrix()
    a = np.linalg.inv(np.eye(len(b)) - b.T)
    return a @ a.T


def sample(scm: LinearGaussianScm, m: int, rng: np.random.Generator) -> Dataset:
    """Ancestral sampling in topological order."""
    b = scm.weight_matrix()
    idx = scm.dag.universe.index
    x = np.zeros((m, len(b)))
    noise = rng.standard_normal((m, len(b)))
    for v in topological_order(scm.dag):
        j = idx[v]
        x[:, j] = x @ b[:, j] + noise[:, j]
    return Dataset.from_array(x, scm.dag.nodes, "continuous")


# --- binary Bayes net -----------------------------------------------------------------


def two_dataset_dag() -> Dag:
    """W -> X, W -> Y, X -> Z <- Y."""
    u = VariableUniverse(("W", "X", "Y", "Z"))
    return Dag(u, [("W", "X"), ("W", "Y"), ("X", "Z"), ("Y", "Z")])


def two_dataset_ug() -> UndirectedGraph:
    """The four-cycle W - X - Z - Y - W."""
    u = VariableUniverse(("W", "X", "Y", "Z"))
    return UndirectedGraph(u, [("W", "X"), ("W", "Y"), ("X", "Z"), ("Y", "Z")])


def two_dataset_tables(rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Conditional tables P(v = 1 | parents) with the complement symmetries of the DAG dataset.

    Parents index the table axes in sorted order. W's own marginal is not
    constrained by the protocol and is drawn from the same interval.
    """
    px, py, z00, z11 = rng.uniform(0.3, 0.7, size=4)
    pw = rng.uniform(0.3, 0.7)
    return {
        "W": np.array(pw),
        "X": np.array([px, 1.0 - px]),
        "Y": np.array([py, 1.0 - py]),
        "Z": np.array([[z00, 1.0 - z00], [1.0 - z11, z11]]),
    }


def binary_bn_sample(
    dag: Dag, rng: np.random.Generator, m: int, tables: Mapping[str, np.ndarray] | None = None
) -> Dataset:
    """Ancestral sampling of binary variables from P(v = 1 | parents) tables."""
    if tables is None:
        if dag != two_dataset_dag():
            raise TableShapeError("tables are required unless the DAG is the four-node two-dataset structure")
        tables = two_dataset_tables(rng)
    idx = dag.universe.index
    x = np.zeros((m, len(dag.nodes)), dtype=np.int64)
    for v in topological_order(dag):
        parents = sorted(dag.parents(v), key=idx.get)
        if v not in tables:
            raise TableShapeError(f"missing table for {v}")
        t = np.asarray(tables[v], dtype=float)
        if t.shape != (2,) * len(parents):
            raise TableShapeError(f"table for {v} has shape {t.shape}, expected {(2,) * len(parents)}")
        if np.any((t < 0) | (t > 1)):
            raise TableShapeError(f"table for {v} holds values outside [0, 1]")
        p = t[tuple(x[:, idx[q]] for q in parents)] if parents else np.full(m, float(t))
        x[:, idx[v]] = rng.random(m) < p
    return Dataset.from_array(x, dag.nodes, "discrete")


# --- pairwise binary factor model ----------------------------------------------------


def random_factors(ug: UndirectedGraph, rng: np.random.Generator) -> dict[tuple[str, str], np.ndarray]:
    """phi(0,0), phi(1,1) ~ U[0.1, 0.3); off-diagonals are their complements."""
    out = {}
    for e in ug.sorted_edges():
        f00, f11 = rng.uniform(0.1, 0.3, size=2)
        out[e] = np.array([[f00, 1.0 - f00], [1.0 - f11, f11]])
    return out


def factor_gibbs_sample(
    ug: UndirectedGraph,
    rng: np.random.Generator,
    m: int,
    burn_in: int = 1000,
    thinning: int = 2,
    factors: Mapping[tuple[str, str], np.ndarray] | None = None,
) -> Dataset:
    """Single-site Gibbs chain on a pairwise binary factor model.

    One sweep updates every variable once in universe order. After
    ``burn_in`` sweeps, every ``thinning``-th sweep is recorded.
    """
    if thinning < 1 or burn_in < 0:
        raise PreconditionError("thinning must be >= 1 and burn_in >= 0")
    factors = random_factors(ug, rng) if factors is None else factors
    idx = ug.universe.index
    n = len(ug.nodes)
    # per-node list of (other node, log table oriented as [own value, other value])
    nbrs: list[list[tuple[int, np.ndarray]]] = [[] for _ in range(n)]
    for (a, b), f in factors.items():
        f = np.asarray(f, dtype=float)
        if f.shape != (2, 2) or np.any(f <= 0):
            raise TableShapeError(f"factor {a}-{b} must be a positive 2x2 table")
        lf = np.log(f)
        nbrs[idx[a]].append((idx[b], lf))
        nbrs[idx[b]].append((idx[a], lf.T))
    state = rng.integers(0, 2, size=n)
    sweeps = burn_in + m * thinning
    u = rng.random((sweeps, n))
    out = np.empty((m, n), dtype=np.int64)
    k = 0
    for s in range(sweeps):
        for v in range(n):
            d = 0.0
            for w, lf in nbrs[v]:
                d += lf[1, state[w]] - lf[0, state[w]]
            state[v] = u[s, v] < 1.0 / (1.0 + np.exp(-d))
        if s >= burn_in and (s - burn_in) % thinning == thinning - 1:
            out[k] = state
            k += 1
    return Dataset.from_array(out, ug.nodes, "discrete")
