"""Sources of CI verdicts: partial correlations, Fisher-Z, stratified chi-square,
graph-backed oracles with injected flips, and a rank-sum comparison test."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .cimodel import CiStatement, CiTriple, IndependenceModel, Status, VariableUniverse
from .exceptions import (
    DegenerateStratumError,
    EmptySampleError,
    SampleSizeError,
    SingularityError,
    TableShapeError,
    UnknownVariableError,
)
from .graphs import Graph, implied_status

DEFAULT_ALPHA = 0.01
_SINGULAR_TOL = 1e-12


# --- partial correlation -------------------------------------------------------


def _as_cov(cov) -> np.ndarray:
    c = np.asarray(cov, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise TableShapeError(f"covariance must be square, got shape {c.shape}")
    return c


def _pc_precision(c: np.ndarray, x: int, y: int, z: Sequence[int]) -> float:
    idx = [x, y, *z]
    try:
        p = np.linalg.inv(c[np.ix_(idx, idx)])
    except np.linalg.LinAlgError as e:
        raise SingularityError("covariance block is singular") from e
    d = p[0, 0] * p[1, 1]
    if not np.isfinite(d) or d <= 0:
        raise SingularityError("covariance block is not positive definite")
    return float(np.clip(-p[0, 1] / math.sqrt(d), -1.0, 1.0))


def _pc_recursive(c: np.ndarray, x: int, y: int, z: Sequence[int]) -> float:
    sd = np.sqrt(np.diag(c))
    if np.any(sd <= 0):
        raise SingularityError("zero variance")
    r = c / np.outer(sd, sd)

    @lru_cache(maxsize=None)
    def rho(a: int, b: int, zs: frozenset) -> float:
        if not zs:
            return float(r[a, b])
        w = min(zs)
        rest = zs - {w}
        rab, raw, rwb = rho(a, b, rest), rho(a, w, rest), rho(w, b, rest)
        den = (1 - raw * raw) * (1 - rwb * rwb)
        if den <= _SINGULAR_TOL:
            raise SingularityError(f"partial correlation of magnitude 1 while conditioning on index {w}")
        return (rab - raw * rwb) / math.sqrt(den)

    return float(np.clip(rho(x, y, frozenset(z)), -1.0, 1.0))


def partial_correlation(cov, x: int, y: int, z: Iterable[int] = (), method: str = "precision") -> float:
    """Partial correlation of columns ``x`` and ``y`` given ``z``.

    ``method`` is ``"precision"`` (inverse of the covariance block) or
    ``"recursive"`` (peel one conditioning variable at a time).
    """
    c = _as_cov(cov)
    z = tuple(int(v) for v in z)
    if x == y or x in z or y in z:
        raise ValueError("x, y and z must be distinct")
    if method == "precision":
        return _pc_precision(c, x, y, z)
    if method == "recursive":
        return _pc_recursive(c, x, y, z)
    raise ValueError(f"unknown method {method!r}")


# --- test results -----------------------------------------------------------------


@dataclass(frozen=True)
class TestResult:
    triple: CiTriple
    statistic: float
    p_value: float
    alpha: float = DEFAULT_ALPHA
    dof: int | None = None

    __test__ = False  # keep pytest from collecting this class

    @property
    def verdict(self) -> Status:
        return Status.INDEPENDENT if self.p_value > self.alpha else Status.DEPENDENT

    @property
    def statement(self) -> CiStatement:
        return CiStatement(self.triple, self.verdict)

    def to_json(self) -> str:
        return json.dumps(
            {"triple": self.triple.to_record(), "stat": self.statistic, "p": self.p_value, "verdict": self.verdict.value}
        )


def fisher_z_from_rho(rho: float, n: int, k: int) -> tuple[float, float]:
    """(statistic, two-sided p) for a partial correlation over ``k`` conditioning variables."""
    if n <= k + 3:
        raise SampleSizeError(f"need more than {k + 3} samples, got {n}")
    rho = min(max(rho, -1.0), 1.0)
    if abs(rho) >= 1.0:
        return math.inf, 0.0
    zval = 0.5 * math.log((1 + rho) / (1 - rho))
    stat = math.sqrt(n - k - 3) * abs(zval)
    return stat, float(min(1.0, 2 * stats.norm.sf(stat)))


def fisher_z(
    cov_or_data, n: int | None, x: int, y: int, z: Iterable[int] = (), alpha: float = DEFAULT_ALPHA, triple=None
) -> TestResult:
    """Fisher-Z test of ``x`` and ``y`` given ``z``.

    ``cov_or_data`` is a covariance matrix (then ``n`` is required) or a
    samples-by-variables data matrix (``n`` defaults to its row count).
    """
    a = np.asarray(cov_or_data, dtype=float)
    z = tuple(z)
    if n is None:
        n = a.shape[0]
        a = np.cov(a, rowvar=False)
    elif a.shape[0] != a.shape[1]:
        a = np.cov(a, rowvar=False)
    rho = partial_correlation(a, x, y, z)
    stat, p = fisher_z_from_rho(rho, n, len(z))
    if triple is None:
        triple = CiTriple.of(f"X{x}", f"X{y}", [f"X{v}" for v in z])
    return TestResult(triple, stat, p, alpha)


def _codes(columns: np.ndarray) -> np.ndarray:
    """Joint category codes of one or more discrete columns."""
    if columns.ndim == 1:
        columns = columns[:, None]
    if columns.shape[1] == 0:
        return np.zeros(columns.shape[0], dtype=np.int64)
    _, inv = np.unique(columns, axis=0, return_inverse=True)
    return inv.reshape(-1)


def chi_square_table(xs: np.ndarray, ys: np.ndarray, zs: np.ndarray) -> tuple[float, int]:
    """Summed contingency chi-square and degrees of freedom over the strata of ``zs``.

    Strata with fewer than two observations are skipped, as are empty
    rows and columns inside a stratum.
    """
    cx, cy, cz = _codes(xs), _codes(ys), _codes(zs)
    stat, dof, used = 0.0, 0, 0
    for s in np.unique(cz):
        m = cz == s
        if m.sum() < 2:
            continue
        _, ix = np.unique(cx[m], return_inverse=True)
        _, iy = np.unique(cy[m], return_inverse=True)
        table = np.zeros((ix.max() + 1, iy.max() + 1))
        np.add.at(table, (ix, iy), 1)
        r, c = table.shape
        if r < 2 or c < 2:
            continue
        used += 1
        expected = np.outer(table.sum(1), table.sum(0)) / table.sum()
        stat += float(((table - expected) ** 2 / expected).sum())
        dof += (r - 1) * (c - 1)
    if used == 0:
        raise DegenerateStratumError("every stratum is degenerate")
    return stat, dof


def chi_square(data, x, y, z=(), alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Stratified chi-square test on a discrete :class:`Dataset`."""
    t = CiTriple.of(x, y, z)
    xs, ys, zs = data.columns_of(t.x), data.columns_of(t.y), data.columns_of(t.z)
    stat, dof = chi_square_table(xs, ys, zs)
    return TestResult(t, stat, float(stats.chi2.sf(stat, dof)), alpha, dof)


# --- rank-sum comparison -----------------------------------------------------


def mann_whitney_u(sample_a, sample_b, alternative: str = "two-sided") -> float:
    """p-value of the Mann-Whitney U test (normal approximation, tie-corrected).

    Returns 1 when all observations tie, since the samples are then
    indistinguishable.
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySampleError("both samples must be non-empty")
    n1, n2 = a.size, b.size
    n = n1 + n2
    ranks = stats.rankdata(np.concatenate([a, b]))
    u1 = ranks[:n1].sum() - n1 * (n1 + 1) / 2
    _, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    ties = float((counts**3 - counts).sum())
    var = n1 * n2 / 12 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0:
        return 1.0
    zval = (u1 - n1 * n2 / 2) / math.sqrt(var)
    if alternative == "two-sided":
        return float(min(1.0, 2 * stats.norm.sf(abs(zval))))
    if alternative == "less":
        return float(stats.norm.cdf(zval))
    if alternative == "greater":
        return float(stats.norm.sf(zval))
    raise ValueError(f"unknown alternative {alternative!r}")


# --- datasets -----------------------------------------------------------------

_MISSING = {"", "na", "nan", "null", "none", "?"}


@dataclass(frozen=True)
class Dataset:
    names: tuple[str, ...]
    values: np.ndarray
    kind: str = "continuous"

    def __post_init__(self):
        if self.kind not in ("continuous", "discrete"):
            raise ValueError(f"kind must be continuous or discrete, got {self.kind!r}")
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[1] != len(self.names):
            raise TableShapeError(f"expected rows x {len(self.names)} values, got shape {v.shape}")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate column names")
        if self.kind == "continuous" and not np.all(np.isfinite(v.astype(float))):
            raise ValueError("missing or non-finite values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    @property
    def universe(self) -> VariableUniverse:
        return VariableUniverse(self.names)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariableError(name) from None

    def columns_of(self, names: Iterable[str]) -> np.ndarray:
        return self.values[:, [self.index_of(v) for v in sorted(names)]]

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None, kind: str = "continuous") -> "Dataset":
        v = np.asarray(values)
        if names is None:
            names = tuple(f"X{i + 1}" for i in range(v.shape[1]))
        if kind == "continuous":
            v = v.astype(float)
        return cls(tuple(names), v, kind)

    @classmethod
    def from_csv(cls, path, kind: str = "continuous") -> "Dataset":
        return cls.from_csv_text(Path(path).read_text(), kind)

    @classmethod
    def from_csv_text(cls, text: str, kind: str = "continuous") -> "Dataset":
        """Parse CSV with a header row; discrete columns are coded 0..k-1 in sorted label order."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise TableShapeError("empty CSV")
        header, body = tuple(h.strip() for h in rows[0]), rows[1:]
        for i, r in enumerate(body, start=2):
            if len(r) != len(header):
                raise TableShapeError(f"line {i}: expected {len(header)} fields, got {len(r)}")
            if any(c.strip().lower() in _MISSING for c in r):
                raise ValueError(f"line {i}: missing value")
        cells = [[c.strip() for c in r] for r in body]
        if kind == "continuous":
            arr = np.array(cells, dtype=float).reshape(len(body), len(header))
        else:
            raw = np.array(cells, dtype=object).reshape(len(body), len(header))
            arr = np.zeros(raw.shape, dtype=np.int64)
            for j in range(raw.shape[1]):
                arr[:, j] = np.unique(raw[:, j].astype(str), return_inverse=True)[1].reshape(-1)
        return cls(header, arr, kind)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.names)
        w.writerows(self.values.tolist())
        return out.getvalue()


# --- oracles ------------------------------------------------------------------


@dataclass(frozen=True)
class LogEntry:
    triple: CiTriple
    verdict: Status
    p_value: float | None = None


class CiOracle:
    """Base class: answers CI queries and records each one in ``log``."""

    universe: VariableUniverse

    def __init__(self):
        self.log: list[LogEntry] = []

    def _answer(self, t: CiTriple) -> tuple[Status, float | None]:
        raise NotImplementedError

    def query(self, triple: CiTriple) -> CiStatement:
        self.universe.check(triple.variables)
        verdict, p = self._answer(triple)
        self.log.append(LogEntry(triple, verdict, p))
        return CiStatement(triple, verdict)

    __call__ = query

    @property
    def statements(self) -> list[CiStatement]:
        return [CiStatement(e.triple, e.verdict) for e in self.log]


class GraphOracle(CiOracle):
    """Verdicts read off a graph, with the triples in ``flips`` inverted."""

    def __init__(self, g: Graph, flips: Iterable[CiTriple] = ()):
        super().__init__()
        self.graph = g
        self.universe = g.universe
        self.flips = frozenset(flips)
        self.universe.check(set().union(*(t.variables for t in self.flips)) if self.flips else ())

    def _answer(self, t):
        v = implied_status(self.graph, t)
        return (v.flip() if t in self.flips else v), None


class CovarianceOracle(CiOracle):
    """Fisher-Z verdicts from a known covariance matrix at a nominal sample size."""

    def __init__(self, cov, n: int, alpha: float = DEFAULT_ALPHA, names: Sequence[str] | None = None):
        super().__init__()
        self.cov = _as_cov(cov)
        self.n = int(n)
        self.alpha = alpha
        names = names or tuple(f"X{i + 1}" for i in range(self.cov.shape[0]))
        self.universe = VariableUniverse(tuple(names))
        self.results: list[TestResult] = []

    def test(self, t: CiTriple) -> TestResult:
        if not t.is_singleton:
            raise ValueError("Fisher-Z needs singleton endpoints")
        idx = self.universe.index
        (x,), (y,) = t.x, t.y
        rho = partial_correlation(self.cov, idx[x], idx[y], [idx[v] for v in sorted(t.z)])
        stat, p = fisher_z_from_rho(rho, self.n, len(t.z))
        return TestResult(t, stat, p, self.alpha)

    def _answer(self, t):
        r = self.test(t)
        self.results.append(r)
        return r.verdict, r.p_value


class DataOracle(CiOracle):
    """Verdicts from a statistical test on a :class:`Dataset`."""

    def __init__(self, data: Dataset, test: str | None = None, alpha: float = DEFAULT_ALPHA):
        super().__init__()
        self.data = data
        self.universe = data.universe
        self.test_kind = test or ("fisher_z" if data.kind == "continuous" else "chi_square")
        if self.test_kind not in ("fisher_z", "chi_square"):
            raise ValueError(f"unknown test {self.test_kind!r}")
        self.alpha = alpha
        self.results: list[TestResult] = []
        self._cov = np.cov(data.values.astype(float), rowvar=False) if self.test_kind == "fisher_z" else None

    def test(self, t: CiTriple) -> TestResult:
        if self.test_kind == "chi_square":
            return chi_square(self.data, t.x, t.y, t.z, self.alpha)
        if not t.is_singleton:
            raise ValueError("Fisher-Z needs singleton endpoints")
        (x,), (y,) = t.x, t.y
        ix = self.data.index_of
        rho = partial_correlation(self._cov, ix(x), ix(y), [ix(v) for v in sorted(t.z)])
        stat, p = fisher_z_from_rho(rho, self.data.n_samples, len(t.z))
        return TestResult(t, stat, p, self.alpha)

    def _answer(self, t):
        r = self.test(t)
        self.results.append(r)
        return r.verdict, r.p_value


def graph_oracle(g: Graph, flips: Iterable[CiTriple] = ()) -> GraphOracle:
    return GraphOracle(g, flips)


def query(oracle: CiOracle, triple: CiTriple) -> CiStatement:
    return oracle.query(triple)


def empirical_model(oracle: CiOracle, triples: Iterable[CiTriple]) -> IndependenceModel:
    return IndependenceModel(oracle.universe, {t: oracle.query(t).verdict for t in triples})
