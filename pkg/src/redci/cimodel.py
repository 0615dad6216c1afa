"""Variables, CI triples and statements, independence models, Markov distance."""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .exceptions import (
    CapExceededError,
    EmptySideError,
    OverlapError,
    UnknownStatusError,
    UnknownVariableError,
)

SET_VALUED_CAP = 8


class Status(enum.Enum):
    INDEPENDENT = "indep"
    DEPENDENT = "dep"
    UNKNOWN = "unknown"

    def flip(self) -> "Status":
        if self is Status.INDEPENDENT:
            return Status.DEPENDENT
        if self is Status.DEPENDENT:
            return Status.INDEPENDENT
        return self

    @classmethod
    def from_bool(cls, independent: bool) -> "Status":
        return cls.INDEPENDENT if independent else cls.DEPENDENT


INDEP = Status.INDEPENDENT
DEP = Status.DEPENDENT
UNKNOWN = Status.UNKNOWN


@dataclass(frozen=True)
class VariableUniverse:
    """Ordered, duplicate-free collection of variable names."""

    names: tuple[str, ...]
    set_valued_cap: int = SET_VALUED_CAP
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if not names:
            raise ValueError("a universe needs at least one variable")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "index", MappingProxyType({n: i for i, n in enumerate(names)}))

    @classmethod
    def of_size(cls, n: int, prefix: str = "X", start: int = 1) -> "VariableUniverse":
        return cls(tuple(f"{prefix}{i}" for i in range(start, start + n)))

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name) -> bool:
        return name in self.index

    def check(self, names: Iterable[str]) -> None:
        for n in names:
            if n not in self.index:
                raise UnknownVariableError(n)

    def mask(self, names: Iterable[str]) -> int:
        m = 0
        for n in names:
            try:
                m |= 1 << self.index[n]
            except KeyError:
                raise UnknownVariableError(n) from None
        return m

    def names_of(self, mask: int) -> frozenset[str]:
        return frozenset(n for i, n in enumerate(self.names) if mask >> i & 1)


def _as_set(v) -> frozenset[str]:
    if v is None:
        return frozenset()
    if isinstance(v, str):
        return frozenset((v,)) if v else frozenset()
    return frozenset(str(e) for e in v)


def _key(s: frozenset[str]) -> tuple[str, ...]:
    return tuple(sorted(s))


@dataclass(frozen=True, order=False)
class CiTriple:
    """The triple (x, y | z).

    Instances are stored in canonical form: the two sides are swapped at
    construction so that sorted(x) <= sorted(y). Equality and hashing
    therefore already quotient out symmetry.
    """

    x: frozenset[str]
    y: frozenset[str]
    z: frozenset[str] = frozenset()

    def __post_init__(self):
        x, y, z = _as_set(self.x), _as_set(self.y), _as_set(self.z)
        if not x or not y:
            raise EmptySideError(f"both sides of a CI triple must be non-empty, got {sorted(x)}, {sorted(y)}")
        if x & y or x & z or y & z:
            raise OverlapError(f"sets of a CI triple must be disjoint: {sorted(x)}, {sorted(y)}, {sorted(z)}")
        if _key(y) < _key(x):
            x, y = y, x
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @classmethod
    def of(cls, x, y, z=()) -> "CiTriple":
        return cls(_as_set(x), _as_set(y), _as_set(z))

    @property
    def variables(self) -> frozenset[str]:
        return self.x | self.y | self.z

    @property
    def is_singleton(self) -> bool:
        return len(self.x) == 1 and len(self.y) == 1

    @property
    def pair(self) -> tuple[str, str]:
        """The two endpoint variables of a singleton triple."""
        if not self.is_singleton:
            raise ValueError(f"{self} is not a singleton triple")
        return next(iter(self.x)), next(iter(self.y))

    def sort_key(self):
        return (len(self.z), _key(self.x), _key(self.y), _key(self.z))

    def __str__(self) -> str:
        def fmt(s):
            return ",".join(_key(s))

        return f"({fmt(self.x)} ; {fmt(self.y)} | {fmt(self.z)})"

    def to_record(self) -> dict:
        return {"x": list(_key(self.x)), "y": list(_key(self.y)), "z": list(_key(self.z))}

    @classmethod
    def from_record(cls, rec: Mapping) -> "CiTriple":
        return cls.of(rec["x"], rec["y"], rec.get("z", ()))

    @classmethod
    def parse(cls, text: str) -> "CiTriple":
        """Parse ``x;y;z`` with ``|``-separated members (empty z allowed)."""
        parts = text.strip().split(";")
        if len(parts) == 2:
            parts.append("")
        if len(parts) != 3:
            raise ValueError(f"expected 'x;y;z', got {text!r}")
        x, y, z = ([m.strip() for m in p.split("|") if m.strip()] for p in parts)
        return cls.of(x, y, z)


def canonicalize(triple: CiTriple, universe: VariableUniverse | None = None) -> CiTriple:
    if universe is not None:
        universe.check(triple.variables)
    return CiTriple(triple.x, triple.y, triple.z)


@dataclass(frozen=True)
class CiStatement:
    triple: CiTriple
    verdict: Status

    def __post_init__(self):
        if self.verdict is Status.UNKNOWN:
            raise ValueError("a CI statement needs a definite verdict")

    @classmethod
    def indep(cls, x, y, z=()) -> "CiStatement":
        return cls(CiTriple.of(x, y, z), Status.INDEPENDENT)

    @classmethod
    def dep(cls, x, y, z=()) -> "CiStatement":
        return cls(CiTriple.of(x, y, z), Status.DEPENDENT)

    @property
    def independent(self) -> bool:
        return self.verdict is Status.INDEPENDENT

    def negated(self) -> "CiStatement":
        return CiStatement(self.triple, self.verdict.flip())

    def __str__(self) -> str:
        sym = "_||_" if self.independent else "not _||_"
        t = self.triple
        return f"{','.join(_key(t.x))} {sym} {','.join(_key(t.y))} | {','.join(_key(t.z))}"

    def to_record(self) -> dict:
        rec = self.triple.to_record()
        rec["verdict"] = self.verdict.value
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "CiStatement":
        return cls(CiTriple.from_record(rec), Status(rec["verdict"]))


class IndependenceModel:
    """Three-valued map from canonical triples to verdicts.

    Triples that were never assigned read as ``Status.UNKNOWN``.
    """

    __slots__ = ("universe", "_status")

    def __init__(self, universe: VariableUniverse, status: Mapping[CiTriple, Status] | None = None):
        self.universe = universe
        clean = {}
        for t, v in (status or {}).items():
            universe.check(t.variables)
            if v is not Status.UNKNOWN:
                clean[t] = v
        self._status = MappingProxyType(clean)

    @classmethod
    def from_statements(cls, universe: VariableUniverse, statements: Iterable[CiStatement]) -> "IndependenceModel":
        status = {}
        for st in statements:
            prev = status.get(st.triple)
            if prev is not None and prev is not st.verdict:
                raise ValueError(f"conflicting verdicts for {st.triple}")
            status[st.triple] = st.verdict
        return cls(universe, status)

    def __getitem__(self, triple: CiTriple) -> Status:
        return self._status.get(triple, Status.UNKNOWN)

    def __contains__(self, triple: CiTriple) -> bool:
        return triple in self._status

    def __len__(self) -> int:
        return len(self._status)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndependenceModel):
            return NotImplemented
        return self.universe.names == other.universe.names and dict(self._status) == dict(other._status)

    def __repr__(self) -> str:
        return f"IndependenceModel({len(self._status)} determined over {list(self.universe.names)})"

    @property
    def status(self) -> Mapping[CiTriple, Status]:
        return self._status

    def statements(self) -> list[CiStatement]:
        return [CiStatement(t, v) for t, v in sorted(self._status.items(), key=lambda kv: kv[0].sort_key())]

    def restrict(self, triples: Iterable[CiTriple]) -> "IndependenceModel":
        return IndependenceModel(self.universe, {t: self[t] for t in triples})

    def agrees_with(self, statements: Iterable[CiStatement]) -> bool:
        """True iff every statement's verdict matches this model (``L <= M``)."""
        return all(self[st.triple] is st.verdict for st in statements)


TripleSet = tuple  # tuple[CiTriple, ...], canonical and duplicate-free


def _subsets(items: Sequence[str], max_size: int | None = None):
    top = len(items) if max_size is None else min(max_size, len(items))
    for k in range(top + 1):
        yield from itertools.combinations(items, k)


def all_triples(
    universe: VariableUniverse, singleton_only: bool = True, max_cond: int | None = None
) -> TripleSet:
    """Enumerate CI triples over ``universe`` in a fixed order.

    With ``singleton_only`` this is CI(V): every unordered pair {X, Y} with
    every conditioning set Z of V minus {X, Y}, optionally capped at
    ``max_cond`` elements. Otherwise all disjoint set-valued triples are
    produced, which is only allowed up to ``universe.set_valued_cap``.
    """
    names = universe.names
    if max_cond is not None and max_cond > max(len(names) - 2, 0):
        raise ValueError(f"max_cond={max_cond} exceeds |V|-2={len(names) - 2}")
    out: list[CiTriple] = []
    if singleton_only:
        for a, b in itertools.combinations(names, 2):
            rest = [n for n in names if n != a and n != b]
            for z in _subsets(rest, max_cond):
                out.append(CiTriple.of(a, b, z))
    else:
        if len(names) > universe.set_valued_cap:
            raise CapExceededError(
                f"set-valued triples need |V| <= {universe.set_valued_cap}, got {len(names)}"
            )
        seen = set()
        for assign in itertools.product(range(4), repeat=len(names)):
            x = [n for n, a in zip(names, assign) if a == 1]
            y = [n for n, a in zip(names, assign) if a == 2]
            if not x or not y:
                continue
            z = [n for n, a in zip(names, assign) if a == 3]
            if max_cond is not None and len(z) > max_cond:
                continue
            t = CiTriple.of(x, y, z)
            if t not in seen:
                seen.add(t)
                out.append(t)
    out.sort(key=CiTriple.sort_key)
    return tuple(out)


def tree_test_triples(universe: VariableUniverse) -> TripleSet:
    """All singleton triples with exactly one conditioning variable."""
    return tuple(t for t in all_triples(universe, max_cond=1) if len(t.z) == 1)


def markov_distance(a, b, s: Iterable[CiTriple]) -> int:
    """Number of triples in ``s`` on which models ``a`` and ``b`` disagree.

    ``a`` and ``b`` may be :class:`IndependenceModel` instances or anything
    indexable by triple returning a :class:`Status`.
    """
    d = 0
    for t in s:
        va, vb = a[t], b[t]
        if va is Status.UNKNOWN or vb is Status.UNKNOWN:
            raise UnknownStatusError(t)
        d += va is not vb
    return d


# --- statement list files -------------------------------------------------

_VERDICT_ALIASES = {
    "indep": Status.INDEPENDENT,
    "independent": Status.INDEPENDENT,
    "i": Status.INDEPENDENT,
    "dep": Status.DEPENDENT,
    "dependent": Status.DEPENDENT,
    "d": Status.DEPENDENT,
}


def _parse_verdict(v: str) -> Status:
    try:
        return _VERDICT_ALIASES[v.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown verdict {v!r}") from None


def statements_from_json(text: str) -> list[CiStatement]:
    data = json.loads(text)
    out = []
    for rec in data:
        out.append(CiStatement(CiTriple.of(rec["x"], rec["y"], rec.get("z", ())), _parse_verdict(rec["verdict"])))
    return out


def statements_to_json(statements: Iterable[CiStatement]) -> str:
    return json.dumps([st.to_record() for st in statements], indent=1)


def statements_from_csv(text: str) -> list[CiStatement]:
    out = []
    for row in csv.reader(io.StringIO(text), delimiter=";"):
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 4:
            raise ValueError(f"expected 4 fields x;y;z;verdict, got {row}")
        if row[3].strip().lower() == "verdict":
            continue
        x, y, z = ([m for m in f.split("|") if m] for f in row[:3])
        out.append(CiStatement(CiTriple.of(x, y, z), _parse_verdict(row[3])))
    return out


def statements_to_csv(statements: Iterable[CiStatement]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=";", lineterminator="\n")
    for st in statements:
        t = st.triple
        w.writerow(["|".join(_key(t.x)), "|".join(_key(t.y)), "|".join(_key(t.z)), st.verdict.value])
    return buf.getvalue()


def load_statements(path) -> list[CiStatement]:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return statements_from_csv(text)
    return statements_from_json(text)


def save_statements(path, statements: Iterable[CiStatement]) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        path.write_text(statements_to_csv(statements))
    else:
        path.write_text(statements_to_json(statements))


def universe_of(statements: Iterable[CiStatement], extra: Iterable[str] = ()) -> VariableUniverse:
    names = set(extra)
    for st in statements:
        names |= st.triple.variables
    return VariableUniverse(tuple(sorted(names)))
