"""Redundant conditional-independence statements in graph discovery."""

__version__ = "0.1.0"

from .cimodel import CiStatement, CiTriple, IndependenceModel, Status, VariableUniverse  # noqa: E402
from .graphoid import closure, is_graphoid_redundant  # noqa: E402
from .graphs import Dag, GraphClass, UndirectedGraph  # noqa: E402
from .redundancy import RedundancyClass, classify, explain, iterated_candidates, sufficient_criterion  # noqa: E402

__all__ = [
    "CiStatement",
    "CiTriple",
    "Dag",
    "GraphClass",
    "IndependenceModel",
    "RedundancyClass",
    "Status",
    "UndirectedGraph",
    "VariableUniverse",
    "classify",
    "closure",
    "explain",
    "is_graphoid_redundant",
    "iterated_candidates",
    "sufficient_criterion",
]
