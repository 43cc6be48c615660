"""Node importance scores used to order targeted attacks.

Betweenness counts hop-count shortest paths; edge weights express dependency
strength, not distance, so they are ignored there.  Weighted out-degree is the
weight-sensitive basis.  Scores are compared after rounding to 1e-9 so that
float noise cannot reorder tied nodes; ties always go to the smaller id.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import kernels
from .graph import GraphError, ProcessGraph


class CentralityBasis(str, Enum):
    WEIGHTED_OUT_DEGREE = "weighted_out_degree"
    BETWEENNESS = "betweenness"
    DEGREE = "degree"
    IN_DEGREE = "in_degree"
    OUT_DEGREE = "out_degree"
    EIGENVECTOR = "eigenvector"
    PAGERANK = "pagerank"

    @property
    def code(self) -> int:
        return _CODES[self]


_CODES = {
    CentralityBasis.WEIGHTED_OUT_DEGREE: kernels.WOD,
    CentralityBasis.BETWEENNESS: kernels.BETWEENNESS,
    CentralityBasis.DEGREE: kernels.DEGREE,
    CentralityBasis.IN_DEGREE: kernels.IN_DEGREE,
    CentralityBasis.OUT_DEGREE: kernels.OUT_DEGREE,
    CentralityBasis.EIGENVECTOR: kernels.EIGENVECTOR,
    CentralityBasis.PAGERANK: kernels.PAGERANK,
}

TARGETED_BASES = frozenset({CentralityBasis.WEIGHTED_OUT_DEGREE, CentralityBasis.BETWEENNESS})


class ConvergenceError(RuntimeError):
    pass


def score_array(graph: ProcessGraph, basis) -> np.ndarray:
    """Scores indexed by node position; removed nodes score 0."""
    basis = CentralityBasis(basis)
    if not graph.frozen:
        raise GraphError("centrality needs a frozen graph")
    scores, ok = kernels.centrality(graph.topology, basis.code, graph.alive, graph.scale)
    if not ok:
        raise ConvergenceError(f"{basis.value} power iteration did not converge")
    return np.asarray(scores, dtype=np.float64)


def scores(graph: ProcessGraph, basis) -> dict[int, float]:
    arr = score_array(graph, basis)
    ids = graph.topology.ids
    return {int(ids[i]): float(arr[i]) for i in np.flatnonzero(graph.alive)}


def weighted_out_degree(graph):
    return scores(graph, CentralityBasis.WEIGHTED_OUT_DEGREE)


def betweenness(graph):
    """Directed, unnormalised betweenness over hop-count shortest paths."""
    return scores(graph, CentralityBasis.BETWEENNESS)


def degree(graph):
    return scores(graph, CentralityBasis.DEGREE)


def in_degree(graph):
    return scores(graph, CentralityBasis.IN_DEGREE)


def out_degree(graph):
    return scores(graph, CentralityBasis.OUT_DEGREE)


def eigenvector(graph):
    return scores(graph, CentralityBasis.EIGENVECTOR)


def pagerank(graph):
    return scores(graph, CentralityBasis.PAGERANK)


def rank_scores(values: dict[int, float]) -> list[int]:
    """Ids by descending score, ascending id among ties."""
    return sorted(values, key=lambda k: (-np.rint(values[k] * kernels.QUANT), k))


def rank_nodes(graph: ProcessGraph, basis) -> list[int]:
    return rank_scores(scores(graph, basis))


def ranking_indices(graph: ProcessGraph, basis) -> np.ndarray:
    """Surviving node positions in rank order (for the attack kernels)."""
    ranked = rank_nodes(graph, basis)
    return np.array([graph.index(v) for v in ranked], dtype=np.int64)
