"""Robustness metrics of a residual graph.

Components are weakly connected: edge direction is ignored and zero-weight
edges still connect.  Flow robustness divides by ``N(N-1)`` with ``N`` the node
count at freeze time, so values stay comparable across percolation stages.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import kernels
from .graph import GraphError, ProcessGraph


@dataclass(frozen=True)
class RobustnessSnapshot:
    lcc: int
    ncc: int
    fr: float
    sr: float

    def as_tuple(self) -> tuple[int, int, float, float]:
        return (self.lcc, self.ncc, self.fr, self.sr)


def _topo(graph: ProcessGraph):
    if not graph.frozen:
        raise GraphError("metrics need a frozen graph")
    return graph.topology


def component_sizes(graph: ProcessGraph) -> list[int]:
    """Sizes of the weakly connected components of the surviving nodes (descending)."""
    sizes = kernels.component_sizes(_topo(graph), graph.alive)
    return sorted(sizes.tolist(), reverse=True)


def largest_connected_component(graph: ProcessGraph) -> int:
    sizes = component_sizes(graph)
    return sizes[0] if sizes else 0


def number_connected_components(graph: ProcessGraph) -> int:
    return len(component_sizes(graph))


def flow_robustness(graph: ProcessGraph) -> float:
    n = graph.n_original
    if n < 2:
        raise GraphError("flow robustness needs at least two original nodes")
    return kernels.snapshot(graph.topology, graph.alive, graph.scale)[2]


def service_robustness(graph: ProcessGraph) -> float:
    """Surviving weighted out-degree over the original total.

    A graph with no original edge weight scores 1.0 while any node survives and
    0.0 once empty.
    """
    return kernels.snapshot(_topo(graph), graph.alive, graph.scale)[3]


def snapshot(graph: ProcessGraph) -> RobustnessSnapshot:
    lcc, ncc, fr, sr = kernels.snapshot(_topo(graph), graph.alive, graph.scale)
    return RobustnessSnapshot(lcc=lcc, ncc=ncc, fr=fr, sr=sr)
