"""Weighted process-relation graph and the mutation primitives used by percolation.

A :class:`ProcessGraph` is built edge by edge, validated, then frozen.  Freezing
compiles the topology into flat arrays (:class:`Topology`) shared by every clone
and snapshots the weighted degrees used as denominators by the robustness
metrics.  After that the only mutable state is three per-node vectors:

``alive``
    whether the process still exists,
``scale``
    the factor applied to every original out-edge weight of the node,
``degradation``
    cumulative direct-hit degradation from partial attacks.

The current weight of an edge ``s -> t`` is ``original_weight * scale[s]`` while
both endpoints are alive, which is exactly the "set, don't multiply" scaling rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import kernels

SECTORS = ("power", "water", "gas", "heat", "transport", "service", "other")
WEIGHT_TOL = 1e-9


class GraphError(ValueError):
    """Raised for structural misuse of a graph (unknown ids, frozen graph edits...)."""


class GraphValidationError(GraphError):
    def __init__(self, problems: list[tuple[int, float]], extra: list[str] | None = None):
        self.problems = problems
        self.extra = extra or []
        lines = [f"node {nid}: incoming weight sum {total:.12g} != 1" for nid, total in problems]
        lines.extend(self.extra)
        super().__init__("graph validation failed:\n  " + "\n  ".join(lines))


@dataclass
class ProcessNode:
    id: int
    label: str = ""
    sector: str = "other"
    qof_fraction: float | None = None
    original_in_weight: float = 0.0
    original_out_weight: float = 0.0


@dataclass(frozen=True)
class DependencyEdge:
    source: int
    target: int
    weight: float
    original_weight: float


@dataclass(frozen=True)
class Topology:
    """Array form of a frozen graph.  Node index order is ascending id order."""

    ids: np.ndarray
    out_ptr: np.ndarray
    out_idx: np.ndarray
    out_w: np.ndarray
    in_ptr: np.ndarray
    in_idx: np.ndarray
    in_w: np.ndarray
    w0: np.ndarray  # dense original weights, w0[s, t]
    w0t: np.ndarray  # contiguous transpose, for row-ordered child sums
    adj: np.ndarray  # structural adjacency (zero-weight edges included)
    in0: np.ndarray
    out0: np.ndarray
    qof: np.ndarray  # per-node override, NaN when unset
    total_out0: float

    @property
    def n(self) -> int:
        return int(self.ids.shape[0])


def _compile(nodes: dict[int, ProcessNode], edges: dict[tuple[int, int], float]) -> Topology:
    ids = np.array(sorted(nodes), dtype=np.int64)
    n = ids.shape[0]
    pos = {int(v): i for i, v in enumerate(ids)}
    w0 = np.zeros((n, n), dtype=np.float64)
    adj = np.zeros((n, n), dtype=np.bool_)
    for (s, t), w in edges.items():
        w0[pos[s], pos[t]] = w
        adj[pos[s], pos[t]] = True

    def csr(mat_adj, mat_w):
        ptr = np.zeros(n + 1, dtype=np.int64)
        idx, ws = [], []
        for i in range(n):
            cols = np.flatnonzero(mat_adj[i])
            idx.extend(cols.tolist())
            ws.extend(mat_w[i, cols].tolist())
            ptr[i + 1] = ptr[i] + cols.shape[0]
        return ptr, np.array(idx, dtype=np.int64), np.array(ws, dtype=np.float64)

    out_ptr, out_idx, out_w = csr(adj, w0)
    in_ptr, in_idx, in_w = csr(adj.T, w0.T)
    # Sequential ascending sums, matching the order used by both kernel backends.
    in0 = np.array([sum(in_w[in_ptr[i]:in_ptr[i + 1]].tolist()) for i in range(n)], dtype=np.float64)
    out0 = np.array([sum(out_w[out_ptr[i]:out_ptr[i + 1]].tolist()) for i in range(n)], dtype=np.float64)
    qof = np.array(
        [np.nan if nodes[int(v)].qof_fraction is None else nodes[int(v)].qof_fraction for v in ids],
        dtype=np.float64,
    )
    return Topology(
        ids=ids, out_ptr=out_ptr, out_idx=out_idx, out_w=out_w,
        in_ptr=in_ptr, in_idx=in_idx, in_w=in_w,
        w0=w0, w0t=np.ascontiguousarray(w0.T), adj=adj,
        in0=in0, out0=out0, qof=qof, total_out0=float(sum(out0.tolist())),
    )


@dataclass
class ProcessGraph:
    """Directed weighted dependency graph over system processes.

    Edges point from the supporting process to the dependent one.  Build it with
    :meth:`add_node` / :meth:`add_edge`, then call :meth:`freeze` to obtain the
    simulation-ready copy.
    """

    _nodes: dict[int, ProcessNode] = field(default_factory=dict)
    _edges: dict[tuple[int, int], float] = field(default_factory=dict)
    topology: Topology | None = None
    alive: np.ndarray | None = None
    scale: np.ndarray | None = None
    degradation: np.ndarray | None = None
    _pos: dict[int, int] = field(default_factory=dict, repr=False)

    # -- construction ---------------------------------------------------------

    @property
    def frozen(self) -> bool:
        return self.topology is not None

    def _check_mutable(self):
        if self.frozen:
            raise GraphError("graph is frozen; only percolation primitives may modify it")

    def add_node(self, id: int, label: str = "", sector: str = "other",
                 qof_fraction: float | None = None) -> ProcessNode:
        self._check_mutable()
        id = int(id)
        if id in self._nodes:
            raise GraphError(f"duplicate node id {id}")
        if sector not in SECTORS:
            raise GraphError(f"node {id}: unknown sector {sector!r}")
        if qof_fraction is not None and not 0.0 <= qof_fraction <= 1.0:
            raise GraphError(f"node {id}: qof_fraction {qof_fraction} outside [0, 1]")
        node = ProcessNode(id=id, label=label, sector=sector, qof_fraction=qof_fraction)
        self._nodes[id] = node
        return node

    def add_edge(self, source: int, target: int, weight: float = 1.0) -> None:
        self._check_mutable()
        source, target = int(source), int(target)
        for v in (source, target):
            if v not in self._nodes:
                raise GraphError(f"edge {source}->{target}: unknown node {v}")
        if source == target:
            raise GraphError(f"self-loop on node {source}")
        if (source, target) in self._edges:
            raise GraphError(f"duplicate edge {source}->{target}")
        if not (0.0 <= weight <= 1.0) or math.isnan(weight):
            raise GraphError(f"edge {source}->{target}: weight {weight} outside [0, 1]")
        self._edges[(source, target)] = float(weight)

    def incoming_sums(self) -> dict[int, float]:
        sums: dict[int, list[float]] = {}
        for (s, t), w in sorted(self._edges.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            sums.setdefault(t, []).append(w)
        return {t: sum(ws) for t, ws in sums.items()}

    def validate(self, tol: float = WEIGHT_TOL) -> list[tuple[int, float]]:
        """Return every node whose incoming original weights do not sum to one."""
        return [(t, total) for t, total in sorted(self.incoming_sums().items())
                if abs(total - 1.0) > tol]

    def normalize_incoming(self) -> list[tuple[int, float]]:
        """Rescale incoming weights proportionally so each in-neighbourhood sums to one.

        Returns the (node, old_sum) pairs that were changed.  Nodes whose incoming
        weights are all zero cannot be rescaled and are left for validation to report.
        """
        self._check_mutable()
        changed = []
        for t, total in self.validate():
            if total <= 0.0:
                continue
            for key in [k for k in self._edges if k[1] == t]:
                self._edges[key] = self._edges[key] / total
            changed.append((t, total))
        return changed

    def freeze(self, auto_normalize: bool = False, tol: float = WEIGHT_TOL) -> "ProcessGraph":
        """Validate and return a frozen copy ready for simulation."""
        g = ProcessGraph(_nodes={k: replace(v) for k, v in self._nodes.items()},
                         _edges=dict(self._edges))
        if auto_normalize:
            g.normalize_incoming()
        problems = g.validate(tol)
        if problems:
            raise GraphValidationError(problems)
        topo = _compile(g._nodes, g._edges)
        for i, nid in enumerate(topo.ids.tolist()):
            node = g._nodes[nid]
            node.original_in_weight = float(topo.in0[i])
            node.original_out_weight = float(topo.out0[i])
        g.topology = topo
        g._pos = {nid: i for i, nid in enumerate(topo.ids.tolist())}
        g.reset()
        return g

    def reset(self) -> None:
        """Restore the frozen, unattacked state."""
        n = self._require_frozen().n
        self.alive = np.ones(n, dtype=np.bool_)
        self.scale = np.ones(n, dtype=np.float64)
        self.degradation = np.zeros(n, dtype=np.float64)

    def clone(self) -> "ProcessGraph":
        """Cheap copy sharing the immutable topology; state vectors are copied."""
        topo = self._require_frozen()
        return ProcessGraph(_nodes=self._nodes, _edges=self._edges, topology=topo,
                            alive=self.alive.copy(), scale=self.scale.copy(),
                            degradation=self.degradation.copy(), _pos=self._pos)

    def with_weights(self, weights: dict[tuple[int, int], float]) -> "ProcessGraph":
        """Frozen copy of the original graph with some original edge weights replaced."""
        g = ProcessGraph(_nodes={k: replace(v) for k, v in self._nodes.items()},
                         _edges=dict(self._edges))
        for key, w in weights.items():
            if key not in g._edges:
                raise GraphError(f"no edge {key[0]}->{key[1]}")
            g._edges[key] = float(w)
        return g.freeze()

    def unfrozen_copy(self) -> "ProcessGraph":
        nodes = {k: ProcessNode(id=v.id, label=v.label, sector=v.sector, qof_fraction=v.qof_fraction)
                 for k, v in self._nodes.items()}
        return ProcessGraph(_nodes=nodes, _edges=dict(self._edges))

    # -- queries ----------------------------------------------------------------

    def _require_frozen(self) -> Topology:
        if self.topology is None:
            raise GraphError("graph must be frozen first")
        return self.topology

    def index(self, node: int) -> int:
        self._require_frozen()
        try:
            return self._pos[int(node)]
        except KeyError:
            raise GraphError(f"unknown node id {node}") from None

    def _live_index(self, node: int) -> int:
        i = self.index(node)
        if not self.alive[i]:
            raise GraphError(f"node {node} has been removed")
        return i

    @property
    def n_original(self) -> int:
        return self._require_frozen().n

    @property
    def total_original_out_weight(self) -> float:
        return self._require_frozen().total_out0

    def node(self, node: int) -> ProcessNode:
        try:
            return self._nodes[int(node)]
        except KeyError:
            raise GraphError(f"unknown node id {node}") from None

    def all_nodes(self) -> list[ProcessNode]:
        return [self._nodes[k] for k in sorted(self._nodes)]

    def nodes(self) -> list[int]:
        """Ids of surviving nodes, ascending."""
        if not self.frozen:
            return sorted(self._nodes)
        return self.topology.ids[self.alive].tolist()

    def number_of_nodes(self) -> int:
        if not self.frozen:
            return len(self._nodes)
        return int(self.alive.sum())

    def has_node(self, node: int) -> bool:
        if not self.frozen:
            return int(node) in self._nodes
        i = self._pos.get(int(node))
        return i is not None and bool(self.alive[i])

    def original_edges(self) -> list[tuple[int, int, float]]:
        return [(s, t, w) for (s, t), w in sorted(self._edges.items())]

    def original_weight(self, source: int, target: int) -> float:
        try:
            return self._edges[(int(source), int(target))]
        except KeyError:
            raise GraphError(f"no edge {source}->{target}") from None

    def edges(self) -> Iterator[DependencyEdge]:
        """Surviving edges with their current weights."""
        if not self.frozen:
            for (s, t), w in sorted(self._edges.items()):
                yield DependencyEdge(s, t, w, w)
            return
        for (s, t), w in sorted(self._edges.items()):
            i, j = self._pos[s], self._pos[t]
            if self.alive[i] and self.alive[j]:
                yield DependencyEdge(s, t, w * float(self.scale[i]), w)

    def weight(self, source: int, target: int) -> float:
        w = self._edges.get((int(source), int(target)))
        if w is None:
            raise GraphError(f"no edge {source}->{target}")
        if not self.frozen:
            return w
        i, j = self.index(source), self.index(target)
        if not (self.alive[i] and self.alive[j]):
            raise GraphError(f"edge {source}->{target} was removed")
        return w * float(self.scale[i])

    def parents(self, node: int) -> list[int]:
        return sorted(s for (s, t) in self._edges if t == int(node))

    def in_weight(self, node: int) -> float:
        topo = self._require_frozen()
        i = self._live_index(node)
        total = 0.0
        for k in range(topo.in_ptr[i], topo.in_ptr[i + 1]):
            p = topo.in_idx[k]
            if self.alive[p]:
                total += topo.in_w[k] * self.scale[p]
        return float(total)

    def out_weight(self, node: int) -> float:
        topo = self._require_frozen()
        i = self._live_index(node)
        total = 0.0
        for k in range(topo.out_ptr[i], topo.out_ptr[i + 1]):
            if self.alive[topo.out_idx[k]]:
                total += topo.out_w[k]
        return float(total * self.scale[i])

    def descendants(self, node: int) -> list[int]:
        """Nodes reachable from ``node`` along surviving edges, excluding ``node``.

        Ordered by breadth-first distance, then ascending id.
        """
        topo = self._require_frozen()
        i = self._live_index(node)
        order, _ = kernels.descendants(topo, self.alive, i)
        return topo.ids[order].tolist()

    # -- mutation -----------------------------------------------------------------

    def remove_node(self, node: int) -> None:
        i = self._live_index(node)
        self.alive[i] = False

    def scale_out_edges(self, node: int, factor: float) -> None:
        """Set every out-edge of ``node`` to ``original_weight * factor``."""
        if not 0.0 <= factor <= 1.0:
            raise GraphError(f"scale factor {factor} outside [0, 1]")
        i = self._live_index(node)
        self.scale[i] = factor

    def residual_copy(self, alive_ids: Iterable[int]) -> "ProcessGraph":
        """Clone holding only ``alive_ids`` (state of other nodes is kept)."""
        g = self.clone()
        g.alive[:] = False
        for v in alive_ids:
            g.alive[self.index(v)] = True
        return g


# -- CSV interchange ------------------------------------------------------------------

NODE_HEADER = ["id", "label", "sector", "qof_fraction"]
EDGE_HEADER = ["source", "target", "weight"]


def _rows(path: Path) -> Iterator[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = (ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#"))
        yield from csv.DictReader(lines)


def read_graph_csv(nodes_path, edges_path, auto_normalize: bool = False) -> ProcessGraph:
    """Load a node table and an edge list and return the frozen graph."""
    return parse_graph_csv(nodes_path, edges_path).freeze(auto_normalize=auto_normalize)


def parse_graph_csv(nodes_path, edges_path) -> ProcessGraph:
    """Load a node table and an edge list into an unfrozen graph."""
    g = ProcessGraph()
    for row in _rows(Path(nodes_path)):
        qof = row.get("qof_fraction", "") or ""
        g.add_node(int(row["id"]), label=row.get("label", "") or "",
                   sector=(row.get("sector") or "other").strip(),
                   qof_fraction=float(qof) if qof.strip() else None)
    for row in _rows(Path(edges_path)):
        g.add_edge(int(row["source"]), int(row["target"]), float(row["weight"]))
    return g


def write_graph_csv(graph: ProcessGraph, nodes_path, edges_path) -> None:
    """Write the original (unattacked) node table and edge list."""
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NODE_HEADER)
        for node in graph.all_nodes():
            w.writerow([node.id, node.label, node.sector,
                        "" if node.qof_fraction is None else repr(node.qof_fraction)])
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_HEADER)
        for s, t, wt in graph.original_edges():
            w.writerow([s, t, repr(wt)])
