"""Grid search over incoming dependency weights of multi-parent processes.

Every process with two or more parents gets an incoming weight vector on the
grid {0.0, 0.1, ..., 1.0} summing to one.  Weights are handled as integer
tenths so sums are exact.  The objective is the number of attack stages needed
to degrade a metric by a given level; more stages means a more robust graph.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .experiments import stages_to_degradation
from .graph import GraphError, ProcessGraph
from .percolation import METRICS, AttackPlan, run_attack

GRID = 10
BATCH = 4096


class SearchMode(str, Enum):
    EXHAUSTIVE = "exhaustive"
    RANDOM_SAMPLING = "random_sampling"


def _default_plan() -> AttackPlan:
    return AttackPlan(strength="complete", selection="targeted", basis="weighted_out_degree")


@dataclass(frozen=True)
class OptimizationSpec:
    objective: str = "sr"
    level: float = 80
    plan: AttackPlan = field(default_factory=_default_plan)
    mode: SearchMode = SearchMode.EXHAUSTIVE
    samples: int = 1000
    seed: int = 0
    cap: int = 10**7

    def __post_init__(self):
        object.__setattr__(self, "mode", SearchMode(self.mode))
        if self.objective not in METRICS:
            raise ValueError(f"objective must be one of {METRICS}")
        if not 0 < self.level <= 100:
            raise ValueError("level must lie in (0, 100]")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")


@dataclass(frozen=True)
class WeightAssignment:
    nodes: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]
    tenths: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not len(self.nodes) == len(self.parents) == len(self.tenths):
            raise ValueError("nodes, parents and tenths must align")
        for v, ps, ts in zip(self.nodes, self.parents, self.tenths):
            if len(ps) != len(ts):
                raise ValueError(f"node {v}: {len(ts)} weights for {len(ps)} parents")
            if any(t < 0 for t in ts) or sum(ts) != GRID:
                raise ValueError(f"node {v}: incoming weights {ts} (tenths) must be non-negative "
                                 f"and sum to {GRID}")

    def weights(self) -> dict[tuple[int, int], float]:
        return {(p, v): t / GRID
                for v, ps, ts in zip(self.nodes, self.parents, self.tenths)
                for p, t in zip(ps, ts)}

    def order_key(self) -> tuple[int, ...]:
        """Sort key matching enumeration order."""
        return tuple(-t for ts in self.tenths for t in ts)

    def label(self) -> str:
        return " ".join(f"{v}:" + "/".join(str(t) for t in ts) for v, ts in zip(self.nodes, self.tenths))


@dataclass
class OptimizationResult:
    best: WeightAssignment
    objective: int
    log: list[tuple[int, int, WeightAssignment]]  # (index, objective, assignment)
    baseline: int

    def log_rows(self) -> list[list[str]]:
        rows = [["index", "objective", "assignment"]]
        rows += [[str(i), str(obj), a.label()] for i, obj, a in self.log]
        return rows


def candidates(graph: ProcessGraph) -> list[tuple[int, tuple[int, ...]]]:
    """Processes with at least two parents, with their sorted parent ids."""
    out = []
    for node in graph.all_nodes():
        ps = graph.parents(node.id)
        if len(ps) >= 2:
            out.append((node.id, tuple(ps)))
    return out


def compositions(k: int, total: int = GRID) -> Iterator[tuple[int, ...]]:
    """Compositions of ``total`` into ``k`` non-negative parts, lexicographically descending."""
    if k == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(k - 1, total - first):
            yield (first, *rest)


def count_compositions(k: int, total: int = GRID) -> int:
    return math.comb(total + k - 1, k - 1)


def count_assignments(graph: ProcessGraph) -> int:
    return math.prod(count_compositions(len(ps)) for _, ps in candidates(graph))


def enumerate_assignments(graph: ProcessGraph) -> Iterator[WeightAssignment]:
    cands = candidates(graph)
    if not cands:
        raise GraphError("no process has two or more parents; nothing to optimise")
    nodes = tuple(v for v, _ in cands)
    parents = tuple(ps for _, ps in cands)
    for combo in itertools.product(*(list(compositions(len(ps))) for ps in parents)):
        yield WeightAssignment(nodes, parents, tuple(combo))


def random_assignment(graph_or_cands, rng: np.random.Generator) -> WeightAssignment:
    """Uniform draw over the grid compositions of every candidate (stars and bars)."""
    cands = candidates(graph_or_cands) if isinstance(graph_or_cands, ProcessGraph) else graph_or_cands
    if not cands:
        raise GraphError("no process has two or more parents; nothing to optimise")
    tenths = []
    for _, ps in cands:
        k = len(ps)
        bars = np.sort(rng.choice(GRID + k - 1, size=k - 1, replace=False))
        edges = np.concatenate(([-1], bars, [GRID + k - 1]))
        tenths.append(tuple(int(x) for x in np.diff(edges) - 1))
    return WeightAssignment(tuple(v for v, _ in cands), tuple(ps for _, ps in cands), tuple(tenths))


def current_assignment(graph: ProcessGraph) -> WeightAssignment:
    """The graph's own weights, when they lie on the grid."""
    cands = candidates(graph)
    tenths = []
    for v, ps in cands:
        ts = [graph.original_weight(p, v) * GRID for p in ps]
        rounded = tuple(int(round(t)) for t in ts)
        if any(abs(t - r) > 1e-9 for t, r in zip(ts, rounded)):
            raise GraphError(f"node {v}: weights are not on the 0.1 grid")
        tenths.append(rounded)
    return WeightAssignment(tuple(v for v, _ in cands), tuple(ps for _, ps in cands), tuple(tenths))


def evaluate_assignment(graph: ProcessGraph, assignment: WeightAssignment,
                        spec: OptimizationSpec) -> int:
    """Stages needed to reach the degradation level; unreachable scores stages + 1."""
    g = graph.with_weights(assignment.weights())
    trace = run_attack(g, spec.plan)
    k = stages_to_degradation(trace, spec.objective, spec.level)
    return len(trace.stages) + 1 if k is None else k


def _better(obj, a, best_obj, best) -> bool:
    return obj > best_obj or (obj == best_obj and a.order_key() < best.order_key())


def optimize(graph: ProcessGraph, spec: OptimizationSpec | None = None,
             jobs: int | None = None) -> OptimizationResult:
    spec = spec or OptimizationSpec()
    if spec.mode is SearchMode.EXHAUSTIVE:
        total = count_assignments(graph)
        if total > spec.cap:
            raise ValueError(f"{total} assignments exceed the exhaustive cap of {spec.cap}; "
                             "use random_sampling mode")
        pool_iter = enumerate_assignments(graph)
    else:
        cands = candidates(graph)
        rng = np.random.default_rng(spec.seed)
        pool_iter = (random_assignment(cands, rng) for _ in range(spec.samples))

    jobs = max(1, jobs or os.cpu_count() or 1)

    def score(a):
        return evaluate_assignment(graph, a, spec)

    log: list[tuple[int, int, WeightAssignment]] = []
    best = best_obj = None
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        while batch := list(itertools.islice(pool_iter, BATCH)):
            objectives = [score(a) for a in batch] if jobs == 1 else list(pool.map(score, batch))
            for a, obj in zip(batch, objectives):
                log.append((len(log), obj, a))
                if best is None or _better(obj, a, best_obj, best):
                    best, best_obj = a, obj
    baseline_trace = run_attack(graph, spec.plan)
    k = stages_to_degradation(baseline_trace, spec.objective, spec.level)
    baseline = len(baseline_trace.stages) + 1 if k is None else k
    return OptimizationResult(best, best_obj, log, baseline)
