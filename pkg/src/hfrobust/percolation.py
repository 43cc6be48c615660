"""Staged node attacks with cascading degradation.

Each stage selects one surviving process, attacks it, then propagates the loss
to everything reachable from it.  A reachable process keeps a fraction of its
service equal to its current over its original weighted in-degree (times its
own partial-attack damage), and is removed when nothing feeds it any more or
when its remaining out-weight drops strictly below its quality-of-functionality
threshold.  Propagation is repeated until the state stops changing, so results
do not depend on the order in which reachable processes are visited.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .centrality import TARGETED_BASES, CentralityBasis, ConvergenceError, ranking_indices
from .graph import GraphError, ProcessGraph

METRICS = ("lcc", "ncc", "fr", "sr")


class Strength(str, Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"


class Selection(str, Enum):
    RANDOM = "random"
    TARGETED = "targeted"


class RankingMode(str, Enum):
    STATIC = "static"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class AttackPlan:
    strength: Strength = Strength.COMPLETE
    selection: Selection = Selection.RANDOM
    basis: CentralityBasis = CentralityBasis.WEIGHTED_OUT_DEGREE
    ranking_mode: RankingMode = RankingMode.STATIC
    partial_step: float = 0.20
    # opt-in: draw each partial hit uniformly from [lo, hi] instead of partial_step
    random_step: tuple[float, float] | None = None
    qof_fraction: float = 0.5
    acceptable_service_fraction: float | None = None  # None: same as the QoF threshold
    seed: int = 0
    stop_at_nodes: int = 2
    allow_any_basis: bool = False

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "strength", Strength(self.strength))
        set_(self, "selection", Selection(self.selection))
        set_(self, "basis", CentralityBasis(self.basis))
        set_(self, "ranking_mode", RankingMode(self.ranking_mode))
        if not 0.0 < self.partial_step <= 1.0:
            raise ValueError(f"partial_step must be in (0, 1], got {self.partial_step}")
        if self.random_step is not None:
            lo, hi = map(float, self.random_step)
            if not 0.0 < lo <= hi <= 1.0:
                raise ValueError(f"random_step interval must satisfy 0 < lo <= hi <= 1, got {self.random_step}")
            set_(self, "random_step", (lo, hi))
        if not 0.0 <= self.qof_fraction <= 1.0:
            raise ValueError(f"qof_fraction must be in [0, 1], got {self.qof_fraction}")
        acc = self.acceptable_service_fraction
        if acc is not None and not 0.0 <= acc <= 1.0:
            raise ValueError(f"acceptable_service_fraction must be in [0, 1], got {acc}")
        if self.stop_at_nodes < 0:
            raise ValueError("stop_at_nodes must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if (self.selection is Selection.TARGETED and self.basis not in TARGETED_BASES
                and not self.allow_any_basis):
            raise ValueError(f"basis {self.basis.value!r} needs allow_any_basis=True for targeted attacks")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("strength", "selection", "basis", "ranking_mode"):
            d[k] = d[k].value
        d["random_step"] = list(self.random_step) if self.random_step else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AttackPlan":
        d = dict(d)
        if d.get("random_step") is not None:
            d["random_step"] = tuple(d["random_step"])
        return cls(**d)

    @property
    def deterministic(self) -> bool:
        """True when the seed cannot influence the trace."""
        if self.selection is Selection.RANDOM:
            return False
        return not (self.strength is Strength.PARTIAL and self.random_step is not None)

    def max_stages(self, n: int) -> int:
        if self.strength is Strength.COMPLETE:
            return max(n, 1)
        step = self.random_step[0] if self.random_step else self.partial_step
        return max(n * (math.ceil(1.0 / step) + 1), 1)


@dataclass(frozen=True)
class StageRecord:
    stage: int
    attacked: int | None
    cascade_removed: tuple[int, ...]
    lcc: int
    ncc: int
    fr: float
    sr: float


@dataclass
class PercolationTrace:
    plan: AttackPlan
    stage0: StageRecord
    stages: list[StageRecord]
    removed_at: dict[int, int] = field(default_factory=dict)  # node id -> stage
    attacked_removed: dict[int, bool] = field(default_factory=dict)  # stage -> attacked node gone?

    @property
    def records(self) -> list[StageRecord]:
        return [self.stage0, *self.stages]

    def metric(self, name: str) -> np.ndarray:
        if name not in METRICS:
            raise KeyError(name)
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def surviving_at(self, stage: int, all_ids) -> list[int]:
        return [v for v in all_ids if self.removed_at.get(v, math.inf) > stage]

    def csv_rows(self) -> list[list[str]]:
        rows = [["stage", "attacked_id", "cascade_removed_ids", "lcc", "ncc", "fr", "sr"]]
        for r in self.records:
            rows.append([str(r.stage), "" if r.attacked is None else str(r.attacked),
                         ";".join(map(str, r.cascade_removed)), str(r.lcc), str(r.ncc),
                         repr(r.fr), repr(r.sr)])
        return rows

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.csv_rows())


def qof_vector(graph: ProcessGraph, default: float) -> np.ndarray:
    q = graph.topology.qof
    return np.where(np.isnan(q), default, q)


def cascade(graph: ProcessGraph, attacked: int, remove_attacked: bool = True,
            qof_fraction: float = 0.5) -> list[int]:
    """Propagate an attack on ``attacked`` through its descendants.

    Mutates ``graph`` and returns the ids removed by the propagation in
    breadth-first order (the attacked node itself is never listed).
    """
    i = graph._live_index(attacked)
    removed = kernels.cascade(graph.topology, qof_vector(graph, qof_fraction), graph.alive,
                              graph.scale, graph.degradation, i, bool(remove_attacked))
    return graph.topology.ids[removed].tolist()


def select_next(graph: ProcessGraph, plan: AttackPlan, rng: np.random.Generator | None = None,
                ranking: list[int] | None = None) -> int:
    """Pick the next process to attack on the current residual graph."""
    survivors = graph.nodes()
    if not survivors:
        raise GraphError("no surviving node to attack")
    if plan.selection is Selection.RANDOM:
        if rng is None:
            raise ValueError("random selection needs a generator")
        k = min(int(rng.random() * len(survivors)), len(survivors) - 1)
        return survivors[k]
    if plan.ranking_mode is RankingMode.STATIC:
        if ranking is None:
            raise ValueError("static targeted selection needs the freeze-time ranking")
        alive = set(survivors)
        for v in ranking:
            if v in alive:
                return v
        raise GraphError("ranking contains no surviving node")
    from .centrality import score_array
    arr = score_array(graph, plan.basis)
    i = kernels._np.best_alive(arr, graph.alive)
    return int(graph.topology.ids[i])


def _params(graph: ProcessGraph, plan: AttackPlan) -> kernels.RunParams:
    qof = qof_vector(graph, plan.qof_fraction)
    if plan.acceptable_service_fraction is None:
        accept = qof.copy()
    else:
        accept = np.full(graph.n_original, plan.acceptable_service_fraction)
    if plan.selection is Selection.RANDOM:
        mode, ranking = 0, np.zeros(1, dtype=np.int64)
    elif plan.ranking_mode is RankingMode.STATIC:
        mode, ranking = 1, ranking_indices(graph, plan.basis)
    else:
        mode, ranking = 2, np.zeros(1, dtype=np.int64)
    return kernels.RunParams(
        qof=qof, accept=accept, partial=plan.strength is Strength.PARTIAL,
        fixed_step=plan.random_step is None, step=float(plan.partial_step),
        select_mode=mode, ranking=ranking, basis=plan.basis.code, stop_at=int(plan.stop_at_nodes))


def draws(plan: AttackPlan, seed: int, max_stages: int) -> tuple[np.ndarray, np.ndarray]:
    """Selection uniforms and partial-step sizes for one run, from one seeded stream."""
    rng = np.random.default_rng(seed)
    uniforms = rng.random(max_stages)
    if plan.random_step is not None:
        steps = rng.uniform(plan.random_step[0], plan.random_step[1], max_stages)
    else:
        steps = np.full(max_stages, plan.partial_step)
    return uniforms, steps


def simulate(graph: ProcessGraph, plan: AttackPlan, max_stages: int | None = None
             ) -> tuple[PercolationTrace, ProcessGraph]:
    """Run ``plan`` on a clone of ``graph``; returns the trace and the residual clone."""
    if not graph.frozen:
        raise GraphError("attacks need a frozen graph")
    if graph.number_of_nodes() <= plan.stop_at_nodes:
        raise GraphError(f"graph has {graph.number_of_nodes()} nodes; "
                         f"need more than stop_at_nodes={plan.stop_at_nodes}")
    g = graph.clone()
    topo = g.topology
    limit = plan.max_stages(topo.n)
    if max_stages is not None:
        limit = min(limit, max_stages)
    uniforms, steps = draws(plan, plan.seed, max(limit, 1))
    params = _params(g, plan)
    hits = np.zeros(topo.n, dtype=np.int64)
    metrics, attacked, removed_stage, order, status = kernels.run(
        topo, params, g.alive, g.scale, g.degradation, hits, steps, uniforms, limit)
    if status:
        raise ConvergenceError(f"{plan.basis.value} power iteration did not converge")

    ids = topo.ids
    removed_by_stage: dict[int, list[int]] = {}
    for i in order.tolist():
        removed_by_stage.setdefault(int(removed_stage[i]), []).append(int(ids[i]))
    records = []
    attacked_removed = {}
    for s in range(1, attacked.shape[0] + 1):
        att = int(ids[attacked[s - 1]])
        gone = removed_by_stage.get(s, [])
        attacked_removed[s] = att in gone
        m = metrics[s]
        records.append(StageRecord(s, att, tuple(v for v in gone if v != att),
                                   int(m[0]), int(m[1]), float(m[2]), float(m[3])))
    m = metrics[0]
    stage0 = StageRecord(0, None, (), int(m[0]), int(m[1]), float(m[2]), float(m[3]))
    removed_at = {int(ids[i]): int(removed_stage[i]) for i in order.tolist()}
    return PercolationTrace(plan, stage0, records, removed_at, attacked_removed), g


def run_attack(graph: ProcessGraph, plan: AttackPlan, max_stages: int | None = None) -> PercolationTrace:
    return simulate(graph, plan, max_stages)[0]


def run_complete_attack(graph: ProcessGraph, plan: AttackPlan) -> PercolationTrace:
    if plan.strength is not Strength.COMPLETE:
        raise ValueError("run_complete_attack needs strength='complete'")
    return run_attack(graph, plan)


def run_partial_attack(graph: ProcessGraph, plan: AttackPlan) -> PercolationTrace:
    if plan.strength is not Strength.PARTIAL:
        raise ValueError("run_partial_attack needs strength='partial'")
    return run_attack(graph, plan)
