"""Monte-Carlo attack campaigns and their summaries.

Trial ``k`` of a campaign is exactly the single run with ``seed = seed_base + k``,
so any trial can be replayed on its own.  Traces that end early are padded with
their final values before aggregation.
"""

from __future__ import annotations

import csv
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .centrality import ConvergenceError
from .graph import GraphError, ProcessGraph
from .percolation import METRICS, AttackPlan, PercolationTrace, _params, draws, simulate

CHUNK = 256  # trials per kernel call; fixed so results never depend on the job count
TABLE_METRICS = ("lcc", "fr", "sr")
LEVEL_TOL = 1e-12


@dataclass(frozen=True)
class CampaignSpec:
    plan: AttackPlan = field(default_factory=AttackPlan)
    trials: int = 10_000
    metrics: tuple[str, ...] = METRICS
    levels: tuple[float, ...] = (20, 50, 80)
    seed_base: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        bad = [m for m in self.metrics if m not in METRICS]
        if bad:
            raise ValueError(f"unknown metrics {bad}; choose from {METRICS}")
        if any(not 0 < lv <= 100 for lv in self.levels):
            raise ValueError("degradation levels must lie in (0, 100]")
        if self.seed_base < 0 or self.seed_base + self.trials > 2**64:
            raise ValueError("seed_base + trials must fit in 64 unsigned bits")


@dataclass
class CampaignResult:
    spec: CampaignSpec
    values: np.ndarray  # (trials, stages+1, 4), padded with terminal values
    lengths: np.ndarray  # attack stages executed per trial

    @property
    def n_stages(self) -> int:
        return self.values.shape[1] - 1

    def series(self, metric: str) -> np.ndarray:
        return self.values[:, :, METRICS.index(metric)]

    def mean(self, metric: str) -> np.ndarray:
        return self.series(metric).mean(axis=0)

    def percentile(self, metric: str, q: float) -> np.ndarray:
        return np.percentile(self.series(metric), q, axis=0)

    def stages_to(self, metric: str, level: float) -> np.ndarray:
        """Per-trial stages to ``level``% degradation; -1 where never reached."""
        return first_crossing(self.series(metric), level)

    def trajectory_rows(self) -> list[list[str]]:
        rows = [["stage", "metric", "mean", "p5", "p95"]]
        for m in self.spec.metrics:
            mean, p5, p95 = self.mean(m), self.percentile(m, 5), self.percentile(m, 95)
            for s in range(self.n_stages + 1):
                rows.append([str(s), m, repr(float(mean[s])), repr(float(p5[s])), repr(float(p95[s]))])
        return rows


def first_crossing(series: np.ndarray, level: float) -> np.ndarray:
    """First index per row with value <= (1 - level/100) * row[0]; -1 if none."""
    series = np.atleast_2d(series)
    thr = (100.0 - level) / 100.0 * series[:, :1]
    hit = series <= thr + LEVEL_TOL
    idx = hit.argmax(axis=1)
    return np.where(hit.any(axis=1), idx, -1)


def stages_to_degradation(trace, metric: str, level: float) -> int | None:
    """First stage whose ``metric`` is at most ``(1 - level/100)`` of stage 0.

    ``trace`` is a :class:`PercolationTrace` or a 1-D sequence of values that
    starts with the baseline.  Returns ``None`` when the level is never reached.
    """
    if not 0 < level <= 100:
        raise ValueError("level must lie in (0, 100]")
    values = trace.metric(metric) if isinstance(trace, PercolationTrace) else np.asarray(trace, float)
    if values.size == 0:
        raise ValueError("trajectory needs a stage-0 baseline")
    k = int(first_crossing(values, level)[0])
    return None if k < 0 else k


def _pad(values: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    width = values.shape[1]
    for t, n in enumerate(lengths.tolist()):
        if n + 1 < width:
            values[t, n + 1:] = values[t, n]
    return values


def _chunk(topo, params, plan, seeds, limit):
    uniforms = np.empty((len(seeds), limit))
    steps = np.empty((len(seeds), limit))
    for r, seed in enumerate(seeds):
        uniforms[r], steps[r] = draws(plan, seed, limit)
    values, lengths, status = kernels.run_many(topo, params, steps, uniforms, limit)
    if status.any():
        raise ConvergenceError(f"{plan.basis.value} power iteration did not converge")
    used = int(lengths.max()) + 1
    return _pad(values[:, :used].copy(), lengths), lengths


def run_campaign(graph: ProcessGraph, spec: CampaignSpec, jobs: int | None = None) -> CampaignResult:
    """Run ``spec.trials`` attacks from the unattacked state of ``graph``."""
    if not graph.frozen:
        raise GraphError("campaigns need a frozen graph")
    base = graph.clone()
    base.reset()
    plan = spec.plan
    if base.number_of_nodes() <= plan.stop_at_nodes:
        raise GraphError(f"graph has {base.number_of_nodes()} nodes; "
                         f"need more than stop_at_nodes={plan.stop_at_nodes}")
    topo = base.topology
    limit = plan.max_stages(topo.n)
    params = _params(base, plan)

    if plan.deterministic:
        values, lengths = _chunk(topo, params, plan, [spec.seed_base], limit)
        values = np.repeat(values, spec.trials, axis=0)
        lengths = np.repeat(lengths, spec.trials)
        return CampaignResult(spec, values, lengths)

    seeds = [spec.seed_base + k for k in range(spec.trials)]
    batches = [seeds[i:i + CHUNK] for i in range(0, len(seeds), CHUNK)]
    jobs = max(1, jobs or os.cpu_count() or 1)
    if jobs == 1 or len(batches) == 1:
        parts = [_chunk(topo, params, plan, b, limit) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda b: _chunk(topo, params, plan, b, limit), batches))
    width = max(p[0].shape[1] for p in parts)
    values = np.empty((spec.trials, width, len(METRICS)))
    row = 0
    for v, _ in parts:
        values[row:row + v.shape[0], :v.shape[1]] = v
        values[row:row + v.shape[0], v.shape[1]:] = v[:, -1:]
        row += v.shape[0]
    lengths = np.concatenate([p[1] for p in parts])
    return CampaignResult(spec, values, lengths)


@dataclass(frozen=True)
class DegradationCell:
    metric: str
    level: float
    strategy: str
    stages: int | None  # rounded mean for random plans, exact otherwise
    mean: float | None
    median: float | None
    reachable_fraction: float


@dataclass
class DegradationTable:
    cells: list[DegradationCell]

    def get(self, metric: str, level: float, strategy: str) -> DegradationCell:
        for c in self.cells:
            if (c.metric, c.level, c.strategy) == (metric, level, strategy):
                return c
        raise KeyError((metric, level, strategy))

    def rows(self) -> list[list[str]]:
        out = [["metric", "level", "strategy", "stages", "mean", "median", "reachable_fraction"]]
        for c in self.cells:
            out.append([c.metric, _fmt_level(c.level), c.strategy,
                        "unreachable" if c.stages is None else str(c.stages),
                        "" if c.mean is None else repr(c.mean),
                        "" if c.median is None else repr(c.median),
                        repr(c.reachable_fraction)])
        return out


def _fmt_level(level: float) -> str:
    return str(int(level)) if float(level).is_integer() else repr(float(level))


def degradation_cells(result: CampaignResult, strategy: str,
                      metrics=TABLE_METRICS) -> list[DegradationCell]:
    cells = []
    for m in metrics:
        for lv in result.spec.levels:
            k = result.stages_to(m, lv)
            ok = k[k >= 0]
            frac = ok.size / k.size
            if ok.size == 0:
                cells.append(DegradationCell(m, lv, strategy, None, None, None, frac))
                continue
            mean, median = float(ok.mean()), float(np.median(ok))
            # round half up so that x.5 never flips with float noise in numpy's banker's rounding
            stages = int(math.floor(mean + 0.5))
            cells.append(DegradationCell(m, lv, strategy, stages, mean, median, frac))
    return cells


def degradation_table(graph: ProcessGraph, plans: dict[str, AttackPlan], trials: int = 10_000,
                      levels=(20, 50, 80), seed_base: int = 0, jobs: int | None = None,
                      metrics=TABLE_METRICS) -> DegradationTable:
    """Stages-to-degradation for several named strategies on one graph."""
    cells = []
    for name, plan in plans.items():
        spec = CampaignSpec(plan=plan, trials=trials, levels=tuple(levels), seed_base=seed_base)
        cells += degradation_cells(run_campaign(graph, spec, jobs), name, metrics)
    return DegradationTable(cells)


def fragment_histogram(graph: ProcessGraph) -> dict[int, int]:
    """Component size -> number of components of that size in the residual graph."""
    sizes = kernels.component_sizes(graph.topology, graph.alive)
    return dict(sorted(Counter(int(s) for s in sizes).items()))


def fragments_at(graph: ProcessGraph, plan: AttackPlan, stage: int) -> dict[int, int]:
    """Histogram after ``stage`` stages of ``plan`` (or at the end, if it stops earlier)."""
    if stage < 0:
        raise ValueError("stage must be non-negative")
    if stage == 0:
        g = graph.clone()
        g.reset()
        return fragment_histogram(g)
    base = graph.clone()
    base.reset()
    _, residual = simulate(base, plan, max_stages=stage)
    return fragment_histogram(residual)


def campaign_plan(spec: CampaignSpec, trial: int) -> AttackPlan:
    """The single-run plan that reproduces trial ``trial`` of ``spec``."""
    return replace(spec.plan, seed=spec.seed_base + trial)


def write_rows(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
