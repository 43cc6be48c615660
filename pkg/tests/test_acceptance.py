"""Acceptance criteria 1-9.

Each test records one ``criterion N: PASS|FAIL`` line; they are printed together
in the terminal summary of any pytest run that includes this file.  ``python3 tests/test_acceptance.py`` runs them without pytest.
"""

from __future__ import annotations

import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from hfrobust.builder import build_graph, scenario_path  # noqa: E402
from hfrobust.cli import main as cli_main  # noqa: E402
from hfrobust.experiments import (CampaignSpec, TABLE_METRICS, degradation_cells,  # noqa: E402
                                  run_campaign)
from hfrobust.graph import ProcessGraph  # noqa: E402
from hfrobust.metrics import snapshot  # noqa: E402
from hfrobust.optimizer import (OptimizationSpec, candidates, compositions,  # noqa: E402
                                evaluate_assignment, optimize, random_assignment)
from hfrobust.percolation import AttackPlan, cascade, run_attack  # noqa: E402

LEVELS = (20, 50, 80)
TRIALS = 10_000


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    oracles.REPORT[n] = line
    print(line)
    assert ok, line


# -- shared fixtures ---------------------------------------------------------------------


_synthetic = None


def synthetic():
    global _synthetic
    if _synthetic is None:
        _synthetic = build_graph(scenario_path("synthetic-iun"))
    return _synthetic


STRATEGIES = {
    "random": dict(selection="random"),
    "OD": dict(selection="targeted", basis="weighted_out_degree"),
    "BW": dict(selection="targeted", basis="betweenness"),
}

_tables: dict[str, dict] = {}
_timings: dict[str, float] = {}


def table(strength: str) -> dict[str, dict]:
    """{strategy: {(metric, level): cell}} from 10,000-trial campaigns."""
    if strength not in _tables:
        out = {}
        for name, kw in STRATEGIES.items():
            spec = CampaignSpec(AttackPlan(strength=strength, **kw), trials=TRIALS, levels=LEVELS)
            t0 = time.perf_counter()
            result = run_campaign(synthetic(), spec)
            _timings[f"{strength}-{name}"] = time.perf_counter() - t0
            out[name] = {(c.metric, c.level): c for c in degradation_cells(result, name)}
        _tables[strength] = out
    return _tables[strength]


def _stages(cell) -> float:
    return math.inf if cell.stages is None else cell.stages


# -- 1. metric oracle ----------------------------------------------------------------------


def test_criterion_1_metric_oracle():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad = []
    for k in range(1000):
        n = int(rng.integers(2, 13))
        g = oracles.make_graph(n, oracles.random_edges(rng, n, p_source=0.3))
        g.alive[:] = rng.random(n) < 0.75
        g.scale[:] = np.where(rng.random(n) < 0.5, 1.0, rng.random(n))
        alive = {int(v) for v in g.topology.ids[g.alive]}
        scale = {int(v): float(s) for v, s in zip(g.topology.ids, g.scale)}
        lcc, ncc, fr, sr = oracles.metrics(n, oracles.weights_of(g), alive, scale)
        got = snapshot(g)
        if (got.lcc, got.ncc, got.fr) != (lcc, ncc, fr) or abs(got.sr - sr) > 1e-12:
            bad.append(k)
    elapsed = time.perf_counter() - t0
    report(1, not bad and elapsed < 10,
           f"{1000 - len(bad)}/1000 graphs match the union-find oracle in {elapsed:.2f} s")


# -- 2. cascade oracle ---------------------------------------------------------------------


def _parent_choices(n: int, v: int):
    others = [u for u in range(1, n + 1) if u != v]
    yield {}
    for p in others:
        yield {p: 1.0}
    for p, q in itertools.combinations(others, 2):
        yield {p: 0.5, q: 0.5}


def _cascade_graphs():
    for n in (2, 3, 4):
        for combo in itertools.product(*(list(_parent_choices(n, v)) for v in range(1, n + 1))):
            yield n, {(p, v): w for v, ps in zip(range(1, n + 1), combo) for p, w in ps.items()}
    rng = np.random.default_rng(2)
    for n in (5, 6):
        choices = {v: list(_parent_choices(n, v)) for v in range(1, n + 1)}
        for _ in range(1500):
            picks = {v: choices[v][int(rng.integers(len(choices[v])))] for v in choices}
            yield n, {(p, v): w for v, ps in picks.items() for p, w in ps.items()}


def test_criterion_2_cascade_oracle():
    cases = mismatches = 0
    for n, edges in _cascade_graphs():
        base = oracles.make_graph(n, edges)
        for q in (0.25, 0.5, 0.75):
            for att in range(1, n + 1):
                g = base.clone()
                got = cascade(g, att, qof_fraction=q)
                alive, scale = set(range(1, n + 1)), {v: 1.0 for v in range(1, n + 1)}
                want = oracles.cascade(edges, alive, scale, {v: 0.0 for v in alive},
                                       {v: q for v in alive}, att)
                cases += 1
                if got != want or set(g.nodes()) != alive:
                    mismatches += 1
    report(2, mismatches == 0, f"{mismatches} mismatches over {cases} cascades "
                               "(graphs up to 4 nodes exhaustive, 5-6 nodes sampled)")


# -- 3. monotonicity -----------------------------------------------------------------------


def test_criterion_3_monotonicity():
    rng = np.random.default_rng(3)
    bad = []
    ncc_rises = 0
    for k in range(500):
        n = int(rng.integers(4, 30))
        g = oracles.make_graph(n, oracles.random_edges(rng, n, p_source=0.3))
        plan = AttackPlan(selection=["random", "targeted"][k % 2], seed=k)
        trace = run_attack(g, plan)
        for m in ("lcc", "fr", "sr"):
            v = trace.metric(m)
            if np.any(np.diff(v) > 1e-12):
                bad.append((k, m))
        ncc = trace.metric("ncc")
        ncc_rises += bool(ncc.max() > ncc[0])
        if ncc[-1] > ncc.max():
            bad.append((k, "ncc"))
    report(3, not bad, f"500 complete-attack runs, {len(bad)} violations; "
                       f"NCC rose above its start in {ncc_rises} runs")


# -- 4. targeted vs random ----------------------------------------------------------------


def test_criterion_4_targeted_vs_random():
    t = table("complete")
    od, bw, rnd = (t[s][("fr", 50)] for s in ("OD", "BW", "random"))
    elapsed = _timings["complete-random"]
    ok = (_stages(od) <= _stages(bw) <= rnd.mean and rnd.mean >= 2 * _stages(od) and elapsed < 60)
    report(4, ok, f"stages to 50% FR: OD {od.stages}, BW {bw.stages}, random mean {rnd.mean:.2f} "
                  f"(median {rnd.median:g}); 10,000 random trials in {elapsed:.1f} s")


# -- 5. partial vs complete ---------------------------------------------------------------


def test_criterion_5_partial_vs_complete():
    full, part = table("complete"), table("partial")
    failures = []
    for name in STRATEGIES:
        for m in TABLE_METRICS:
            for lv in LEVELS:
                c, p = full[name][(m, lv)], part[name][(m, lv)]
                if _stages(p) < _stages(c):
                    failures.append(f"{name} {m} {lv}%: partial {p.stages} < complete {c.stages}")
    od_c, od_p = full["OD"][("fr", 80)].stages, part["OD"][("fr", 80)].stages
    report(5, not failures, f"{len(STRATEGIES) * len(TABLE_METRICS) * len(LEVELS) - len(failures)}/27 "
                            f"cells ordered; 80% FR OD-targeted partial {od_p} vs complete {od_c}"
                            + ("; " + "; ".join(failures) if failures else ""))


# -- 6. limiting case ------------------------------------------------------------------------


def test_criterion_6_unit_step_is_complete():
    rng = np.random.default_rng(6)
    diffs = 0
    for k in range(100):
        n = int(rng.integers(3, 25))
        q = float(rng.choice([0.25, 0.5, 0.75]))
        g = oracles.make_graph(n, oracles.random_edges(rng, n))
        sel = dict(selection="random") if k % 2 else dict(selection="targeted",
                                                            basis="weighted_out_degree")
        common = dict(qof_fraction=q, seed=1000 + k, **sel)
        full = run_attack(g, AttackPlan(strength="complete", **common))
        part = run_attack(g, AttackPlan(strength="partial", partial_step=1.0,
                                        acceptable_service_fraction=q, **common))
        if full.csv_rows()[1:] != part.csv_rows()[1:]:
            diffs += 1
    report(6, diffs == 0, f"{100 - diffs}/100 random graphs give identical traces")


# -- 7. optimizer ------------------------------------------------------------------------------


def _random_toy(rng, slots: int):
    """8-11 processes, ``slots`` of them with exactly two parents, the rest with at most one."""
    n = int(rng.integers(8, 12))
    cand = sorted(rng.choice(np.arange(3, n + 1), size=slots, replace=False).tolist())
    edges = {}
    for v in range(2, n + 1):
        if v in cand:
            for p in rng.choice(np.arange(1, v), size=2, replace=False).tolist():
                edges[(p, v)] = 0.5
        elif rng.random() < 0.75:
            edges[(int(rng.integers(1, v)), v)] = 1.0
    return n, edges, cand


def _replay(n, edges, cand, spec):
    """Independent full replay: rebuild every grid graph from scratch and attack it.

    Returns the best objective and the first assignment (descending grid order) reaching it.
    """
    parents = [sorted(p for p, t in edges if t == v) for v in cand]
    best = best_combo = None
    for combo in itertools.product(*(list(compositions(2)) for _ in cand)):
        w = dict(edges)
        for v, ps, tenths in zip(cand, parents, combo):
            for p, t in zip(ps, tenths):
                w[(p, v)] = t / 10
        trace = run_attack(oracles.make_graph(n, w), spec.plan)
        k = oracles.first_crossing(trace.metric(spec.objective).tolist(), spec.level)
        obj = len(trace.stages) + 1 if k is None else k
        if best is None or obj > best:
            best, best_combo = obj, combo
    return best, best_combo


def test_criterion_7_optimizer():
    rng = np.random.default_rng(7)
    ok, instances, varied = True, 0, 0
    for k in range(60):
        slots = 1 + k % 2
        n, edges, cand = _random_toy(rng, slots)
        spec = OptimizationSpec(objective=("sr", "fr", "lcc")[k % 3], level=(50, 80)[k % 2])
        res = optimize(oracles.make_graph(n, edges), spec, jobs=1)
        want, combo = _replay(n, edges, cand, spec)
        ok &= (res.objective, res.best.tenths) == (want, combo) and len(res.log) == 11 ** slots
        instances += 1
        varied += len({obj for _, obj, _ in res.log}) > 1

    g = synthetic()
    spec = OptimizationSpec(mode="random_sampling", samples=200, seed=7)
    res = optimize(g, spec)
    rng = np.random.default_rng(8)
    cands = candidates(g)
    pool = [evaluate_assignment(g, random_assignment(cands, rng), spec) for _ in range(200)]
    median = float(np.median(pool))
    ok &= res.objective >= median and varied >= 10
    report(7, ok, f"{instances} toy instances (11 or 121 assignments, {varied} with non-flat "
                  f"objectives) match full replay; bundled scenario sampled best {res.objective} "
                  f">= random median {median:g} (current weights {res.baseline})")


# -- 8. determinism ---------------------------------------------------------------------------


def _digests(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}


def test_criterion_8_rerun_determinism(tmp_path, capsys):
    runs = {
        "build": ["build", "synthetic-iun"],
        "attack": ["attack", "synthetic-iun", "--strength", "partial", "--selection", "targeted",
                   "--basis", "betweenness", "--ranking-mode", "adaptive"],
        "campaign": ["campaign", "synthetic-iun", "--trials", str(TRIALS), "--seed", "7",
                     "--jobs", "1"],
        "optimize": ["optimize", "synthetic-iun", "--mode", "random_sampling", "--samples", "30"],
        "centrality": ["centrality", "synthetic-iun", "--basis", "pagerank"],
    }
    failures = []
    for name, argv in runs.items():
        first = tmp_path / name
        if cli_main(argv + ["--out", str(first)]) != 0:
            failures.append(f"{name} failed")
            continue
        for jobs in ("1", "3"):
            again = tmp_path / f"{name}-rerun{jobs}"
            code = cli_main(["rerun", str(first), "--out", str(again), "--jobs", jobs, "--check"])
            if code != 0 or _digests(first) != _digests(again):
                failures.append(f"{name} rerun --jobs {jobs}")
    capsys.readouterr()
    report(8, not failures, f"{len(runs)} commands re-run from manifests under --jobs 1 and 3"
                            + (": " + ", ".join(failures) if failures else ", all CSVs byte-identical"))


# -- 9. FR / SR spot checks -------------------------------------------------------------------


def test_criterion_9_formula_spot_checks():
    g = oracles.make_graph(4, {(1, 2): 1.0, (2, 3): 1.0, (3, 4): 1.0})
    intact = snapshot(g)
    two = ProcessGraph()
    for v in range(1, 5):
        two.add_node(v)
    two.add_edge(1, 2, 1.0)
    two.add_edge(3, 4, 1.0)
    two = two.freeze()
    halves = g.clone()
    halves.scale[:] = 0.5
    fr_two, sr_half = snapshot(two).fr, snapshot(halves).sr
    ok = intact.fr == 1.0 and intact.sr == 1.0 and abs(fr_two - 1 / 3) < 1e-15 and sr_half == 0.5
    report(9, ok, f"intact FR={intact.fr} SR={intact.sr}; two 2-node components FR={fr_two!r}; "
                  f"half-scaled SR={sr_half}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
