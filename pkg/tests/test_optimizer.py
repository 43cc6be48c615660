import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hfrobust.experiments import stages_to_degradation
from hfrobust.graph import GraphError, ProcessGraph
from hfrobust.optimizer import (OptimizationSpec, WeightAssignment, candidates, compositions,
                                count_assignments, current_assignment, enumerate_assignments,
                                evaluate_assignment, optimize, random_assignment)
from hfrobust.percolation import AttackPlan, run_attack


def fan_in(k, extra=0):
    """Node 100 with parents 1..k; optionally a second node 200 with two parents."""
    g = ProcessGraph()
    for v in range(1, k + 1):
        g.add_node(v)
    g.add_node(100)
    for v in range(1, k + 1):
        g.add_edge(v, 100, 1 / k)
    if extra:
        g.add_node(200)
        g.add_edge(1, 200, 0.5)
        g.add_edge(2, 200, 0.5)
    return g.freeze()


def front_line(w_hub, w_safe):
    """Node 5 depends on 2 (fed by the busy hub 1) and on the quiet source 3."""
    g = ProcessGraph()
    for v in range(1, 8):
        g.add_node(v)
    for s, t, w in [(1, 2, 1.0), (1, 4, 1.0), (1, 6, 1.0), (2, 5, w_hub), (3, 5, w_safe),
                    (5, 7, 1.0)]:
        g.add_edge(s, t, w)
    return g.freeze()


class TestEnumeration:
    def test_counts(self):
        assert len(list(enumerate_assignments(fan_in(2)))) == 11
        assert len(list(enumerate_assignments(fan_in(3)))) == 66 == math.comb(12, 2)
        assert len(list(enumerate_assignments(fan_in(2, extra=1)))) == 121
        assert count_assignments(fan_in(2, extra=1)) == 121

    def test_descending_lexicographic(self):
        seq = [a.tenths[0] for a in enumerate_assignments(fan_in(2))]
        assert seq[0] == (10, 0) and seq[-1] == (0, 10)
        assert seq == sorted(seq, reverse=True)

    @given(st.integers(1, 5))
    def test_compositions_exhaustive(self, k):
        brute = {c for c in itertools.product(range(11), repeat=k) if sum(c) == 10}
        got = list(compositions(k))
        assert len(got) == len(set(got)) and set(got) == brute

    def test_no_candidates(self):
        g = ProcessGraph()
        g.add_node(1)
        g.add_node(2)
        g.add_edge(1, 2, 1.0)
        with pytest.raises(GraphError, match="two or more parents"):
            next(enumerate_assignments(g.freeze()))

    def test_candidates(self):
        assert candidates(fan_in(3, extra=1)) == [(100, (1, 2, 3)), (200, (1, 2))]

    @given(st.integers(0, 2**31))
    def test_random_assignments_are_valid(self, seed):
        a = random_assignment(fan_in(4, extra=1), np.random.default_rng(seed))
        assert all(sum(t) == 10 and min(t) >= 0 for t in a.tenths)


class TestAssignments:
    def test_invalid_sum(self):
        with pytest.raises(ValueError, match="sum to 10"):
            WeightAssignment((100,), ((1, 2),), ((3, 6),))
        with pytest.raises(ValueError):
            WeightAssignment((100,), ((1, 2),), ((11, -1),))

    def test_identity_assignment(self):
        g = front_line(0.5, 0.5)
        spec = OptimizationSpec(objective="fr", level=50)
        ident = current_assignment(g)
        assert ident.tenths == ((5, 5),)
        trace = run_attack(g, spec.plan)
        k = stages_to_degradation(trace, "fr", 50)
        assert evaluate_assignment(g, ident, spec) == (len(trace.stages) + 1 if k is None else k)

    def test_off_grid_weights(self):
        with pytest.raises(GraphError, match="grid"):
            current_assignment(fan_in(3))

    def test_label(self):
        assert current_assignment(fan_in(2, extra=1)).label() == "100:5/5 200:5/5"


class TestOptimize:
    def test_brute_force_on_six_nodes(self):
        # one candidate node, all 11 grid points replayed from scratch
        spec = OptimizationSpec(objective="sr", level=50)
        res = optimize(front_line(0.5, 0.5), spec, jobs=1)
        replay = {}
        for a in range(11):
            trace = run_attack(front_line(a / 10, 1 - a / 10), spec.plan)
            k = stages_to_degradation(trace, "sr", 50)
            replay[(a, 10 - a)] = len(trace.stages) + 1 if k is None else k
        assert res.objective == max(replay.values())
        first_best = next(t for t in sorted(replay, reverse=True) if replay[t] == res.objective)
        assert res.best.tenths == (first_best,)
        assert [obj for _, obj, _ in res.log] == [replay[t] for t in sorted(replay, reverse=True)]

    def test_weight_shifts_to_safe_parent(self):
        res = optimize(front_line(0.5, 0.5), OptimizationSpec(), jobs=1)
        hub, safe = res.best.tenths[0]
        assert safe > hub
        assert res.objective >= res.baseline

    def test_single_sample(self):
        spec = OptimizationSpec(mode="random_sampling", samples=1, seed=3)
        res = optimize(front_line(0.5, 0.5), spec)
        assert len(res.log) == 1 and res.best == res.log[0][2]
        assert res.best == random_assignment(candidates(front_line(0.5, 0.5)),
                                             np.random.default_rng(3))

    def test_sampling_with_full_coverage_matches_exhaustive(self):
        g = front_line(0.5, 0.5)
        ex = optimize(g, OptimizationSpec(objective="fr", level=50))
        sm = optimize(g, OptimizationSpec(objective="fr", level=50, mode="random_sampling",
                                          samples=400, seed=1))
        assert len({a.tenths for _, _, a in sm.log}) == 11
        assert (sm.objective, sm.best) == (ex.objective, ex.best)

    def test_cap(self):
        with pytest.raises(ValueError, match="random_sampling"):
            optimize(fan_in(3, extra=1), OptimizationSpec(cap=100))

    def test_jobs_do_not_change_log(self):
        g = fan_in(2, extra=1)
        spec = OptimizationSpec(plan=AttackPlan(selection="targeted"))
        a, b = optimize(g, spec, jobs=1), optimize(g, spec, jobs=3)
        assert a.log_rows() == b.log_rows()

    @pytest.mark.parametrize("kw", [dict(objective="xx"), dict(level=0), dict(samples=0),
                                    dict(mode="genetic")])
    def test_spec_validation(self, kw):
        with pytest.raises(ValueError):
            OptimizationSpec(**kw)
