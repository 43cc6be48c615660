import numpy as np
import pytest
from hypothesis import given, strategies as st

from hfrobust.builder import build_graph, scenario_path
from hfrobust.experiments import CampaignSpec, run_campaign, stages_to_degradation
from hfrobust.graph import GraphError, ProcessGraph
from hfrobust.percolation import (AttackPlan, cascade, run_attack, run_complete_attack,
                                  run_partial_attack, select_next, simulate)
from hfrobust.centrality import ranking_indices, rank_nodes

from conftest import graphs
import oracles

R, P, C1, C2, S = 1, 2, 3, 4, 5


def five():
    g = ProcessGraph()
    for v in (R, P, C1, C2, S):
        g.add_node(v)
    g.add_edge(R, C1, 1.0)
    g.add_edge(R, C2, 0.5)
    g.add_edge(P, C2, 0.5)
    g.add_edge(C2, S, 1.0)
    return g.freeze()


def chain(n):
    g = ProcessGraph()
    for v in range(1, n + 1):
        g.add_node(v)
    for v in range(1, n):
        g.add_edge(v, v + 1, 1.0)
    return g.freeze()


class TestCascade:
    def test_five_node_trace(self, backend):
        g = five()
        assert cascade(g, R, qof_fraction=0.5) == [C1]
        assert g.nodes() == [P, C2, S]
        assert g.weight(C2, S) == 0.5
        assert g.out_weight(C2) == 0.5

    def test_leaf(self, backend):
        assert cascade(five(), S) == []

    def test_total_dependency_chain(self, backend):
        g = chain(3)
        assert cascade(g, 1) == [2, 3]
        assert g.nodes() == []

    def test_unknown_and_removed(self):
        g = five()
        with pytest.raises(GraphError, match="unknown"):
            cascade(g, 42)
        cascade(g, R)
        with pytest.raises(GraphError, match="removed"):
            cascade(g, R)

    def test_losing_children_can_remove_a_parent(self, backend):
        # b keeps half its input and a lenient threshold, but c (strict threshold) fails
        # and takes b's whole live out-weight with it
        a, x, b, c, y = 1, 2, 3, 4, 5
        g = ProcessGraph()
        g.add_node(a)
        g.add_node(x)
        g.add_node(b, qof_fraction=0.25)
        g.add_node(c, qof_fraction=0.75)
        g.add_node(y)
        for s_, t, w in [(a, b, 0.5), (x, b, 0.5), (b, c, 1.0), (c, y, 1.0)]:
            g.add_edge(s_, t, w)
        g = g.freeze()
        assert cascade(g, a) == [b, c, y]
        assert g.nodes() == [x]

    @given(graphs(max_nodes=9), st.integers(0, 2**31), st.sampled_from([0.25, 0.5, 0.75]))
    def test_matches_fixed_point_oracle(self, g, seed, q):
        rng = np.random.default_rng(seed)
        att = int(rng.choice(g.nodes()))
        edges = oracles.weights_of(g)
        ids = g.nodes()
        alive, scale = set(ids), {v: 1.0 for v in ids}
        want = oracles.cascade(edges, alive, scale, {v: 0.0 for v in ids}, {v: q for v in ids}, att)
        got = cascade(g, att, qof_fraction=q)
        assert got == want
        assert set(g.nodes()) == alive
        for v in alive:
            assert g.scale[g.index(v)] == pytest.approx(scale[v], abs=1e-9)

    @given(graphs(max_nodes=8), st.integers(0, 2**31))
    def test_surviving_attacked_node_matches_oracle(self, g, seed):
        rng = np.random.default_rng(seed)
        att = int(rng.choice(g.nodes()))
        d = float(rng.uniform(0.1, 0.6))
        i = g.index(att)
        g.degradation[i] = d
        g.scale[i] = 1.0 - d
        edges = oracles.weights_of(g)
        ids = g.nodes()
        alive, scale = set(ids), {v: 1.0 for v in ids}
        scale[att] = 1.0 - d
        degr = {v: 0.0 for v in ids}
        degr[att] = d
        want = oracles.cascade(edges, alive, scale, degr, {v: 0.5 for v in ids}, att,
                               remove_attacked=False)
        assert cascade(g, att, remove_attacked=False) == want
        assert set(g.nodes()) == alive


class TestPlans:
    def test_targeted_basis_guard(self):
        with pytest.raises(ValueError, match="allow_any_basis"):
            AttackPlan(selection="targeted", basis="pagerank")
        AttackPlan(selection="targeted", basis="pagerank", allow_any_basis=True)

    @pytest.mark.parametrize("kw", [dict(partial_step=0), dict(partial_step=1.5),
                                    dict(random_step=(0.5, 0.2)), dict(qof_fraction=2),
                                    dict(acceptable_service_fraction=-1), dict(stop_at_nodes=-1),
                                    dict(seed=-1), dict(strength="medium")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            AttackPlan(**kw)

    def test_round_trip(self):
        p = AttackPlan(strength="partial", random_step=(0.1, 0.3), seed=9)
        assert AttackPlan.from_dict(p.to_dict()) == p

    def test_wrong_runner(self):
        with pytest.raises(ValueError):
            run_complete_attack(chain(4), AttackPlan(strength="partial"))
        with pytest.raises(ValueError):
            run_partial_attack(chain(4), AttackPlan())


class TestSelect:
    def test_first_surviving_ranked(self):
        g = ProcessGraph()
        for v in (2, 5, 9):
            g.add_node(v)
        g = g.freeze()
        g.remove_node(9)
        plan = AttackPlan(selection="targeted")
        assert select_next(g, plan, ranking=[9, 5, 2]) == 5
        assert select_next(g, plan, ranking=[5, 9, 2]) == 5

    def test_random_reproducible(self):
        g = chain(10)
        picks = [[select_next(g, AttackPlan(), rng) for _ in range(5)]
                 for rng in (np.random.default_rng(4), np.random.default_rng(4))]
        assert picks[0] == picks[1]

    def test_empty(self):
        g = chain(2)
        g.remove_node(1)
        g.remove_node(2)
        with pytest.raises(GraphError):
            select_next(g, AttackPlan(), np.random.default_rng(0))

    def test_adaptive_betweenness_reranks(self):
        g = chain(6)
        plan = AttackPlan(selection="targeted", basis="betweenness", ranking_mode="adaptive")
        assert select_next(g, plan) in (3, 4)
        g.remove_node(select_next(g, plan))
        want = oracles.betweenness(g.nodes(), {(e.source, e.target): 1 for e in g.edges()})
        best = min(want, key=lambda v: (-want[v], v))
        assert select_next(g, plan) == best


class TestRuns:
    def test_stop_at_nodes(self, backend):
        trace = run_attack(chain(3), AttackPlan(seed=3))
        assert len(trace.stages) == 1
        assert trace.records[-1].lcc <= 2

    def test_complete_targeted_ends_small(self):
        g = build_graph(scenario_path("conceptual-iun"))
        trace = run_attack(g, AttackPlan(selection="targeted"))
        assert len(trace.surviving_at(len(trace.stages), [n.id for n in g.all_nodes()])) <= 2

    def test_partial_step_arithmetic(self, backend):
        g = ProcessGraph()
        for v in (1, 2, 3, 4):
            g.add_node(v)
        g.add_edge(1, 2, 1.0)
        g = g.freeze()
        plan = AttackPlan(strength="partial", selection="targeted", partial_step=0.2,
                          acceptable_service_fraction=0.5)
        trace = run_attack(g, plan)
        assert [r.attacked for r in trace.stages[:3]] == [1, 1, 1]
        assert trace.metric("sr")[:3] == pytest.approx([1.0, 0.8, 0.6])
        assert trace.removed_at[1] == 3 and trace.removed_at[2] == 3
        assert trace.attacked_removed == {1: False, 2: False, 3: True, **{
            s: trace.attacked_removed[s] for s in range(4, len(trace.stages) + 1)}}

    def test_random_step_draws_are_seeded(self):
        g = chain(6)
        plan = AttackPlan(strength="partial", random_step=(0.1, 0.5), seed=5)
        assert run_attack(g, plan).csv_rows() == run_attack(g, plan).csv_rows()
        assert not plan.deterministic

    def test_same_seed_same_trace(self, tmp_path):
        g = build_graph(scenario_path("synthetic-iun"))
        for k in (1, 2):
            run_attack(g, AttackPlan(seed=11)).to_csv(tmp_path / f"t{k}.csv")
        assert (tmp_path / "t1.csv").read_bytes() == (tmp_path / "t2.csv").read_bytes()

    def test_trace_csv(self):
        rows = run_attack(five(), AttackPlan(selection="targeted")).csv_rows()
        assert rows[0] == ["stage", "attacked_id", "cascade_removed_ids", "lcc", "ncc", "fr", "sr"]
        assert rows[1][:3] == ["0", "", ""]
        assert rows[2][1] == "1" and rows[2][2] == "3"

    def test_too_small(self):
        with pytest.raises(GraphError, match="stop_at_nodes"):
            run_attack(chain(2), AttackPlan())
        g = ProcessGraph()
        g.add_node(1)
        with pytest.raises(GraphError, match="frozen"):
            run_attack(g, AttackPlan(stop_at_nodes=0))

    def test_input_graph_untouched(self):
        g = five()
        _, residual = simulate(g, AttackPlan(selection="targeted"))
        assert g.nodes() == [1, 2, 3, 4, 5]
        assert residual.number_of_nodes() <= 2

    def test_static_ranking_from_intact_graph(self):
        g = five()
        ranked = rank_nodes(g, "weighted_out_degree")
        trace = run_attack(g, AttackPlan(selection="targeted"))
        order = [r.attacked for r in trace.stages]
        assert order == [v for v in ranked if v in order]
        assert ranking_indices(g, "weighted_out_degree").tolist() == [g.index(v) for v in ranked]

    def test_partial_sr_never_increases(self):
        g = build_graph(scenario_path("synthetic-iun"))
        trace = run_attack(g, AttackPlan(strength="partial", partial_step=0.2, seed=2))
        assert np.all(np.diff(trace.metric("sr")) <= 1e-12)

    def test_targeted_beats_random_on_conceptual_scenario(self):
        g = build_graph(scenario_path("conceptual-iun"))
        fr0 = stages_to_degradation(run_attack(g, AttackPlan(selection="targeted")), "fr", 90)
        res = run_campaign(g, CampaignSpec(AttackPlan(), trials=500))
        k = res.stages_to("fr", 90)
        assert fr0 is not None and (k >= 0).all()
        assert fr0 < k.mean()


@given(graphs(min_nodes=3, max_nodes=12), st.integers(0, 1000),
       st.sampled_from(["random", "targeted"]), st.sampled_from(["complete", "partial"]))
def test_trace_invariants(g, seed, selection, strength):
    trace = run_attack(g, AttackPlan(strength=strength, selection=selection, seed=seed))
    for m in ("lcc", "fr", "sr"):
        assert np.all(np.diff(trace.metric(m)) <= 1e-12)
    gone = set()
    for r in trace.stages:
        assert r.attacked not in gone
        fresh = set(r.cascade_removed)
        assert not fresh & gone
        gone |= fresh | ({r.attacked} if trace.attacked_removed[r.stage] else set())
    assert set(trace.removed_at) == gone
