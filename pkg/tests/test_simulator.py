import numpy as np
import pytest

from skillguard.counterpart import AppRecord
from skillguard.exceptions import UnknownSkillError
from skillguard.fixtures import load_fixture
from skillguard.graph import PhoneticGraph, Skill, build_graph
from skillguard.identity import CorpusFetcher, MapperEntry, MapperTable, build_mapper_table
from skillguard.planner import SkillState
from skillguard.simulator import (
    ConfusionModel,
    ErrorRates,
    Outcome,
    SweepRow,
    UserTrace,
    equal_error_point,
    evaluate_user,
    identical_sets,
    malicious_skills,
    matched_for_trace,
    rates_for_plan,
    run_q1_experiment,
    simulate_invocation,
    sweep_thresholds,
)
from skillguard.synthetic import generate_world

E, D = SkillState.ENABLED, SkillState.DISABLED


def toy(dist, reviews=None, threshold=400):
    n = len(dist)
    ids = [f"s{k}" for k in range(n)]
    reviews = reviews or [0] * n
    cat = [Skill(i, i, i, reviews=r) for i, r in zip(ids, reviews)]
    return cat, PhoneticGraph(ids, np.asarray(dist, dtype=float), threshold)


@pytest.fixture(scope="module")
def identical(cmu, cmu_costs):
    cat = load_fixture("identical_sets", cmu)
    return cat, build_graph(cat, cmu_costs, 400)


@pytest.fixture(scope="module")
def similar(cmu, cmu_costs):
    cat = load_fixture("similar_cluster", cmu)
    return cat, build_graph(cat, cmu_costs, 400)


class TestSimulateInvocation:
    def test_popularity_decides_identical_phrases(self, identical):
        cat, graph = identical
        stock = next(ids for ids in identical_sets(cat) if len(ids) == 3
                     and cat[[s.id for s in cat].index(ids[0])].invocation == "stock market")
        skills = {s.id: s for s in cat}
        top = min(stock, key=lambda s: (-skills[s].reviews, s))
        for target in stock:
            out = simulate_invocation(target, cat, graph, {})
            assert out.winner == top
            assert out.kind == (Outcome.CORRECT if target == top else Outcome.INCORRECT)

    def test_enabled_target_with_disabled_neighbors(self, identical):
        cat, graph = identical
        for target in [s.id for s in cat]:
            states = {n: D for n in graph.with_threshold(400).neighbor_ids(target)}
            states[target] = E
            assert simulate_invocation(target, cat, graph, states).kind == Outcome.CORRECT

    def test_disabled_target_alone(self):
        cat, graph = toy([[0, 900], [900, 0]])
        assert simulate_invocation("s0", cat, graph, {"s0": D}).kind == Outcome.NONE

    def test_unknown_target(self):
        cat, graph = toy([[0]])
        with pytest.raises(UnknownSkillError):
            simulate_invocation("zz", cat, graph, {})

    def test_enabled_beats_closer_default(self):
        cat, graph = toy([[0, 0, 300], [0, 0, 300], [300, 300, 0]], reviews=[0, 50, 0])
        assert simulate_invocation("s0", cat, graph, {}).winner == "s1"
        assert simulate_invocation("s0", cat, graph, {"s2": E}).winner == "s2"

    def test_outside_radius_never_wins(self):
        cat, graph = toy([[0, 401], [401, 0]], reviews=[0, 99])
        assert simulate_invocation("s0", cat, graph, {}).kind == Outcome.CORRECT
        cat, graph = toy([[0, 400], [400, 0]], reviews=[0, 99])
        assert simulate_invocation("s0", cat, graph, {"s0": D}).winner == "s1"

    def test_fail_prob(self):
        cat, graph = toy([[0]])
        model = ConfusionModel(fail_prob=1.0)
        assert simulate_invocation("s0", cat, graph, {}, model).kind == Outcome.NONE

    def test_deterministic(self, similar):
        cat, graph = similar
        model = ConfusionModel(fail_prob=0.3, mishear_prob=0.5, rng_seed=7)
        runs = [[simulate_invocation(s.id, cat, graph, {}, model, trial=k) for k, s in enumerate(cat)]
                for _ in range(2)]
        assert runs[0] == runs[1]

    def test_defended_zero_random_catalogs(self):
        rng = np.random.default_rng(0)
        for k in range(1000):
            n = int(rng.integers(1, 12))
            upper = np.triu(rng.choice([0.0, 100.0, 250.0, 399.0, 400.0, 650.0], size=(n, n)), 1)
            cat, graph = toy(upper + upper.T, reviews=[int(r) for r in rng.integers(0, 5, n)])
            target = f"s{int(rng.integers(n))}"
            radius = float(rng.choice([0.0, 250.0, 400.0, 1000.0]))
            model = ConfusionModel(radius, 0.0, k, float(rng.uniform()))
            states = {s: D for s in graph.with_threshold(radius).neighbor_ids(target)}
            states[target] = E
            assert simulate_invocation(target, cat, graph, states, model, k).kind == Outcome.CORRECT


class TestQ1:
    def test_identical(self, identical):
        cat, graph = identical
        res = run_q1_experiment("identical", cat, graph)
        assert len(identical_sets(cat)) == 8 and len(cat) == 28
        assert res.counts("defended") == {"correct": 28, "incorrect": 0, "none": 0}
        assert res.counts("baseline")["incorrect"] > 0
        assert res.counts("baseline") == {"correct": 3, "incorrect": 5, "none": 0}

    def test_similar(self, similar):
        cat, graph = similar
        res = run_q1_experiment("similar", cat, graph)
        assert res.counts("defended")["incorrect"] == 0
        assert all(d <= 400 for d in res.incorrect_distances(graph))
        assert res.counts("baseline")["incorrect"] >= res.counts("defended")["incorrect"]

    def test_dominance_under_noise(self, identical, similar):
        for cat, graph in (identical, similar):
            for seed in range(5):
                model = ConfusionModel(fail_prob=0.1, mishear_prob=0.4, rng_seed=seed)
                scen = "identical" if cat is identical[0] else "similar"
                res = run_q1_experiment(scen, cat, graph, model)
                assert res.counts("defended")["incorrect"] == 0
                assert all(d <= 400 for d in res.incorrect_distances(graph))

    def test_unknown_scenario(self, similar):
        with pytest.raises(ValueError):
            run_q1_experiment("loud", *similar)


class TestEvaluateUser:
    def setup_method(self):
        self.cat, self.graph = toy([[0, 100, 900], [100, 0, 900], [900, 900, 0]])
        self.table = MapperTable(1, 400, (MapperEntry("s0", "u", "a.com", "cert-a"),))

    def test_lone_neighbor_disabled(self):
        trace = UserTrace("u", apps=(AppRecord("com.a", "cert-a"),), used_skills=frozenset({"s0"}))
        rates = evaluate_user(trace, self.table, self.graph, 400, {})
        assert (rates.frr, rates.far) == (0.0, 0.0)
        assert rates.setup_seconds == pytest.approx(2.5 + 3.08)

    def test_unmatched_user_misses_malicious(self):
        trace = UserTrace("u", used_skills=frozenset({"s0"}))
        rates = evaluate_user(trace, self.table, self.graph, 400, {})
        assert (rates.frr, rates.far) == (0.0, 1.0)

    def test_frr_arithmetic(self):
        used = {f"u{k}" for k in range(10)}
        assert rates_for_plan(used, set(), {"u3", "x"}, 400).frr == pytest.approx(0.10)

    def test_empty_conventions(self):
        r = rates_for_plan(set(), set(), {"x"}, 0)
        assert (r.frr, r.far) == (0.0, 0.0)

    def test_malicious_strict(self):
        _, graph = toy([[0, 400, 399.999], [400, 0, 900], [399.999, 900, 0]])
        assert malicious_skills({"s0"}, graph) == {"s2"}

    def test_rate_bounds(self):
        with pytest.raises(ValueError):
            ErrorRates(0, 1.5, 0)


def brute_force_sweep(world, costs, grid):
    """Rebuild graph and table from scratch at every threshold."""
    rows = []
    certs = CorpusFetcher(world.pages).domain_certs()
    for t in grid:
        graph = build_graph(world.catalog, costs, t)
        table = build_mapper_table(world.catalog, costs, t, world.pages, graph)
        rates = [evaluate_user(tr, table, graph, t, certs) for tr in world.traces]
        n = len(rates)
        rows.append((t, sum(r.far for r in rates) / n, sum(r.frr for r in rates) / n,
                     sum(r.setup_seconds for r in rates) / n))
    return rows


GRID = list(range(0, 1001, 50))


class TestSweep:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_brute_force_small(self, cmu, cmu_costs, seed):
        world = generate_world(cmu, cmu_costs, n_skills=20, n_users=8, seed=seed)
        res = sweep_thresholds(world.traces, world.catalog, cmu_costs, world.pages, GRID)
        expected = brute_force_sweep(world, cmu_costs, GRID)
        for row, (t, far, frr, setup) in zip(res.rows, expected):
            assert row.threshold == t
            assert row.far == pytest.approx(far, abs=1e-12)
            assert row.frr == pytest.approx(frr, abs=1e-12)
            assert row.setup_seconds == pytest.approx(setup, abs=1e-9)
        fars = [r.far for r in res.rows]
        frrs = [r.frr for r in res.rows]
        assert all(a >= b for a, b in zip(fars, fars[1:]))
        assert all(a <= b for a, b in zip(frrs, frrs[1:]))
        assert fars[0] == max(fars) and frrs[-1] == max(frrs)

    def test_full_threshold_clears_matched_users(self, cmu, cmu_costs):
        world = generate_world(cmu, cmu_costs, n_skills=60, n_users=20, seed=5, account_linking_prob=1.0,
                               backlink_prob=1.0, evidence_prob=1.0, lure_prob=0.0)
        graph = build_graph(world.catalog, cmu_costs, 1000)
        table = build_mapper_table(world.catalog, cmu_costs, 1000, world.pages, graph)
        certs = CorpusFetcher(world.pages).domain_certs()
        checked = 0
        for trace in world.traces:
            if trace.used_skills <= matched_for_trace(trace, table, certs):
                checked += 1
                assert evaluate_user(trace, table, graph, 1000, certs).far == 0.0
        assert checked > 0

    def test_grid_validation(self, cmu, cmu_costs):
        world = generate_world(cmu, cmu_costs, n_skills=10, n_users=2, seed=0)
        with pytest.raises(ValueError):
            sweep_thresholds(world.traces, world.catalog, cmu_costs, world.pages, [])
        with pytest.raises(ValueError):
            sweep_thresholds(world.traces, world.catalog, cmu_costs, world.pages, [100, 50])

    def test_eer_first_on_ties(self):
        rows = [SweepRow(0, 0.6, 0.0, 0), SweepRow(50, 0.3, 0.1, 0), SweepRow(100, 0.2, 0.4, 0),
                SweepRow(150, 0.0, 0.2, 0)]
        assert equal_error_point(rows) == (50, pytest.approx(0.2))

    def test_csv_and_summary(self, cmu, cmu_costs):
        world = generate_world(cmu, cmu_costs, n_skills=20, n_users=4, seed=1)
        res = sweep_thresholds(world.traces, world.catalog, cmu_costs, world.pages, GRID)
        lines = res.to_csv().splitlines()
        assert lines[0] == "threshold,far,frr,setup_seconds" and len(lines) == 22
        s = res.summary()
        assert s["threshold"] in GRID
        assert min(min(r.far, r.frr) for r in res.rows) <= s["eer"] <= max(max(r.far, r.frr) for r in res.rows)


def test_trace_roundtrip(cmu, cmu_costs):
    world = generate_world(cmu, cmu_costs, n_skills=20, n_users=3, seed=2)
    for trace in world.traces:
        assert UserTrace.from_dict(trace.to_dict()) == trace
