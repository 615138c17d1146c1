"""Planner tests against an independent breadth-first oracle.

Worked arithmetic used below: with u0 = 0.5, rate 0.3, threshold 0.7 the
target band is 0.3 and the decay sequence runs 0.5, 0.35, 0.245, so the
bound is 2.  With threshold 0.5 and rate 0.5 starting exactly at the 0.5
target, the strict inequality forces one step (0.25 < 0.5), not zero.
"""

from collections import deque

import numpy as np
import pytest

from beliefplan.core import (
    GroundPredicate,
    ProbabilisticState,
    Relation,
    parse_predicate,
)
from beliefplan.mrf import CapacityError
from beliefplan.planner import (
    Goal,
    GroundedAction,
    InfoAction,
    PlannerOptions,
    SymbolicWorldState,
    apply,
    astar,
    choose_info_action,
    clear,
    convergence_bound,
    ground_domain,
    handempty,
    heuristic_unsat,
    holding,
    ig_value,
    on,
    ontable,
    parse_goal,
    plan_under_uncertainty,
    random_instance,
    world_state_from_beliefs,
)
from beliefplan.scene import NoiseConfig, PlanningEnvironment, generate_scene


def bfs_optimal_length(init: SymbolicWorldState, goal: Goal) -> int | None:
    """Exhaustive shortest-path oracle, independent of the A* machinery."""
    objects = sorted(init.objects() | goal.objects())
    actions = [a for a in ground_domain(objects) if a.belief_effect is None]
    goal_atoms = goal.atoms()
    start = init.atoms
    if goal_atoms <= start:
        return 0
    dist = {start: 0}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for a in actions:
            if a.preconditions <= s:
                ns = (s - a.delete) | a.add
                if ns not in dist:
                    dist[ns] = dist[s] + 1
                    if goal_atoms <= ns:
                        return dist[ns]
                    queue.append(ns)
    return None


def run_plan(state: SymbolicWorldState, plan) -> SymbolicWorldState:
    for action in plan:
        state = apply(state, action)
    return state


class TestWorldState:
    def test_from_stacks(self):
        state = SymbolicWorldState.from_stacks([["a", "b"], ["c"]])
        assert state.atoms == frozenset(
            {ontable("a"), on("b", "a"), clear("b"), ontable("c"), clear("c"), handempty()}
        )

    def test_double_support_rejected(self):
        with pytest.raises(ValueError):
            SymbolicWorldState(
                frozenset({on("a", "b"), on("a", "c"), ontable("b"), ontable("c"), handempty()})
            )

    def test_holding_plus_handempty_rejected(self):
        with pytest.raises(ValueError):
            SymbolicWorldState(frozenset({holding("a"), handempty()}))

    def test_neither_holding_nor_handempty_rejected(self):
        with pytest.raises(ValueError):
            SymbolicWorldState(frozenset({ontable("a"), clear("a")}))

    def test_cycle_rejected(self):
        with pytest.raises(ValueError):
            SymbolicWorldState(frozenset({on("a", "b"), on("b", "a"), handempty()}))

    def test_clear_under_load_rejected(self):
        with pytest.raises(ValueError):
            SymbolicWorldState(
                frozenset({ontable("a"), on("b", "a"), clear("a"), clear("b"), handempty()})
            )


class TestDomain:
    def test_action_count(self):
        # per object: pick from table, putdown, two info kinds; per pair: unstack, place
        actions = ground_domain(["a", "b", "c"])
        assert len(actions) == 3 * 4 + 6 * 2

    def test_sorted_and_deterministic(self):
        actions = ground_domain(["b", "a"])
        keys = [(a.name, a.args) for a in actions]
        assert keys == sorted(keys)
        assert actions == ground_domain(["a", "b"])

    def test_info_actions_have_no_physical_effect(self):
        for a in ground_domain(["a", "b"]):
            if a.belief_effect is not None:
                assert a.name in ("look_closer", "push_obstacle")
                assert a.add == a.delete == a.preconditions == frozenset()

    def test_physical_effect_on_info_action_rejected(self):
        with pytest.raises(ValueError):
            GroundedAction(
                "look_closer", ("a",), frozenset(), frozenset({clear("a")}), frozenset(), "look_closer"
            )


class TestApply:
    def test_pick_then_place(self):
        state = SymbolicWorldState.from_stacks([["a"], ["b"]])
        actions = {(a.name, a.args): a for a in ground_domain(["a", "b"])}
        mid = apply(state, actions[("pick", ("b",))])
        assert mid.atoms == frozenset({ontable("a"), clear("a"), holding("b")})
        end = apply(mid, actions[("place", ("b", "a"))])
        assert end.atoms == frozenset(
            {ontable("a"), on("b", "a"), clear("b"), handempty()}
        )

    def test_unmet_precondition_raises(self):
        state = SymbolicWorldState.from_stacks([["a", "b"]])
        actions = {(a.name, a.args): a for a in ground_domain(["a", "b"])}
        with pytest.raises(ValueError, match="cannot apply"):
            apply(state, actions[("pick", ("a",))])  # a is under b


class TestGoal:
    def test_parse_round_trip(self):
        goal = parse_goal("On(a,b) & On(b,c)")
        assert goal.predicates == frozenset(
            {parse_predicate("On(a,b)"), parse_predicate("On(b,c)")}
        )
        assert str(goal) == "On(a,b) & On(b,c)"

    def test_goal_objects(self):
        assert parse_goal("On(a,b) & Clear(c)").objects() == frozenset({"a", "b", "c"})

    def test_inconsistent_goals_rejected(self):
        with pytest.raises(ValueError):
            parse_goal("On(a,b) & Clear(b)")
        with pytest.raises(ValueError):
            parse_goal("On(a,b) & On(b,a)")
        with pytest.raises(ValueError):
            parse_goal("On(a,b) & On(a,c)")
        with pytest.raises(ValueError):
            parse_goal("CloseTo(a,b)")
        with pytest.raises(ValueError):
            parse_goal("")


class TestHeuristic:
    def test_counts_unsatisfied(self):
        state = SymbolicWorldState.from_stacks([["a"], ["b"], ["c"]])
        goal = parse_goal("On(a,b) & On(b,c)")
        assert heuristic_unsat(state.atoms, goal.atoms()) == 2

    def test_discounts_clear_of_pending_upper(self):
        # placing a onto b would satisfy both atoms in one move
        state = SymbolicWorldState.from_stacks([["a"], ["b"]])
        goal = parse_goal("On(a,b) & Clear(a)")
        assert heuristic_unsat(state.atoms, goal.atoms()) == 1

    def test_admissible_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            start, goal = random_instance(rng, int(rng.integers(3, 5)))
            optimal = bfs_optimal_length(start, goal)
            assert optimal is not None
            assert heuristic_unsat(start.atoms, goal.atoms()) <= optimal


class TestAstar:
    def test_simple_stack_needs_four_steps(self):
        start = SymbolicWorldState.from_stacks([["a"], ["b"], ["c"]])
        goal = parse_goal("On(a,b) & On(b,c)")
        plan = astar(start, goal)
        assert plan is not None and len(plan) == 4
        final = run_plan(start, plan)
        assert goal.atoms() <= final.atoms

    def test_already_satisfied_goal_gives_empty_plan(self):
        start = SymbolicWorldState.from_stacks([["c", "b", "a"]])
        assert astar(start, parse_goal("On(a,b) & On(b,c)")) == []

    def test_deterministic(self):
        start = SymbolicWorldState.from_stacks([["a", "b"], ["c", "d"]])
        goal = parse_goal("On(d,a) & On(b,c)")
        assert astar(start, goal) == astar(start, goal)

    def test_unreachable_goal_returns_none(self):
        # object d is never grounded, so on(a,d) cannot be produced
        start = SymbolicWorldState.from_stacks([["a"], ["b"]])
        goal = parse_goal("On(a,d)")
        assert astar(start, goal, objects=["a", "b"]) is None

    def test_matches_bfs_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            start, goal = random_instance(rng, int(rng.integers(3, 6)))
            plan = astar(start, goal)
            assert plan is not None
            assert len(plan) == bfs_optimal_length(start, goal)
            assert goal.atoms() <= run_plan(start, plan).atoms

    def test_expansion_cap(self):
        start = SymbolicWorldState.from_stacks([["a"], ["b"], ["c"], ["d"]])
        goal = parse_goal("On(a,b) & On(b,c) & On(c,d)")
        with pytest.raises(CapacityError):
            astar(start, goal, max_expansions=2)


class TestInfoValue:
    def test_gate_examples(self):
        assert ig_value(0.6, 0.3, 0.1) is True  # 0.18 > 0.1
        assert ig_value(0.2, 0.3, 0.1) is False  # 0.06
        assert ig_value(0.5, 0.2, 0.1) is False  # exactly at cost: strict

    def test_validation(self):
        with pytest.raises(ValueError):
            ig_value(1.5, 0.3, 0.1)
        with pytest.raises(ValueError):
            ig_value(0.5, -0.1, 0.1)


class TestConvergenceBound:
    # argument order: threshold, reduction rate, starting uncertainty, slack

    def test_worked_example(self):
        assert convergence_bound(0.7, 0.3, 0.5) == 2

    def test_worked_example_with_slack(self):
        assert convergence_bound(0.7, 0.3, 0.5, 0.073) == 1

    def test_already_converged(self):
        assert convergence_bound(0.7, 0.3, 0.2, 0.073) == 0
        assert convergence_bound(0.7, 0.3, 0.0) == 0

    def test_strict_boundary_needs_a_step(self):
        # u0 equals the target exactly; the strict inequality costs one step
        assert convergence_bound(0.5, 0.5, 0.5) == 1

    def test_calibration_slack_loosens(self):
        base = convergence_bound(0.7, 0.3, 0.9)
        assert convergence_bound(0.7, 0.3, 0.9, eps_cal=0.1) <= base

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            u0 = float(rng.uniform(0, 1))
            alpha = float(rng.uniform(0.05, 0.95))
            tau = float(rng.uniform(0.5, 0.95))
            eps = float(rng.choice([0.0, 0.01, 0.05]))
            target = (1 - tau) + eps
            k = 0
            while u0 * (1 - alpha) ** k >= target:
                k += 1
            assert convergence_bound(tau, alpha, u0, eps) == k

    def test_validation(self):
        with pytest.raises(ValueError):
            convergence_bound(0.7, 0.3, 1.2)
        with pytest.raises(ValueError):
            convergence_bound(0.7, 0.0, 0.5)
        with pytest.raises(ValueError):
            convergence_bound(1.0, 0.3, 0.5)


class TestChooseInfoAction:
    GAINS = {"look_closer": 0.3, "push_obstacle": 0.3}

    def test_occluded_target_gets_push(self):
        action = choose_info_action(
            [parse_predicate("On(a,b)")],
            parse_goal("On(a,b)"),
            0.8,
            frozenset({"a"}),
            self.GAINS,
        )
        assert action == InfoAction("push_obstacle", "a")

    def test_visible_target_gets_look(self):
        action = choose_info_action(
            [parse_predicate("On(a,b)")],
            parse_goal("On(a,b)"),
            0.8,
            frozenset(),
            self.GAINS,
        )
        assert action == InfoAction("look_closer", "a")

    def test_most_frequent_object_wins(self):
        uncertain = [
            parse_predicate("On(b,a)"),
            parse_predicate("On(b,c)"),
            parse_predicate("Clear(c)"),
        ]
        action = choose_info_action(
            uncertain, parse_goal("On(b,a) & Clear(c)"), 0.9, frozenset(), self.GAINS
        )
        assert action is not None and action.target == "b"

    def test_nothing_goal_critical(self):
        action = choose_info_action(
            [parse_predicate("On(x,y)")], parse_goal("On(a,b)"), 0.9, frozenset(), self.GAINS
        )
        assert action is None

    def test_low_value_rejected_by_gate(self):
        action = choose_info_action(
            [parse_predicate("On(a,b)")],
            parse_goal("On(a,b)"),
            0.2,
            frozenset(),
            self.GAINS,
        )
        assert action is None


class TestWorldFromBeliefs:
    def _state(self, confs):
        return ProbabilisticState({parse_predicate(k): v for k, v in confs.items()})

    def test_simple_projection(self):
        belief = self._state({"On(a,b)": 0.9, "On(b,c)": 0.1})
        world = world_state_from_beliefs(belief, [parse_predicate("On(a,b)")], ["a", "b", "c"])
        assert world.atoms == frozenset(
            {on("a", "b"), ontable("b"), ontable("c"), clear("a"), clear("c"), handempty()}
        )

    def test_conflicting_supports_resolved_by_confidence(self):
        belief = self._state({"On(a,b)": 0.95, "On(a,c)": 0.9})
        world = world_state_from_beliefs(
            belief,
            [parse_predicate("On(a,b)"), parse_predicate("On(a,c)")],
            ["a", "b", "c"],
        )
        assert world.holds(on("a", "b"))
        assert not world.holds(on("a", "c"))
        assert world.holds(ontable("c"))

    def test_cycle_dropped(self):
        belief = self._state({"On(a,b)": 0.95, "On(b,a)": 0.9})
        world = world_state_from_beliefs(
            belief,
            [parse_predicate("On(a,b)"), parse_predicate("On(b,a)")],
            ["a", "b"],
        )
        assert world.holds(on("a", "b"))
        assert world.holds(ontable("b"))


class TestClosedLoop:
    def test_noiseless_episode_plans_immediately(self):
        scene = generate_scene(3, stack_bias=0.0, seed=4)
        env = PlanningEnvironment(scene, NoiseConfig(), seed=0)
        goal = parse_goal("On(o0,o1) & On(o1,o2)")
        episode = plan_under_uncertainty(env, goal, tau_plan=0.7, max_retries=3)
        assert episode.success
        assert episode.info_action_count == 0
        assert len(episode.iterations) == 1
        assert episode.plan is not None and len(episode.plan) == 4

    def test_single_round_budget_never_gathers_info(self):
        failures = 0
        cfg = NoiseConfig(base_flip_rate=0.45, logit_noise_sd=3.0)
        for seed in range(30):
            scene = generate_scene(3, stack_bias=1.0, seed=seed)
            env = PlanningEnvironment(scene, cfg, seed=seed)
            episode = plan_under_uncertainty(
                env, parse_goal("On(o0,o1)"), tau_plan=0.7, max_retries=1
            )
            assert len(episode.iterations) == 1
            assert episode.info_action_count == 0
            failures += not episode.success
        assert failures > 0  # near-coin perception must sometimes mislead execution

    def test_round_budget_bounds_info_actions(self):
        cfg = NoiseConfig(base_flip_rate=0.2, logit_noise_sd=1.5)
        for seed in range(10):
            scene = generate_scene(4, stack_bias=0.5, seed=seed)
            env = PlanningEnvironment(scene, cfg, seed=seed)
            episode = plan_under_uncertainty(
                env, parse_goal("On(o0,o1)"), tau_plan=0.7, max_retries=3
            )
            assert len(episode.iterations) <= 3
            assert episode.info_action_count <= 2

    def test_uncertainty_trace_never_increases(self):
        cfg = NoiseConfig(base_flip_rate=0.15, logit_noise_sd=1.0)
        for seed in range(10):
            scene = generate_scene(4, stack_bias=0.5, seed=seed)
            env = PlanningEnvironment(scene, cfg, seed=seed)
            episode = plan_under_uncertainty(
                env, parse_goal("On(o0,o1)"), tau_plan=0.7, max_retries=4
            )
            trace = episode.uncertainty_trace()
            for earlier, later in zip(trace, trace[1:]):
                assert later <= earlier + 1e-12

    def test_mrf_refinement_option_runs(self):
        scene = generate_scene(3, stack_bias=0.6, seed=2)
        env = PlanningEnvironment(scene, NoiseConfig(base_flip_rate=0.1, logit_noise_sd=0.8), seed=1)
        episode = plan_under_uncertainty(
            env,
            parse_goal("On(o1,o0)"),
            max_retries=2,
            options=PlannerOptions(refine_with_mrf=True),
        )
        assert len(episode.iterations) >= 1

    def test_rows_schema(self):
        scene = generate_scene(3, stack_bias=0.0, seed=4)
        env = PlanningEnvironment(scene, NoiseConfig(), seed=0)
        episode = plan_under_uncertainty(env, parse_goal("On(o0,o1)"))
        rows = episode.to_rows(17)
        assert rows == [(17, 0, rows[0][2], "plan")]
        assert 0.0 <= rows[0][2] <= 1.0

    def test_invalid_budget_rejected(self):
        scene = generate_scene(3, seed=0)
        env = PlanningEnvironment(scene, NoiseConfig(), seed=0)
        with pytest.raises(ValueError):
            plan_under_uncertainty(env, parse_goal("On(o0,o1)"), max_retries=0)


class TestRandomInstance:
    def test_deterministic_under_seed(self):
        a = random_instance(np.random.default_rng(9), 5)
        b = random_instance(np.random.default_rng(9), 5)
        assert a == b

    def test_always_solvable(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            start, goal = random_instance(rng, int(rng.integers(3, 7)))
            assert bfs_optimal_length(start, goal) is not None
