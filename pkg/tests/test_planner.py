import random
from dataclasses import replace

import pytest

from hyperplan import (
    BudgetExhausted,
    Handoff,
    NoSolution,
    Pick,
    Place,
    Problem,
    Region,
    RobotSpec,
    SearchConfig,
    WorldState,
    bfs_oracle,
    build_hypergraph,
    execute_hypergraph,
    is_goal,
    plan,
    topological_order,
    validate_hyperpath,
)
from hyperplan.domain import apply
from hyperplan.planner import heuristic

from conftest import random_instance, random_walk


def plan_actions(graph):
    return [graph.arcs[a].label for a in topological_order(graph)]


# --- fig1 ----------------------------------------------------------------------

def test_fig1_six_actions_three_picks_three_places(fig1):
    graph, stats = plan(fig1.problem)
    actions = plan_actions(graph)
    assert len(actions) == 6
    assert sum(isinstance(a, Pick) for a in actions) == 3
    assert sum(isinstance(a, Place) for a in actions) == 3
    assert stats.solution_actions == 6
    assert stats.expansions >= 6
    assert stats.expansions <= stats.generated


def test_fig1_recovers_parallel_structure(fig1):
    graph, stats = plan(fig1.problem)
    _, makespan, _ = execute_hypergraph(graph, fig1.problem)
    assert makespan < 6
    assert stats.makespan == makespan


def test_plan_on_satisfied_goal_is_empty(fig1):
    p = fig1.problem
    satisfied = replace(p, goal={"right": ("A", "B", "C")})
    graph, stats = plan(satisfied)
    assert len(graph.arcs) == 0
    assert stats.solution_actions == 0
    # sources only: the tower plus one node per robot
    assert len(graph.nodes) == 3
    assert validate_hyperpath(graph).ok


def test_fig2_optimal_plan_needs_three_handoffs(fig2):
    p = fig2.problem
    graph, stats = plan(p)
    actions = plan_actions(graph)
    assert stats.solution_actions == bfs_oracle(p) == 9
    assert sum(isinstance(a, Handoff) for a in actions) == 3
    final, _, _ = execute_hypergraph(graph, p)
    assert is_goal(final, p)


def test_plan_is_deterministic(fig1):
    first, _ = plan(fig1.problem)
    second, _ = plan(fig1.problem)
    assert plan_actions(first) == plan_actions(second)
    assert first == second


def test_no_solution_when_target_unreachable():
    regions = (Region("L", "stack"), Region("R", "stack"))
    robots = (RobotSpec("a", frozenset({"R"})),)
    p = Problem(regions, robots, ("x",),
                WorldState(stacks={"R": ("x",)}), {"L": ("x",)})
    with pytest.raises(NoSolution):
        plan(p)
    assert bfs_oracle(p) is None


def test_no_solution_when_state_space_exhausted():
    # two boxes must swap stack order with one robot and no spare surface
    regions = (Region("L", "stack"),)
    robots = (RobotSpec("a", frozenset({"L"})),)
    p = Problem(regions, robots, ("x", "y"),
                WorldState(stacks={"L": ("x", "y")}), {"L": ("y", "x")})
    with pytest.raises(NoSolution):
        plan(p)
    assert bfs_oracle(p) is None


def test_budget_exhausted():
    from conftest import reversal_problem

    with pytest.raises(BudgetExhausted):
        plan(reversal_problem(4), SearchConfig(max_expansions=2))


def test_search_config_invariants():
    with pytest.raises(ValueError):
        SearchConfig(max_expansions=0)
    with pytest.raises(ValueError):
        SearchConfig(cost_model="makespan")


# --- build_hypergraph ------------------------------------------------------------

def test_build_empty_sequence_gives_sources_only(fig1):
    graph = build_hypergraph([], fig1.problem)
    assert len(graph.arcs) == 0
    assert set(graph.sources) == set(graph.nodes)


def test_build_single_pick_structure():
    regions = (Region("L", "stack"),)
    robots = (RobotSpec("a", frozenset({"L"})),)
    p = Problem(regions, robots, ("x",),
                WorldState(stacks={"L": ("x",)}), {})
    graph = build_hypergraph([Pick("a", "x", "L")], p)
    assert len(graph.sources) == 2
    assert len(graph.arcs) == 1
    heads = next(iter(graph.arcs.values())).heads
    assert len(heads) == 1
    (head,) = heads
    assert len(graph.nodes[head].composition) == 2  # robot composed with box


def test_build_fig1_leaves_arcs_1_and_2_unordered(fig1):
    # the second pick and the first place depend only on the first pick
    graph, _ = plan(fig1.problem)
    order = topological_order(graph)
    arc_of = {i: graph.arcs[aid] for i, aid in enumerate(order)}
    first_heads = arc_of[0].heads
    assert arc_of[1].tails & first_heads or arc_of[2].tails & first_heads
    assert not (arc_of[1].tails & arc_of[2].heads)
    assert not (arc_of[2].tails & arc_of[1].heads)


def test_build_rejects_inapplicable_sequence(fig1):
    from hyperplan import PreconditionViolated

    with pytest.raises(PreconditionViolated):
        build_hypergraph([Pick("blue", "A", "right")], fig1.problem)


def test_build_output_reexecutes_to_sequential_state(fig1):
    p = fig1.problem
    rng = random.Random(7)
    state = p.initial
    actions = []
    for _ in range(6):
        from hyperplan import applicable_actions

        options = applicable_actions(state, p)
        if not options:
            break
        action = rng.choice(options)
        state = apply(state, action, p)
        actions.append(action)
    graph = build_hypergraph(actions, p)
    assert validate_hyperpath(graph).ok
    final, _, count = execute_hypergraph(graph, p)
    assert final == state
    assert count == len(actions)


# --- oracle equivalence and heuristic admissibility ---------------------------------

def test_oracle_on_known_instances(fig1):
    assert bfs_oracle(fig1.problem) == 6
    # one robot, one box, two stacks: forced pick + place
    regions = (Region("L", "stack"), Region("R", "stack"))
    robots = (RobotSpec("a", frozenset({"L", "R"})),)
    p = Problem(regions, robots, ("x",),
                WorldState(stacks={"R": ("x",)}), {"L": ("x",)})
    assert bfs_oracle(p) == 2
    satisfied = replace(p, goal={"R": ("x",)})
    assert bfs_oracle(satisfied) == 0


def test_plan_matches_oracle_on_random_family():
    solved = 0
    for seed in range(60):
        p = random_instance(seed)
        expected = bfs_oracle(p, bound=40)
        try:
            graph, stats = plan(p)
        except NoSolution:
            assert expected is None, f"seed {seed}: planner gave up, oracle found {expected}"
            continue
        assert stats.solution_actions == expected, f"seed {seed}"
        final, _, _ = execute_hypergraph(graph, p)
        assert is_goal(final, p)
        solved += 1
    assert solved >= 30


def test_heuristic_admissible_on_sampled_states():
    for seed in range(30):
        p = random_instance(seed)
        rng = random.Random(seed + 999)
        for state in random_walk(p, rng, 4):
            h = heuristic(state, p)
            truth = bfs_oracle(replace(p, initial=state), bound=40)
            if h is None:
                assert truth is None
            elif truth is not None:
                assert h <= truth
