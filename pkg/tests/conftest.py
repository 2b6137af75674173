import random
from pathlib import Path

import pytest

from hyperplan import Problem, Region, RobotSpec, WorldState
from hyperplan.cli import Scenario, parse_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def load_scenario(name: str) -> Scenario:
    return parse_scenario((SCENARIO_DIR / f"{name}.json").read_text())


@pytest.fixture(scope="session")
def fig1() -> Scenario:
    return load_scenario("fig1")


@pytest.fixture(scope="session")
def fig2() -> Scenario:
    return load_scenario("fig2")


@pytest.fixture(scope="session")
def fig3() -> Scenario:
    return load_scenario("fig3")


def reversal_problem(height: int, robots: int = 2) -> Problem:
    """Two-pedestal tower reversal, the benchmark family."""
    regions = (Region("left", "stack"), Region("right", "stack"))
    names = ("blue", "red")[:robots]
    specs = tuple(RobotSpec(n, frozenset({"left", "right"})) for n in names)
    objs = tuple(f"b{i}" for i in range(1, height + 1))
    return Problem(regions, specs, objs,
                   WorldState(stacks={"right": objs}),
                   {"left": tuple(reversed(objs))})


def reversal_scenario(height: int) -> Scenario:
    return Scenario(f"reversal{height}", reversal_problem(height))


def two_target_problem() -> Problem:
    regions = (Region("src", "stack"), Region("t1", "stack"), Region("t2", "stack"))
    specs = (RobotSpec("blue", frozenset({"src", "t1", "t2"})),
             RobotSpec("red", frozenset({"src", "t1", "t2"})))
    return Problem(regions, specs, ("A", "B", "C"),
                   WorldState(stacks={"src": ("A", "B", "C")}),
                   {"t1": ("C",), "t2": ("B", "A")})


def buffer_start_problem() -> Problem:
    regions = (Region("tray", "buffer", 3), Region("left", "stack"))
    specs = (RobotSpec("arm", frozenset({"tray", "left"})),)
    return Problem(regions, specs, ("A", "B", "C"),
                   WorldState(buffers={"tray": {"A", "B", "C"}}),
                   {"left": ("B", "C", "A")})


def handoff_capacity_problem() -> Problem:
    """Fig1's goal shape with disjoint pedestals and a capacity-2 receiver.

    Optimal plans hand every box across the shared middle stack instead of
    parking, so the extracted strategy matches fig1's exactly.
    """
    regions = (Region("left", "stack"), Region("right", "stack"),
               Region("mid", "stack"))
    specs = (RobotSpec("g", frozenset({"right", "mid"})),
             RobotSpec("t", frozenset({"mid", "left"}), capacity=2))
    return Problem(regions, specs, ("A", "B", "C"),
                   WorldState(stacks={"right": ("A", "B", "C")}),
                   {"left": ("C", "A", "B")})


def random_instance(seed: int, max_objects: int = 3, max_robots: int = 2,
                    max_regions: int = 3) -> Problem:
    """Deterministic small instance; may or may not be solvable."""
    rng = random.Random(seed)
    for _ in range(50):
        n_regions = rng.randint(2, max_regions)
        regions = [Region("r0", "stack")]
        for i in range(1, n_regions):
            if rng.random() < 0.3:
                regions.append(Region(f"r{i}", "buffer", rng.randint(1, 2)))
            else:
                regions.append(Region(f"r{i}", "stack"))
        region_ids = [r.id for r in regions]
        stack_ids = [r.id for r in regions if r.kind == "stack"]

        n_objects = rng.randint(1, max_objects)
        objects = tuple(f"o{i}" for i in range(1, n_objects + 1))

        robots = []
        for i in range(rng.randint(1, max_robots)):
            reach = frozenset(rng.sample(region_ids,
                                         rng.randint(1, len(region_ids))))
            robots.append(RobotSpec(f"a{i}", reach, rng.choice([1, 1, 1, 2])))

        stacks: dict = {}
        buffers: dict = {}
        ok = True
        for o in objects:
            region = rng.choice(regions)
            if region.kind == "stack":
                stacks.setdefault(region.id, []).append(o)
            elif len(buffers.get(region.id, set())) < region.capacity:
                buffers.setdefault(region.id, set()).add(o)
            else:
                stacks.setdefault(stack_ids[0], []).append(o)

        n_goal = rng.randint(0, n_objects)
        chosen = rng.sample(list(objects), n_goal)
        goal: dict = {}
        if chosen:
            n_targets = rng.randint(1, min(2, len(stack_ids)))
            targets = rng.sample(stack_ids, n_targets)
            for o in chosen:
                goal.setdefault(rng.choice(targets), []).append(o)
            goal = {r: tuple(v) for r, v in goal.items()}

        problem = Problem(tuple(regions), tuple(robots), objects,
                          WorldState(stacks={r: tuple(v) for r, v in stacks.items()},
                                     buffers=buffers),
                          goal)
        if not problem.validate() and ok:
            return problem
    raise RuntimeError(f"seed {seed} produced no valid instance")


def random_walk(problem: Problem, rng: random.Random, steps: int) -> list:
    """Random applicable-action trajectory; returns the visited states."""
    from hyperplan import applicable_actions, apply

    state = problem.initial
    visited = [state]
    for _ in range(steps):
        actions = applicable_actions(state, problem)
        if not actions:
            break
        state = apply(state, rng.choice(actions), problem)
        visited.append(state)
    return visited
