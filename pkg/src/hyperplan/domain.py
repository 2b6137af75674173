"""Tabletop manipulation world: regions, robots, stacked objects.

Regions are either stacks (ordered towers, unbounded height) or buffers
(unordered surfaces with finite capacity). Robots have a static reach set
and a carrying capacity (default 1). Three action schemas exist: Pick,
Place, and Handoff; a handoff is one atomic action occupying both robots.

A goal is partial: it fixes, per stack region, the exact bottom-to-top
object order. Regions and objects the goal does not mention are
unconstrained.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .hypergraph import (
    SolutionHypergraph,
    obj,
    robot,
    topological_order,
    validate_hyperpath,
)

STACK = "stack"
BUFFER = "buffer"


@dataclass(frozen=True)
class Region:
    id: str
    kind: str
    capacity: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in (STACK, BUFFER):
            raise ValueError(f"unknown region kind: {self.kind!r}")
        if self.kind == BUFFER and (self.capacity is None or self.capacity < 1):
            raise ValueError(f"buffer {self.id!r} needs capacity >= 1")
        if self.kind == STACK and self.capacity is not None:
            raise ValueError(f"stack {self.id!r} must not declare a capacity")


@dataclass(frozen=True)
class RobotSpec:
    id: str
    reach: frozenset
    capacity: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "reach", frozenset(self.reach))
        if not self.reach:
            raise ValueError(f"robot {self.id!r} must reach at least one region")
        if self.capacity < 1:
            raise ValueError(f"robot {self.id!r} capacity must be >= 1")


# --- facts ---------------------------------------------------------------

@dataclass(frozen=True)
class OnStack:
    """Object sits on a stack region at the given height (0 = bottom)."""

    obj: str
    region: str
    height: int


@dataclass(frozen=True)
class InBuffer:
    obj: str
    region: str


@dataclass(frozen=True)
class Held:
    robot: str
    obj: str


Fact = OnStack | InBuffer | Held


def fact_sort_key(f: Fact) -> tuple:
    if isinstance(f, OnStack):
        return (0, f.region, f.height, f.obj)
    if isinstance(f, InBuffer):
        return (1, f.region, f.obj)
    return (2, f.robot, f.obj)


def object_facts(state: Iterable) -> frozenset:
    """Drop holding facts, keeping only object placement assertions."""
    return frozenset(f for f in state if isinstance(f, (OnStack, InBuffer)))


# --- world state ---------------------------------------------------------

class WorldState:
    """Immutable placement of every object plus per-robot holdings.

    Internally stored as per-region stacks/buffer sets and per-robot held
    tuples; the ``placements`` view derives the object -> fact map. Empty
    entries are normalised away so equal states hash equally.
    """

    __slots__ = ("stacks", "buffers", "holdings", "_key", "_hash")

    def __init__(self,
                 stacks: Mapping[str, Sequence[str]] | None = None,
                 buffers: Mapping[str, Iterable[str]] | None = None,
                 holdings: Mapping[str, Sequence[str]] | None = None):
        self.stacks = {r: tuple(v) for r, v in (stacks or {}).items() if v}
        self.buffers = {r: frozenset(v) for r, v in (buffers or {}).items() if v}
        self.holdings = {r: tuple(v) for r, v in (holdings or {}).items() if v}
        self._key = (
            tuple(sorted(self.stacks.items())),
            tuple(sorted((r, tuple(sorted(v))) for r, v in self.buffers.items())),
            tuple(sorted(self.holdings.items())),
        )
        self._hash = hash(self._key)

    @classmethod
    def from_placements(cls, placements: Mapping[str, Fact],
                        holdings: Mapping[str, Sequence[str]] | None = None) -> "WorldState":
        stacks: dict = {}
        buffers: dict = {}
        held: dict = {}
        for o, fact in placements.items():
            if isinstance(fact, OnStack):
                stacks.setdefault(fact.region, {})[fact.height] = o
            elif isinstance(fact, InBuffer):
                buffers.setdefault(fact.region, set()).add(o)
            elif isinstance(fact, Held):
                held.setdefault(fact.robot, []).append(o)
            else:
                raise ValueError(f"unknown placement fact for {o!r}")
        ordered = {}
        for r, slots in stacks.items():
            if sorted(slots) != list(range(len(slots))):
                raise ValueError(f"stack {r!r} heights are not 0..k-1")
            ordered[r] = tuple(slots[i] for i in range(len(slots)))
        if holdings is None:
            holdings = {r: tuple(sorted(v)) for r, v in held.items()}
        return cls(ordered, buffers, holdings)

    @property
    def placements(self) -> dict:
        out: dict = {}
        for r, stack in self.stacks.items():
            for h, o in enumerate(stack):
                out[o] = OnStack(o, r, h)
        for r, objs in self.buffers.items():
            for o in objs:
                out[o] = InBuffer(o, r)
        for r, held in self.holdings.items():
            for o in held:
                out[o] = Held(r, o)
        return out

    def placement_of(self, o: str) -> Fact | None:
        for r, stack in self.stacks.items():
            if o in stack:
                return OnStack(o, r, stack.index(o))
        for r, objs in self.buffers.items():
            if o in objs:
                return InBuffer(o, r)
        for r, held in self.holdings.items():
            if o in held:
                return Held(r, o)
        return None

    def holder_of(self, o: str) -> str | None:
        for r, held in self.holdings.items():
            if o in held:
                return r
        return None

    def __eq__(self, other) -> bool:
        return isinstance(other, WorldState) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"WorldState(stacks={self.stacks}, buffers={self.buffers}, holdings={self.holdings})"

    def validate(self, problem: "Problem") -> list:
        """List every invariant violation of this state against a problem."""
        errors = []
        seen: dict = {}
        for r, stack in self.stacks.items():
            region = problem.region_map.get(r)
            if region is None or region.kind != STACK:
                errors.append(f"{r!r} is not a stack region")
            for o in stack:
                seen[o] = seen.get(o, 0) + 1
        for r, objs in self.buffers.items():
            region = problem.region_map.get(r)
            if region is None or region.kind != BUFFER:
                errors.append(f"{r!r} is not a buffer region")
            elif len(objs) > region.capacity:
                errors.append(f"buffer {r!r} over capacity")
            for o in objs:
                seen[o] = seen.get(o, 0) + 1
        for r, held in self.holdings.items():
            spec = problem.robot_map.get(r)
            if spec is None:
                errors.append(f"unknown robot {r!r}")
            elif len(held) > spec.capacity:
                errors.append(f"robot {r!r} over capacity")
            for o in held:
                seen[o] = seen.get(o, 0) + 1
        for o in problem.objects:
            count = seen.pop(o, 0)
            if count != 1:
                errors.append(f"object {o!r} placed {count} times")
        for o in seen:
            errors.append(f"undeclared object {o!r}")
        return errors


# --- actions -------------------------------------------------------------

@dataclass(frozen=True)
class Pick:
    robot: str
    obj: str
    region: str

    dot_dashed = False

    def __str__(self) -> str:
        return f"pick {self.robot} {self.obj} {self.region}"


@dataclass(frozen=True)
class Place:
    robot: str
    obj: str
    region: str

    dot_dashed = False

    def __str__(self) -> str:
        return f"place {self.robot} {self.obj} {self.region}"


@dataclass(frozen=True)
class Handoff:
    giver: str
    receiver: str
    obj: str

    dot_dashed = True

    def __post_init__(self) -> None:
        if self.giver == self.receiver:
            raise ValueError("handoff giver and receiver must differ")

    def __str__(self) -> str:
        return f"handoff {self.giver} {self.receiver} {self.obj}"


Action = Pick | Place | Handoff


def action_sort_key(a: Action) -> tuple:
    if isinstance(a, Pick):
        return (0, a.robot, a.obj, a.region)
    if isinstance(a, Place):
        return (1, a.robot, a.obj, a.region)
    return (2, a.giver, a.obj, a.receiver)


def action_robots(a: Action) -> frozenset:
    if isinstance(a, Handoff):
        return frozenset((a.giver, a.receiver))
    return frozenset((a.robot,))


# --- problem -------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    regions: tuple
    robots: tuple
    objects: tuple
    initial: WorldState
    goal: Mapping[str, tuple]

    def __post_init__(self) -> None:
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "robots", tuple(self.robots))
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(
            self, "goal", {r: tuple(v) for r, v in dict(self.goal).items()})

    @property
    def region_map(self) -> dict:
        return {r.id: r for r in self.regions}

    @property
    def robot_map(self) -> dict:
        return {r.id: r for r in self.robots}

    @property
    def goal_objects(self) -> frozenset:
        return frozenset(o for stack in self.goal.values() for o in stack)

    def validate(self) -> list:
        errors = []
        ids = [r.id for r in self.regions]
        if len(set(ids)) != len(ids):
            errors.append("duplicate region ids")
        if len(set(self.objects)) != len(self.objects):
            errors.append("duplicate object ids")
        rids = [r.id for r in self.robots]
        if len(set(rids)) != len(rids):
            errors.append("duplicate robot ids")
        if set(rids) & set(self.objects):
            errors.append("robot and object names overlap")
        for spec in self.robots:
            for region in spec.reach:
                if region not in self.region_map:
                    errors.append(f"robot {spec.id!r} reaches unknown region {region!r}")
        for r, stack in self.goal.items():
            region = self.region_map.get(r)
            if region is None:
                errors.append(f"goal region {r!r} undeclared")
            elif region.kind != STACK:
                errors.append(f"goal region {r!r} is not a stack")
            for o in stack:
                if o not in self.objects:
                    errors.append(f"goal object {o!r} undeclared")
        goal_all = [o for stack in self.goal.values() for o in stack]
        if len(set(goal_all)) != len(goal_all):
            errors.append("object appears in two goal stacks")
        errors.extend(self.initial.validate(self))
        return errors


class PreconditionViolated(Exception):
    def __init__(self, action: Action, reason: str):
        self.action = action
        self.reason = reason
        super().__init__(f"{action}: {reason}")


class ExecutionFault(Exception):
    def __init__(self, arc_id: int | None, reason: str):
        self.arc_id = arc_id
        self.reason = reason
        super().__init__(f"arc {arc_id}: {reason}")


def _pick_reason(s: WorldState, a: Pick, p: Problem) -> str | None:
    spec = p.robot_map.get(a.robot)
    if spec is None:
        return f"unknown robot {a.robot!r}"
    if a.region not in spec.reach:
        return f"{a.region!r} out of reach"
    if len(s.holdings.get(a.robot, ())) >= spec.capacity:
        return "robot at capacity"
    region = p.region_map.get(a.region)
    if region is None:
        return f"unknown region {a.region!r}"
    if region.kind == STACK:
        stack = s.stacks.get(a.region, ())
        if not stack or stack[-1] != a.obj:
            return f"{a.obj!r} is not the top of {a.region!r}"
    else:
        if a.obj not in s.buffers.get(a.region, frozenset()):
            return f"{a.obj!r} not in buffer {a.region!r}"
    return None


def _place_reason(s: WorldState, a: Place, p: Problem) -> str | None:
    spec = p.robot_map.get(a.robot)
    if spec is None:
        return f"unknown robot {a.robot!r}"
    if a.obj not in s.holdings.get(a.robot, ()):
        return f"robot does not hold {a.obj!r}"
    if a.region not in spec.reach:
        return f"{a.region!r} out of reach"
    region = p.region_map.get(a.region)
    if region is None:
        return f"unknown region {a.region!r}"
    if region.kind == BUFFER and len(s.buffers.get(a.region, frozenset())) >= region.capacity:
        return f"buffer {a.region!r} full"
    return None


def _handoff_reason(s: WorldState, a: Handoff, p: Problem) -> str | None:
    giver = p.robot_map.get(a.giver)
    receiver = p.robot_map.get(a.receiver)
    if giver is None or receiver is None:
        return "unknown robot"
    if a.obj not in s.holdings.get(a.giver, ()):
        return f"giver does not hold {a.obj!r}"
    if len(s.holdings.get(a.receiver, ())) >= receiver.capacity:
        return "receiver at capacity"
    if not (giver.reach & receiver.reach):
        return "no shared reachable region"
    return None


def precondition_failure(s: WorldState, a: Action, p: Problem) -> str | None:
    if isinstance(a, Pick):
        return _pick_reason(s, a, p)
    if isinstance(a, Place):
        return _place_reason(s, a, p)
    return _handoff_reason(s, a, p)


def applicable_actions(s: WorldState, p: Problem,
                       frozen: frozenset = frozenset()) -> tuple:
    """All actions applicable in ``s``, sorted for deterministic iteration.

    ``frozen`` objects may not be picked (or handed off), which is how the
    reuse stage pins already-achieved goal placements.
    """
    out = []
    for spec in p.robots:
        held = s.holdings.get(spec.id, ())
        if len(held) < spec.capacity:
            for region_id in spec.reach:
                region = p.region_map[region_id]
                if region.kind == STACK:
                    stack = s.stacks.get(region_id, ())
                    if stack and stack[-1] not in frozen:
                        out.append(Pick(spec.id, stack[-1], region_id))
                else:
                    for o in s.buffers.get(region_id, frozenset()):
                        if o not in frozen:
                            out.append(Pick(spec.id, o, region_id))
        for o in held:
            for region_id in spec.reach:
                region = p.region_map[region_id]
                if region.kind == BUFFER and \
                        len(s.buffers.get(region_id, frozenset())) >= region.capacity:
                    continue
                out.append(Place(spec.id, o, region_id))
        for other in p.robots:
            if other.id == spec.id:
                continue
            if not held:
                continue
            if len(s.holdings.get(other.id, ())) >= other.capacity:
                continue
            if not (spec.reach & other.reach):
                continue
            for o in held:
                if o not in frozen:
                    out.append(Handoff(spec.id, other.id, o))
    return tuple(sorted(out, key=action_sort_key))


def apply(s: WorldState, a: Action, p: Problem) -> WorldState:
    """Successor state after one action; only the involved entities change."""
    reason = precondition_failure(s, a, p)
    if reason is not None:
        raise PreconditionViolated(a, reason)
    stacks = dict(s.stacks)
    buffers = dict(s.buffers)
    holdings = dict(s.holdings)
    if isinstance(a, Pick):
        if p.region_map[a.region].kind == STACK:
            stacks[a.region] = stacks[a.region][:-1]
        else:
            buffers[a.region] = buffers[a.region] - {a.obj}
        holdings[a.robot] = holdings.get(a.robot, ()) + (a.obj,)
    elif isinstance(a, Place):
        holdings[a.robot] = tuple(o for o in holdings[a.robot] if o != a.obj)
        if p.region_map[a.region].kind == STACK:
            stacks[a.region] = stacks.get(a.region, ()) + (a.obj,)
        else:
            buffers[a.region] = buffers.get(a.region, frozenset()) | {a.obj}
    else:
        holdings[a.giver] = tuple(o for o in holdings[a.giver] if o != a.obj)
        holdings[a.receiver] = holdings.get(a.receiver, ()) + (a.obj,)
    return WorldState(stacks, buffers, holdings)


def is_goal(s: WorldState, p: Problem, prefix: bool = False) -> bool:
    """True iff every goal stack matches exactly and no goal object is held.

    With ``prefix=True`` a goal stack only needs to hold the wanted objects
    at the wanted heights and extra objects above them are allowed; this is
    the positional reading refinement sub-goals use.
    """
    for region, want in p.goal.items():
        stack = s.stacks.get(region, ())
        if prefix:
            if stack[:len(want)] != want:
                return False
        elif stack != want:
            return False
    goal_objs = p.goal_objects
    for held in s.holdings.values():
        if goal_objs & set(held):
            return False
    return True


# --- hypergraph interface ------------------------------------------------

def initial_decomposition(p: Problem) -> list:
    """Maximal independent compositions of the initial state.

    Each non-empty stack is one composed node, each buffer object its own
    node, and each robot (plus anything it holds) its own node. The result
    partitions the problem's entity set.
    """
    out = []
    s = p.initial
    for region in p.regions:
        if region.kind == STACK:
            stack = s.stacks.get(region.id, ())
            if stack:
                comp = frozenset(obj(o) for o in stack)
                facts = frozenset(
                    OnStack(o, region.id, h) for h, o in enumerate(stack))
                out.append((comp, facts))
        else:
            for o in sorted(s.buffers.get(region.id, frozenset())):
                out.append((frozenset([obj(o)]),
                            frozenset([InBuffer(o, region.id)])))
    for spec in p.robots:
        held = s.holdings.get(spec.id, ())
        comp = frozenset([robot(spec.id)]) | frozenset(obj(o) for o in held)
        facts = frozenset(Held(spec.id, o) for o in held)
        out.append((comp, facts))
    return out


def execute_hypergraph(graph: SolutionHypergraph, p: Problem) -> tuple:
    """Run a solution hypergraph against a problem.

    Applies the arc actions in topological order, checking every
    precondition against the evolving state. Returns
    ``(final_state, makespan, action_count)`` where makespan counts greedy
    parallel layers (all tails available at layer start, no robot acting
    twice per layer).
    """
    if not graph.nodes:
        return (p.initial, 0, 0)
    report = validate_hyperpath(graph)
    if not report.ok:
        raise ExecutionFault(None, report.violations[0].detail)
    expected = Counter((comp, facts) for comp, facts in initial_decomposition(p))
    actual = Counter(
        (graph.nodes[i].composition, graph.nodes[i].state) for i in graph.sources)
    if expected != actual:
        raise ExecutionFault(None, "sources do not match the initial decomposition")

    order = topological_order(graph)
    state = p.initial
    for aid in order:
        action = graph.arcs[aid].label
        if not isinstance(action, (Pick, Place, Handoff)):
            raise ExecutionFault(aid, f"arc label {action!r} is not an action")
        try:
            state = apply(state, action, p)
        except PreconditionViolated as exc:
            raise ExecutionFault(aid, exc.reason) from exc

    available = set(graph.sources)
    remaining = list(order)
    makespan = 0
    while remaining:
        layer = []
        busy: set = set()
        produced: set = set()
        for aid in remaining:
            arc = graph.arcs[aid]
            robots = action_robots(arc.label)
            if arc.tails <= available and not (robots & busy):
                layer.append(aid)
                busy |= robots
                produced |= arc.heads
        if not layer:
            raise ExecutionFault(remaining[0], "no runnable arc in layer")
        available |= produced
        remaining = [aid for aid in remaining if aid not in layer]
        makespan += 1
    return (state, makespan, len(graph.arcs))
