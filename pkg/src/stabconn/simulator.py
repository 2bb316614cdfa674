"""Scheduling daemon, fault injection, and stabilization detection.

One simulation serializes atomic steps: at every step a fair scheduler picks
a single processor, which performs exactly one register read or write.  Runs
start from arbitrary (seeded random) states.  An omniscient observer compares
registers against the centralized ground truth at round boundaries and
declares stabilization once they match and stay unchanged for a confirmation
window; the processors themselves never detect termination.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator, Mapping, Sequence

from .graph import Graph, NodeId, ROOT
from .oracle import GroundTruth, ground_truth
from .protocol import (
    Path,
    ProcessorState,
    Register,
    StepEvent,
    execute_step,
    node_program,
    register_bits,
)

POST_STABILIZATION = "post-stabilization"

REGISTER_FIELDS = ("path", "count", "bcc")
FAULT_FIELDS = REGISTER_FIELDS + ("pc", "locals")


@dataclass(eq=True)
class Configuration:
    """One state per processor; the graph rides along for port lookups."""

    graph: Graph
    states: list[ProcessorState]

    @cached_property
    def programs(self):
        return tuple(node_program(self.graph, v) for v in range(1, self.graph.n + 1))

    def registers(self) -> tuple[Register, ...]:
        return tuple(st.register for st in self.states)

    def clone(self) -> "Configuration":
        return Configuration(self.graph, [st.clone() for st in self.states])


def is_legitimate(c: Configuration, gt: GroundTruth) -> bool:
    return c.registers() == gt.registers


# ---------------------------------------------------------------------------
# schedulers

class RoundRobin:
    """Activates 1..n forever; every round is exactly n steps."""

    name = "round-robin"

    def activations(self, n: int) -> Iterator[NodeId]:
        while True:
            yield from range(1, n + 1)


class UniformRandom:
    """Each step activates a uniformly random processor; fair with probability 1."""

    name = "random"

    def __init__(self, seed: int):
        self.seed = seed

    def activations(self, n: int) -> Iterator[NodeId]:
        rng = random.Random(self.seed)
        population = range(1, n + 1)
        while True:
            yield from rng.choices(population, k=512)


class WeightedRandom:
    """Random activations with per-node weights (all positive, hence fair)."""

    name = "weighted"

    def __init__(self, seed: int, weights: Sequence[float] | None = None):
        self.seed = seed
        if weights is not None and (not weights or min(weights) <= 0):
            raise ValueError("weights must be positive for every node")
        self.weights = tuple(weights) if weights is not None else None

    def activations(self, n: int) -> Iterator[NodeId]:
        rng = random.Random(self.seed)
        if self.weights is not None:
            if len(self.weights) != n:
                raise ValueError(f"need {n} weights, got {len(self.weights)}")
            weights = self.weights
        else:
            weights = tuple(rng.uniform(1.0, 10.0) for _ in range(n))
        population = range(1, n + 1)
        while True:
            yield from rng.choices(population, weights=weights, k=512)


SCHEDULER_NAMES = ("round-robin", "random", "weighted")


def make_scheduler(name: str, seed: int = 0, weights: Sequence[float] | None = None):
    if name == "round-robin":
        return RoundRobin()
    if name == "random":
        return UniformRandom(seed)
    if name == "weighted":
        return WeightedRandom(seed, weights)
    raise ValueError(f"unknown scheduler {name!r}; pick one of {SCHEDULER_NAMES}")


# ---------------------------------------------------------------------------
# arbitrary initial states and fault injection

def _random_path(rng: random.Random, path_bound: int, delta: int) -> Path:
    length = rng.randint(1, path_bound)
    return tuple(rng.randint(0, delta) for _ in range(length))


def init_arbitrary(g: Graph, seed: int) -> Configuration:
    """Every register field, local variable, and pc independently random.

    All values respect the type bounds (path length <= n, symbols in
    [bottom, max degree], counts in [-n^2, n^2]); nothing else is assumed.
    """
    rng = random.Random(seed)
    delta = g.max_degree
    path_bound = g.n
    count_bound = g.n * g.n
    states = []
    for v in range(1, g.n + 1):
        d = g.degree(v)
        prog_len = 3 if v == ROOT else 2 * d + 8
        states.append(
            ProcessorState(
                register=Register(
                    path=_random_path(rng, path_bound, delta),
                    count=rng.randint(-count_bound, count_bound),
                    bcc=_random_path(rng, path_bound, delta),
                ),
                path=_random_path(rng, path_bound, delta),
                count=rng.randint(-count_bound, count_bound),
                n_in=rng.randint(0, delta),
                n_out=rng.randint(0, delta),
                read_path=[_random_path(rng, path_bound, delta) for _ in range(d)],
                read_count=[rng.randint(-count_bound, count_bound) for _ in range(d)],
                read_bcc=[_random_path(rng, path_bound, delta) for _ in range(d)],
                pc=rng.randrange(prog_len),
            )
        )
    return Configuration(g, states)


class FaultTargetError(ValueError):
    """Fault names a node or field that does not exist, or an out-of-bound value."""


@dataclass(frozen=True)
class FaultSpec:
    """A transient corruption event.

    ``trigger`` is a 0-based step index (fires before that step executes) or
    POST_STABILIZATION (fires when stabilization is first declared).
    ``targets`` lists (node, field) pairs with field one of path / count /
    bcc / pc / locals; ``random_fields`` additionally corrupts that many
    random register-or-pc slots.  ``values`` optionally pins explicit values
    per target; anything else is drawn randomly within type bounds from
    ``seed``.
    """

    trigger: int | str = 0
    targets: tuple[tuple[NodeId, str], ...] = ()
    random_fields: int = 0
    values: Mapping[tuple[NodeId, str], object] | None = None
    seed: int = 0


@dataclass(frozen=True)
class FaultEvent:
    step: int
    round: int
    node: NodeId
    fields: tuple[str, ...]


def _validate_path_value(value: object, path_bound: int, delta: int) -> Path:
    if (
        not isinstance(value, tuple)
        or not value
        or len(value) > path_bound
        or any(not isinstance(s, int) or not 0 <= s <= delta for s in value)
    ):
        raise FaultTargetError(
            f"path value {value!r} violates bounds (length 1..{path_bound}, "
            f"symbols 0..{delta})"
        )
    return value


def _apply_fault_targets(
    states: list[ProcessorState], g: Graph, spec: FaultSpec
) -> list[tuple[NodeId, str]]:
    rng = random.Random(spec.seed)
    delta = g.max_degree
    path_bound = g.n
    count_bound = g.n * g.n
    targets = list(spec.targets)
    if spec.random_fields:
        pool = [
            (v, f) for v in range(1, g.n + 1) for f in REGISTER_FIELDS + ("pc",)
        ]
        if spec.random_fields > len(pool):
            raise FaultTargetError(
                f"cannot pick {spec.random_fields} distinct fields from {len(pool)}"
            )
        targets.extend(rng.sample(pool, spec.random_fields))

    for v, fname in targets:
        if not 1 <= v <= g.n:
            raise FaultTargetError(f"fault target node {v} outside 1..{g.n}")
        if fname not in FAULT_FIELDS:
            raise FaultTargetError(f"unknown fault field {fname!r}")
        st = states[v - 1].clone()
        d = g.degree(v)
        prog_len = 3 if v == ROOT else 2 * d + 8
        explicit = None if spec.values is None else spec.values.get((v, fname))
        if fname == "path" or fname == "bcc":
            if explicit is not None:
                value = _validate_path_value(explicit, path_bound, delta)
            else:
                value = _random_path(rng, path_bound, delta)
            st.register = st.register._replace(**{fname: value})
        elif fname == "count":
            if explicit is not None:
                if not isinstance(explicit, int) or abs(explicit) > count_bound:
                    raise FaultTargetError(
                        f"count value {explicit!r} outside [-{count_bound}, {count_bound}]"
                    )
                value = explicit
            else:
                value = rng.randint(-count_bound, count_bound)
            st.register = st.register._replace(count=value)
        elif fname == "pc":
            if explicit is not None:
                if not isinstance(explicit, int) or not 0 <= explicit < prog_len:
                    raise FaultTargetError(f"pc value {explicit!r} outside 0..{prog_len - 1}")
                st.pc = explicit
            else:
                st.pc = rng.randrange(prog_len)
        else:  # locals
            st.path = _random_path(rng, path_bound, delta)
            st.count = rng.randint(-count_bound, count_bound)
            st.n_in = rng.randint(0, delta)
            st.n_out = rng.randint(0, delta)
            st.read_path = [_random_path(rng, path_bound, delta) for _ in range(d)]
            st.read_count = [rng.randint(-count_bound, count_bound) for _ in range(d)]
            st.read_bcc = [_random_path(rng, path_bound, delta) for _ in range(d)]
        states[v - 1] = st
    return targets


def inject_fault(c: Configuration, spec: FaultSpec, seed: int | None = None) -> Configuration:
    """Apply one fault spec to a configuration; everything untargeted is unchanged."""
    if seed is not None:
        spec = FaultSpec(
            trigger=spec.trigger,
            targets=spec.targets,
            random_fields=spec.random_fields,
            values=spec.values,
            seed=seed,
        )
    states = list(c.states)
    _apply_fault_targets(states, c.graph, spec)
    return Configuration(c.graph, states)


# ---------------------------------------------------------------------------
# stepping

def _step(c: Configuration, pid: NodeId) -> tuple[Configuration, StepEvent]:
    g = c.graph
    states = list(c.states)
    nbrs = g.neighbors(pid)

    def read_neighbor(port: int) -> Register:
        return states[nbrs[port - 1] - 1].register

    new_state, event = execute_step(states[pid - 1], c.programs[pid - 1], read_neighbor)
    states[pid - 1] = new_state
    return Configuration(g, states), event


def step(c: Configuration, pid: NodeId) -> Configuration:
    """Activate one processor for a single atomic step.

    Only states[pid] changes, and only its own register can be written;
    every other processor state is returned untouched.
    """
    if not 1 <= pid <= c.graph.n:
        raise ValueError(f"processor id {pid} outside 1..{c.graph.n}")
    return _step(c, pid)[0]


def round_boundaries(schedule: Sequence[NodeId], n: int) -> list[int]:
    """Greedy round segmentation: 1-based indices of the steps that end rounds.

    A round ends at the first step by which every one of the n processors
    has been activated since the previous boundary; a trailing incomplete
    segment contributes no boundary.
    """
    boundaries = []
    seen: set[NodeId] = set()
    for i, pid in enumerate(schedule, start=1):
        seen.add(pid)
        if len(seen) == n:
            boundaries.append(i)
            seen = set()
    return boundaries


# ---------------------------------------------------------------------------
# full runs

@dataclass(frozen=True)
class RoundRecord:
    index: int
    end_step: int
    legitimate: bool
    changed: bool
    registers: tuple[Register, ...] | None = None


@dataclass
class Trace:
    """Per-round summary of a run; register snapshots only when requested."""

    rounds: list[RoundRecord] = field(default_factory=list)
    steps: list[tuple[int, NodeId, StepEvent]] = field(default_factory=list)


@dataclass
class RunReport:
    stabilized: bool
    stabilization_round: int | None
    rounds: int
    total_steps: int
    fault_events: list[FaultEvent]
    detection: Any  # DetectionResult | None
    oracle_match: bool | None
    rounds_to_stabilize: int | None
    post_stabilization_changes: int | None
    max_path_len: int
    max_register_bits: int
    scheduler: str
    final_registers: tuple[Register, ...] = ()


def default_max_rounds(g: Graph) -> int:
    """Engineering margin over the asymptotic round bound: 10 * d * n * delta."""
    return max(10, 10 * max(1, g.diameter) * g.n * max(1, g.max_degree))


def run(
    g: Graph,
    scheduler,
    init: Configuration,
    faults: Sequence[FaultSpec] = (),
    max_rounds: int | None = None,
    closure_rounds: int = 0,
    confirm_rounds: int = 2,
    record_rounds: bool = False,
    record_steps: bool = False,
    gt: GroundTruth | None = None,
) -> tuple[Trace, RunReport]:
    """Execute until stabilization (plus optional closure window) or max_rounds.

    Stabilization is declared at a round boundary where all registers equal
    the ground truth and have stayed unchanged for ``confirm_rounds``
    consecutive complete rounds.  Post-stabilization faults fire at the first
    declaration and the run then continues until it re-stabilizes.
    Non-convergence within ``max_rounds`` (per stabilization attempt) is
    reported, not raised.
    """
    if max_rounds is None:
        max_rounds = default_max_rounds(g)
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    if gt is None:
        gt = ground_truth(g)
    gt_regs = gt.registers
    n = g.n
    delta = g.max_degree
    count_bound = n * n

    states = [st.clone() for st in init.states]
    programs = [node_program(g, v) for v in range(1, n + 1)]
    neighbor_ids = [g.neighbors(v) for v in range(1, n + 1)]

    def make_reader(v: NodeId):
        nbrs = neighbor_ids[v - 1]

        def read_neighbor(port: int) -> Register:
            return states[nbrs[port - 1] - 1].register

        return read_neighbor

    readers = [make_reader(v) for v in range(1, n + 1)]

    step_faults = deque(
        sorted(
            (f for f in faults if isinstance(f.trigger, int)), key=lambda f: f.trigger
        )
    )
    post_faults = deque(f for f in faults if f.trigger == POST_STABILIZATION)

    trace = Trace()
    fault_events: list[FaultEvent] = []
    total_steps = 0
    rounds_completed = 0
    attempt_start = 0
    seen: set[NodeId] = set()
    changed_this_round = False
    streak = 0
    candidate: int | None = None
    stabilized = False
    stabilization_round: int | None = None
    in_closure = False
    closure_ran = False
    closure_done = 0
    closure_changes = 0

    max_path_len = 0
    max_bits = 0

    def note_register(reg: Register) -> None:
        nonlocal max_path_len, max_bits
        plen = max(len(reg.path), len(reg.bcc))
        if plen > max_path_len:
            max_path_len = plen
        bits = register_bits(reg, delta, count_bound)
        if bits > max_bits:
            max_bits = bits

    for st in states:
        note_register(st.register)

    def fire(specs) -> None:
        nonlocal changed_this_round
        for spec in specs:
            touched = _apply_fault_targets(states, g, spec)
            for v in sorted({v for v, _ in touched}):
                fields_hit = tuple(f for w, f in touched if w == v)
                fault_events.append(FaultEvent(total_steps, rounds_completed, v, fields_hit))
            changed_this_round = True
            for st in states:
                note_register(st.register)

    activations = scheduler.activations(n)
    # hard safety net: a fair scheduler closes rounds almost surely, but a
    # bounded run must terminate even on pathological random tails
    step_cap = 1000 * n * (max_rounds + closure_rounds + 10)

    while total_steps < step_cap:
        if not in_closure and rounds_completed - attempt_start >= max_rounds:
            break
        while step_faults and step_faults[0].trigger <= total_steps:
            fire([step_faults.popleft()])
        pid = next(activations)
        new_state, event = execute_step(states[pid - 1], programs[pid - 1], readers[pid - 1])
        states[pid - 1] = new_state
        total_steps += 1
        seen.add(pid)
        if record_steps:
            trace.steps.append((total_steps, pid, event))
        if event.kind == "write":
            note_register(new_state.register)
            if event.changed:
                changed_this_round = True
                if in_closure:
                    closure_changes += 1

        if len(seen) < n:
            continue

        # round boundary
        rounds_completed += 1
        seen = set()
        legitimate = tuple(st.register for st in states) == gt_regs
        if record_rounds:
            trace.rounds.append(
                RoundRecord(
                    rounds_completed,
                    total_steps,
                    legitimate,
                    changed_this_round,
                    tuple(st.register for st in states),
                )
            )
        else:
            trace.rounds.append(
                RoundRecord(rounds_completed, total_steps, legitimate, changed_this_round)
            )

        if in_closure:
            closure_done += 1
            changed_this_round = False
            if closure_done >= closure_rounds:
                break
            continue

        if legitimate:
            if streak == 0 or changed_this_round:
                streak = 1
                candidate = rounds_completed
            else:
                streak += 1
        else:
            streak = 0
            candidate = None
        changed_this_round = False

        if streak >= confirm_rounds:
            stabilized = True
            stabilization_round = candidate
            if post_faults:
                fire([post_faults.popleft()])
                stabilized = False
                stabilization_round = None
                streak = 0
                candidate = None
                attempt_start = rounds_completed
            elif closure_rounds > 0:
                in_closure = True
                closure_ran = True
            else:
                break

    detection = None
    oracle_match = None
    if stabilized:
        from . import analysis

        final = Configuration(g, states)
        detection = analysis.extract(final, gt=gt)
        oracle_match = analysis.certify(detection, g).match

    report = RunReport(
        stabilized=stabilized,
        stabilization_round=stabilization_round,
        rounds=rounds_completed,
        total_steps=total_steps,
        fault_events=fault_events,
        detection=detection,
        oracle_match=oracle_match,
        rounds_to_stabilize=(
            None if stabilization_round is None else stabilization_round - attempt_start
        ),
        post_stabilization_changes=closure_changes if closure_ran else None,
        max_path_len=max_path_len,
        max_register_bits=max_bits,
        scheduler=getattr(scheduler, "name", type(scheduler).__name__),
        final_registers=tuple(st.register for st in states),
    )
    return trace, report
