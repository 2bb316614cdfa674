"""Decision layer: read bridges, articulation points, and component labels
out of a stabilized configuration, then certify them against brute force.

Extraction only uses information each node can see locally: its own register,
its neighbors' registers, and the port maps.  Which child subtree an incoming
non-tree edge belongs to is decided by a path prefix test, so no extra
protocol fields are needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .graph import Edge, Graph, NodeId, ROOT, canonical_edge
from .oracle import (
    GroundTruth,
    brute_articulation_points,
    brute_bcc_partition,
    brute_bridges,
    ground_truth,
)
from .protocol import LinkClass, Path, classify_link, format_path, is_prefix

if TYPE_CHECKING:
    from .simulator import Configuration


class NotStabilizedError(Exception):
    """Extraction refuses configurations whose registers differ from ground truth."""


@dataclass(frozen=True)
class DetectionResult:
    bridges: frozenset[Edge]
    articulation_points: frozenset[NodeId]
    component_of: dict[NodeId, Path]

    def partition(self) -> set[frozenset[NodeId]]:
        groups: dict[Path, set[NodeId]] = {}
        for v, label in self.component_of.items():
            groups.setdefault(label, set()).add(v)
        return {frozenset(vs) for vs in groups.values()}


def extract(c: "Configuration", gt: GroundTruth | None = None) -> DetectionResult:
    """Read the detection sets out of a legitimate configuration.

    Bridges are the parent links of nodes with register count 0; a non-root
    node is an articulation point when some child's count equals the number
    of incoming non-tree edges arriving from that child's subtree, and the
    root is one when it has two or more children.  Component labels are the
    bcc registers verbatim.
    """
    g = c.graph
    if gt is None:
        gt = ground_truth(g)
    registers = c.registers()
    if registers != gt.registers:
        raise NotStabilizedError(
            "configuration is not legitimate; refusing to extract from garbage"
        )

    paths = {v: registers[v - 1].path for v in range(1, g.n + 1)}
    counts = {v: registers[v - 1].count for v in range(1, g.n + 1)}

    # per-node link classification from local information only
    parent: dict[NodeId, NodeId] = {}
    children: dict[NodeId, list[NodeId]] = {v: [] for v in range(1, g.n + 1)}
    incoming_nbrs: dict[NodeId, list[NodeId]] = {v: [] for v in range(1, g.n + 1)}
    for v in range(1, g.n + 1):
        for j, w in enumerate(g.neighbors(v), start=1):
            cls = classify_link(paths[v], paths[w], j, g.port_to(w, v))
            if cls is LinkClass.PARENT:
                parent[v] = w
            elif cls is LinkClass.CHILD:
                children[v].append(w)
            elif cls is LinkClass.INCOMING_NONTREE:
                incoming_nbrs[v].append(w)

    bridges = frozenset(
        canonical_edge(parent[v], v)
        for v in range(2, g.n + 1)
        if counts[v] == 0
    )

    aps: set[NodeId] = set()
    if len(children[ROOT]) >= 2:
        aps.add(ROOT)
    for v in range(2, g.n + 1):
        for child in children[v]:
            child_path = paths[v] + (g.port_to(v, child),)
            arrivals = sum(
                1 for l in incoming_nbrs[v] if is_prefix(child_path, paths[l])
            )
            if counts[child] == arrivals:
                aps.add(v)
                break

    # bridge-endpoint cross-check: both endpoints of degree >= 2 must already
    # carry the articulation mark; disagreement would mean the two detection
    # rules diverged on a legitimate configuration
    for u, v in bridges:
        for endpoint in (u, v):
            if g.degree(endpoint) >= 2 and endpoint not in aps:
                raise AssertionError(
                    f"bridge endpoint {endpoint} of degree >= 2 escaped the "
                    f"articulation rule"
                )

    component_of = {v: registers[v - 1].bcc for v in range(1, g.n + 1)}
    return DetectionResult(
        bridges=bridges,
        articulation_points=frozenset(aps),
        component_of=component_of,
    )


@dataclass(frozen=True)
class CertificationReport:
    match: bool
    mismatches: tuple[str, ...]


def certify(result: DetectionResult, g: Graph) -> CertificationReport:
    """Compare a detection result against the brute-force oracles."""
    mismatches: list[str] = []

    expected_bridges = frozenset(brute_bridges(g))
    for e in sorted(result.bridges - expected_bridges):
        mismatches.append(f"edge {e} reported as bridge but is not")
    for e in sorted(expected_bridges - result.bridges):
        mismatches.append(f"bridge {e} missed")

    expected_aps = frozenset(brute_articulation_points(g))
    for v in sorted(result.articulation_points - expected_aps):
        mismatches.append(f"node {v} reported as articulation point but is not")
    for v in sorted(expected_aps - result.articulation_points):
        mismatches.append(f"articulation point {v} missed")

    expected_parts = brute_bcc_partition(g)
    got_parts = result.partition()
    for part in sorted(got_parts - expected_parts, key=min):
        mismatches.append(f"component {sorted(part)} does not match any brute-force component")
    for part in sorted(expected_parts - got_parts, key=min):
        mismatches.append(f"brute-force component {sorted(part)} missed")

    return CertificationReport(match=not mismatches, mismatches=tuple(mismatches))


def alpha_independence(
    g: Graph,
    shuffles: int,
    seed: int,
    scheduler_name: str = "round-robin",
    max_rounds: int | None = None,
) -> bool:
    """Detection must not depend on the arbitrary port orderings.

    Runs the full pipeline under ``shuffles`` random port re-orderings of the
    same topology; true iff every run stabilizes and yields the same bridge
    set, articulation set, and component partition.  Labels are paths and may
    legitimately differ between orderings; the partition may not.
    """
    from . import simulator
    from .graph import shuffle_ports

    if shuffles < 2:
        raise ValueError("need at least 2 port orderings to compare")

    reference: tuple | None = None
    for i in range(shuffles):
        shuffled = shuffle_ports(g, seed + i) if i else g
        sched = simulator.make_scheduler(scheduler_name, seed=seed + 100 + i)
        init = simulator.init_arbitrary(shuffled, seed + 200 + i)
        _, report = simulator.run(shuffled, sched, init, max_rounds=max_rounds)
        if not report.stabilized or report.detection is None:
            return False
        d: DetectionResult = report.detection
        key = (d.bridges, d.articulation_points, frozenset(d.partition()))
        if reference is None:
            reference = key
        elif key != reference:
            return False
    return True


def label_summary(result: DetectionResult) -> dict[str, list[NodeId]]:
    """Readable component map: label string -> sorted members."""
    groups: dict[str, list[NodeId]] = {}
    for v, label in result.component_of.items():
        groups.setdefault(format_path(label), []).append(v)
    return {k: sorted(vs) for k, vs in sorted(groups.items())}
