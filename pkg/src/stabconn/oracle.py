"""Centralized ground truth, independent of the distributed protocol.

Bridges, articulation points, and bridge-connected components are computed by
brute force (remove one element, test connectivity), and the target register
contents are assembled from the lexicographically-first depth-first search
tree: per-node root paths, bypass counts for each parent link, and component
labels.  The two routes are deliberately independent so each can certify the
other.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .graph import Edge, Graph, NodeId, ROOT, canonical_edge
from .protocol import Path, Register, ROOT_PATH, is_prefix


def is_connected(
    g: Graph,
    removed_nodes: Iterable[NodeId] = (),
    removed_edges: Iterable[Edge] = (),
) -> bool:
    """True iff the surviving nodes form at most one connected component."""
    dead_nodes = set(removed_nodes)
    dead_edges = {canonical_edge(u, v) for u, v in removed_edges}
    alive = [v for v in range(1, g.n + 1) if v not in dead_nodes]
    if len(alive) <= 1:
        return True
    reached = {alive[0]}
    frontier = [alive[0]]
    while frontier:
        v = frontier.pop()
        for w in g.neighbors(v):
            if w in dead_nodes or canonical_edge(v, w) in dead_edges:
                continue
            if w not in reached:
                reached.add(w)
                frontier.append(w)
    return len(reached) == len(alive)


def brute_bridges(g: Graph) -> set[Edge]:
    """Edges whose single removal disconnects the graph."""
    return {e for e in g.edges if not is_connected(g, removed_edges=[e])}


def brute_articulation_points(g: Graph) -> set[NodeId]:
    """Nodes whose single removal disconnects the remaining nodes."""
    return {
        v
        for v in range(1, g.n + 1)
        if not is_connected(g, removed_nodes=[v])
    }


def brute_bcc_partition(g: Graph) -> set[frozenset[NodeId]]:
    """Connected components left after deleting every bridge."""
    bridges = brute_bridges(g)
    unassigned = set(range(1, g.n + 1))
    parts: set[frozenset[NodeId]] = set()
    while unassigned:
        start = min(unassigned)
        comp = {start}
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for w in g.neighbors(v):
                if canonical_edge(v, w) in bridges or w in comp:
                    continue
                comp.add(w)
                frontier.append(w)
        parts.add(frozenset(comp))
        unassigned -= comp
    return parts


def first_dfs_paths(g: Graph) -> dict[NodeId, Path]:
    """Root paths of the first depth-first search tree.

    The traversal always descends through the smallest unused port index, and
    each path extends the parent's path by the parent's port number for the
    child; the result is the lexicographically minimal simple root path of
    every node.
    """
    paths: dict[NodeId, Path] = {ROOT: ROOT_PATH}
    # stack entries: (node, next port index to try)
    stack: list[list[int]] = [[ROOT, 1]]
    while stack:
        entry = stack[-1]
        v, port = entry
        if port > g.degree(v):
            stack.pop()
            continue
        entry[1] += 1
        w = g.neighbors(v)[port - 1]
        if w not in paths:
            paths[w] = paths[v] + (port,)
            stack.append([w, 1])
    return paths


def dfs_tree(g: Graph, paths: dict[NodeId, Path]) -> tuple[dict[NodeId, NodeId], dict[NodeId, list[NodeId]]]:
    """Parent and children maps induced by the path assignment."""
    parent: dict[NodeId, NodeId] = {}
    children: dict[NodeId, list[NodeId]] = {v: [] for v in range(1, g.n + 1)}
    for v in range(1, g.n + 1):
        if v == ROOT:
            continue
        p = paths[v][:-1]
        for w in g.neighbors(v):
            if paths[w] == p and g.port_to(w, v) == paths[v][-1]:
                parent[v] = w
                break
        else:
            raise ValueError(f"paths do not define a tree: node {v} has no parent")
        children[parent[v]].append(v)
    return parent, children


def tree_edges(g: Graph, paths: dict[NodeId, Path]) -> set[Edge]:
    parent, _ = dfs_tree(g, paths)
    return {canonical_edge(p, v) for v, p in parent.items()}


def _oriented_nontree(g: Graph, paths: dict[NodeId, Path]) -> list[tuple[NodeId, NodeId]]:
    """Non-tree edges as (descendant, ancestor) pairs."""
    tree = tree_edges(g, paths)
    out = []
    for u, v in g.edges:
        if (u, v) in tree:
            continue
        if is_prefix(paths[u], paths[v]):
            out.append((v, u))
        elif is_prefix(paths[v], paths[u]):
            out.append((u, v))
        else:
            raise ValueError(
                f"non-tree edge ({u}, {v}) joins unrelated nodes; not a DFS tree"
            )
    return out


def bypass_count(g: Graph, paths: dict[NodeId, Path], v: NodeId) -> int:
    """Number of non-tree edges that bypass the parent link of v.

    A non-tree edge (k, l), k the descendant endpoint, bypasses the link from
    parent(v) to v when k lies in v's subtree (k = v allowed) and l is at or
    above parent(v).  Defined for non-root nodes only.
    """
    if v == ROOT:
        raise ValueError("the root has no parent link")
    parent_path = paths[v][:-1]
    total = 0
    for k, l in _oriented_nontree(g, paths):
        if is_prefix(paths[v], paths[k]) and is_prefix(paths[l], parent_path):
            total += 1
    return total


def incoming_split(g: Graph, paths: dict[NodeId, Path], parent: NodeId, child: NodeId) -> int:
    """Incoming non-tree edges at ``parent`` arriving from ``child``'s subtree."""
    _, children = dfs_tree(g, paths)
    if child not in children[parent]:
        raise ValueError(f"node {child} is not a tree child of node {parent}")
    total = 0
    for k, l in _oriented_nontree(g, paths):
        if l == parent and is_prefix(paths[child], paths[k]):
            total += 1
    return total


def classify_counts(g: Graph, paths: dict[NodeId, Path], v: NodeId) -> tuple[int, int]:
    """(incoming, outgoing) non-tree edge counts at v, from path prefixes."""
    tree = tree_edges(g, paths)
    n_in = n_out = 0
    for w in g.neighbors(v):
        if canonical_edge(v, w) in tree:
            continue
        if is_prefix(paths[v], paths[w]):
            n_in += 1
        elif is_prefix(paths[w], paths[v]):
            n_out += 1
    return n_in, n_out


@dataclass(frozen=True)
class GroundTruth:
    """Everything a stabilized run must agree with."""

    graph: Graph
    paths: dict[NodeId, Path]
    parent: dict[NodeId, NodeId]
    children: dict[NodeId, list[NodeId]]
    counts: dict[NodeId, int]
    bcc_labels: dict[NodeId, Path]
    representatives: frozenset[NodeId]
    bridges: frozenset[Edge]
    articulation_points: frozenset[NodeId]

    @cached_property
    def registers(self) -> tuple[Register, ...]:
        return tuple(
            Register(self.paths[v], self.counts[v], self.bcc_labels[v])
            for v in range(1, self.graph.n + 1)
        )

    @cached_property
    def partition(self) -> set[frozenset[NodeId]]:
        groups: dict[Path, set[NodeId]] = {}
        for v, label in self.bcc_labels.items():
            groups.setdefault(label, set()).add(v)
        return {frozenset(vs) for vs in groups.values()}


def ground_truth(g: Graph) -> GroundTruth:
    """Assemble the stabilized register contents and the detection sets."""
    paths = first_dfs_paths(g)
    parent, children = dfs_tree(g, paths)
    counts = {ROOT: 0}
    for v in range(2, g.n + 1):
        counts[v] = bypass_count(g, paths, v)

    representatives = {ROOT} | {v for v in range(2, g.n + 1) if counts[v] == 0}
    bcc_labels: dict[NodeId, Path] = {}
    for v in sorted(range(1, g.n + 1), key=lambda u: len(paths[u])):
        if v in representatives:
            bcc_labels[v] = paths[v]
        else:
            bcc_labels[v] = bcc_labels[parent[v]]

    bridges = {
        canonical_edge(parent[v], v) for v in range(2, g.n + 1) if counts[v] == 0
    }

    aps: set[NodeId] = set()
    if len(children[ROOT]) >= 2:
        aps.add(ROOT)
    for v in range(2, g.n + 1):
        for c in children[v]:
            if counts[c] == incoming_split(g, paths, v, c):
                aps.add(v)
                break

    return GroundTruth(
        graph=g,
        paths=paths,
        parent=parent,
        children=children,
        counts=counts,
        bcc_labels=bcc_labels,
        representatives=frozenset(representatives),
        bridges=frozenset(bridges),
        articulation_points=frozenset(aps),
    )
