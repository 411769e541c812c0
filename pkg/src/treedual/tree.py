"""Finite event trees, adapted processes, stopping regions, expectations.

An event tree is the discrete stand-in for a filtered probability space:
nodes are states, depth is time, and each non-leaf node distributes
conditional branch probabilities over its children.  Everything downstream
(scenarios, solvers, verifiers) references immutable trees by node id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MalformedTree

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Node:
    nid: str
    parent: str | None
    t: int
    p: float  # conditional branch probability given the parent


@dataclass(frozen=True)
class EventTree:
    """Validated rooted tree with branch probabilities.

    ``order`` lists node ids parents-first (construction order), which all
    iteration downstream relies on for determinism.
    """

    nodes: dict[str, Node]
    order: tuple[str, ...]
    children: dict[str, tuple[str, ...]]
    root: str
    horizon: int
    path_prob: dict[str, float]
    leaves: tuple[str, ...] = field(default=())

    def parent(self, nid: str) -> str | None:
        return self.nodes[nid].parent

    def time(self, nid: str) -> int:
        return self.nodes[nid].t

    def is_leaf(self, nid: str) -> bool:
        return not self.children[nid]

    def nodes_at(self, t: int) -> list[str]:
        return [nid for nid in self.order if self.nodes[nid].t == t]

    def path_to(self, nid: str) -> list[str]:
        """Node ids from the root down to ``nid`` inclusive."""
        path = [nid]
        while (up := self.nodes[path[-1]].parent) is not None:
            path.append(up)
        path.reverse()
        return path

    def descendants(self, nid: str) -> list[str]:
        """``nid`` and everything below it, parents-first."""
        out = [nid]
        i = 0
        while i < len(out):
            out.extend(self.children[out[i]])
            i += 1
        return out


def build_tree(node_specs) -> EventTree:
    """Build and validate an EventTree.

    ``node_specs`` is an iterable of ``(id, parent_id_or_None, probability)``
    triples, parents listed before children.  Raises MalformedTree on orphan
    nodes, duplicate ids, non-positive probabilities, children whose
    conditional probabilities do not sum to one, or a missing/duplicate root.
    """
    nodes: dict[str, Node] = {}
    children: dict[str, list[str]] = {}
    root = None
    for spec in node_specs:
        nid, parent, p = spec
        nid = str(nid)
        if nid in nodes:
            raise MalformedTree(f"duplicate node id {nid!r}")
        if parent is None:
            if root is not None:
                raise MalformedTree("more than one root")
            t = 0
            p = 1.0
            root = nid
        else:
            parent = str(parent)
            if parent not in nodes:
                raise MalformedTree(f"node {nid!r} names unknown parent {parent!r}")
            t = nodes[parent].t + 1
            p = float(p)
            if not (0.0 < p <= 1.0):
                raise MalformedTree(f"branch probability of {nid!r} must be in (0,1], got {p}")
            children[parent].append(nid)
        nodes[nid] = Node(nid, parent, t, p)
        children[nid] = []
    if root is None:
        raise MalformedTree("no root node")

    for nid, kids in children.items():
        if kids:
            s = sum(nodes[k].p for k in kids)
            if abs(s - 1.0) > PROB_TOL:
                raise MalformedTree(
                    f"branch probabilities under {nid!r} sum to {s:.12g}, expected 1"
                )

    leaves = tuple(nid for nid in nodes if not children[nid])
    horizon = max(n.t for n in nodes.values())
    for leaf in leaves:
        if nodes[leaf].t != horizon:
            raise MalformedTree(
                f"leaf {leaf!r} at time {nodes[leaf].t} but horizon is {horizon}"
            )

    path_prob: dict[str, float] = {}
    for nid in nodes:  # insertion order is parents-first
        n = nodes[nid]
        path_prob[nid] = n.p if n.parent is None else path_prob[n.parent] * n.p
        if path_prob[nid] <= 0.0:
            raise MalformedTree(f"path probability of {nid!r} is not positive")

    return EventTree(
        nodes=nodes,
        order=tuple(nodes),
        children={k: tuple(v) for k, v in children.items()},
        root=root,
        horizon=horizon,
        path_prob=path_prob,
        leaves=leaves,
    )


@dataclass(frozen=True)
class AdaptedProcess:
    """A number (or tuple of numbers) attached to every node of a tree."""

    values: dict[str, object]

    def __getitem__(self, nid):
        return self.values[nid]

    def bind(self, tree: EventTree) -> "AdaptedProcess":
        missing = [nid for nid in tree.order if nid not in self.values]
        if missing:
            raise MalformedTree(f"process undefined on nodes {missing}")
        return self


def as_process_map(tree: EventTree, process) -> dict[str, float]:
    """Coerce a scalar, dict, or AdaptedProcess to a node->value dict."""
    if isinstance(process, AdaptedProcess):
        return {nid: process.values[nid] for nid in tree.order}
    if isinstance(process, dict):
        return {nid: process[nid] for nid in tree.order}
    x = float(process)
    return {nid: x for nid in tree.order}


@dataclass(frozen=True)
class StoppingRegion:
    """An antichain of nodes covering every root-to-leaf path exactly once.

    Encodes the stopping time from which the no-borrowing constraints bind:
    the constrained region is everything at or below a stop node.
    """

    stop_nodes: frozenset[str]

    def validate(self, tree: EventTree) -> "StoppingRegion":
        unknown = self.stop_nodes - set(tree.order)
        if unknown:
            raise MalformedTree(f"stop nodes not in tree: {sorted(unknown)}")
        for leaf in tree.leaves:
            hits = [nid for nid in tree.path_to(leaf) if nid in self.stop_nodes]
            if len(hits) != 1:
                raise MalformedTree(
                    f"path to leaf {leaf!r} crosses {len(hits)} stop nodes, expected 1"
                )
        return self


def constrained_region(tree: EventTree, theta0: StoppingRegion) -> set[str]:
    """Nodes with a stop node among their ancestors-or-self.

    The returned set always contains every leaf (path coverage), and grows
    monotonically as stop nodes move toward the root.
    """
    theta0.validate(tree)
    region: set[str] = set()
    for stop in theta0.stop_nodes:
        region.update(tree.descendants(stop))
    return region


def expectation(tree: EventTree, process, weight) -> float:
    """Sum of path-probability * process * weight over all nodes."""
    proc = as_process_map(tree, process)
    wgt = as_process_map(tree, weight)
    return sum(tree.path_prob[nid] * proc[nid] * wgt[nid] for nid in tree.order)
