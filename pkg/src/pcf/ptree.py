"""Probability trees: construction from data, event algebra over cuts,
conditioning (see), intervention (do), counterfactuals and conditional
probability queries.

Trees are immutable; see/do/counterfactual return new trees sharing node
ids and shape with the source, so events built on one tree remain valid on
its derivatives.
"""

from __future__ import annotations

import itertools
import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NotEnforceable, ZeroConditioning
from .tabular import DiscreteTable, Schema

_TOL = 1e-9


@dataclass(frozen=True)
class PTreeNode:
    """One statement node: `variable = code`, reached with `transition`
    probability from its parent. The root carries no statement."""

    id: int
    level: int
    variable: str | None
    code: int | None
    transition: float
    children: tuple["PTreeNode", ...] = ()


@dataclass(frozen=True)
class PTree:
    root: PTreeNode
    variable_order: tuple[str, ...]
    schema: Schema
    family: str = field(default_factory=lambda: uuid.uuid4().hex)

    def iter_nodes(self):
        """Pre-order traversal."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def node_map(self) -> dict[int, PTreeNode]:
        return {n.id: n for n in self.iter_nodes()}

    def parent_map(self) -> dict[int, int]:
        out = {}
        for node in self.iter_nodes():
            for child in node.children:
                out[child.id] = node.id
        return out

    def leaf_ids(self) -> frozenset[int]:
        return frozenset(n.id for n in self.iter_nodes() if not n.children)

    def path_probs(self) -> dict[int, float]:
        """Probability of the root-to-node path, for every node."""
        probs = {}

        def walk(node, acc):
            acc = acc * node.transition if node.level > 0 else 1.0
            probs[node.id] = acc
            for child in node.children:
                walk(child, acc)

        walk(self.root, 1.0)
        return probs

    def total_mass(self) -> float:
        probs = self.path_probs()
        return sum(probs[i] for i in self.leaf_ids())


@dataclass(frozen=True)
class Event:
    """A set of tree paths, represented by a minimal antichain of node ids
    (the cut) plus its leaf-level denotation."""

    family: str
    cut: frozenset[int]
    leaves: frozenset[int]

    def __eq__(self, other):
        if not isinstance(other, Event):
            return NotImplemented
        return self.family == other.family and self.leaves == other.leaves

    def __hash__(self):
        return hash((self.family, self.leaves))


def _check_same_tree(tree: PTree, event: Event) -> None:
    if event.family != tree.family:
        raise DataError("event belongs to a different tree")


# --------------------------------------------------------------------------
# Construction (empirical marginals at the root, conditional frequencies
# below, optional pruning threshold)
# --------------------------------------------------------------------------


def create_tree_from_data(
    data: DiscreteTable, variable_order, pruning_threshold: float = 0.0
) -> PTree:
    """Build a tree by recursive data partitioning along `variable_order`.

    Root children split on the first variable with empirical marginal
    probabilities; at depth k the transition is the conditional frequency
    of the value within the parent partition. Children whose transition
    falls below `pruning_threshold` are omitted.
    """
    variable_order = tuple(variable_order)
    if data.n_rows == 0:
        raise DataError("cannot build a tree from empty data")
    if not variable_order:
        raise DataError("variable order is empty")
    for var in variable_order:
        data.schema.index(var)  # raises on unknown variable
    if not 0.0 <= pruning_threshold < 1.0:
        raise DataError("pruning_threshold must lie in [0, 1)")

    counter = itertools.count(0)
    columns = {var: data.column(var) for var in variable_order}

    def build(indices: np.ndarray, depth: int) -> tuple[PTreeNode, ...]:
        if depth == len(variable_order):
            return ()
        var = variable_order[depth]
        col = columns[var][indices]
        values, counts = np.unique(col, return_counts=True)
        children = []
        for value, count in zip(values, counts):
            transition = count / len(indices)
            if transition < pruning_threshold:
                continue
            sub = indices[col == value]
            node_id = next(counter)
            grandchildren = build(sub, depth + 1)
            children.append(
                PTreeNode(
                    id=node_id,
                    level=depth + 1,
                    variable=var,
                    code=int(value),
                    transition=float(transition),
                    children=grandchildren,
                )
            )
        return tuple(children)

    # ids are assigned in construction order; renumber pre-order afterwards
    root = PTreeNode(
        id=-1,
        level=0,
        variable=None,
        code=None,
        transition=1.0,
        children=build(np.arange(data.n_rows), 0),
    )
    root = _renumber_preorder(root)
    return PTree(root=root, variable_order=variable_order, schema=data.schema)


def _renumber_preorder(root: PTreeNode) -> PTreeNode:
    counter = itertools.count(0)

    def rebuild(node: PTreeNode) -> PTreeNode:
        node_id = next(counter)
        return PTreeNode(
            id=node_id,
            level=node.level,
            variable=node.variable,
            code=node.code,
            transition=node.transition,
            children=tuple(rebuild(c) for c in node.children),
        )

    return rebuild(root)


def _with_transitions(tree: PTree, transitions: dict[int, float]) -> PTree:
    """New tree with the same shape/ids and replaced transitions."""

    def rebuild(node: PTreeNode) -> PTreeNode:
        return PTreeNode(
            id=node.id,
            level=node.level,
            variable=node.variable,
            code=node.code,
            transition=float(transitions.get(node.id, node.transition)),
            children=tuple(rebuild(c) for c in node.children),
        )

    return PTree(
        root=rebuild(tree.root),
        variable_order=tree.variable_order,
        schema=tree.schema,
        family=tree.family,
    )


# --------------------------------------------------------------------------
# Event algebra
# --------------------------------------------------------------------------


def _leaves_under(tree: PTree, cut: frozenset[int]) -> frozenset[int]:
    leaves = set()

    def walk(node, inside):
        inside = inside or node.id in cut
        if not node.children:
            if inside:
                leaves.add(node.id)
            return
        for child in node.children:
            walk(child, inside)

    walk(tree.root, False)
    return frozenset(leaves)


def _canonical_cut(tree: PTree, leaves: frozenset[int]) -> frozenset[int]:
    """Maximal nodes all of whose leaves lie in `leaves`."""
    cut = set()

    def covered(node) -> bool:
        # True iff every leaf under node is in the set
        if not node.children:
            return node.id in leaves
        return all(covered(c) for c in node.children)

    def walk(node):
        if covered(node):
            cut.add(node.id)
            return
        for child in node.children:
            walk(child)

    walk(tree.root)
    return frozenset(cut)


def prop(tree: PTree, statement: tuple[str, int]) -> Event:
    """Event `variable = code`: the cut of highest nodes carrying the
    statement. A value absent from every branch yields the empty event."""
    var, code = statement
    if var not in tree.variable_order:
        raise DataError(f"variable {var!r} not in the tree's order")
    cut = frozenset(
        n.id for n in tree.iter_nodes() if n.variable == var and n.code == code
    )
    return Event(family=tree.family, cut=cut, leaves=_leaves_under(tree, cut))


def certain_event(tree: PTree) -> Event:
    return Event(
        family=tree.family,
        cut=frozenset({tree.root.id}),
        leaves=tree.leaf_ids(),
    )


def empty_event(tree: PTree) -> Event:
    return Event(family=tree.family, cut=frozenset(), leaves=frozenset())


def _combine(tree: PTree, leaves: frozenset[int]) -> Event:
    return Event(
        family=tree.family, cut=_canonical_cut(tree, leaves), leaves=leaves
    )


def event_and(tree: PTree, e1: Event, e2: Event) -> Event:
    _check_same_tree(tree, e1)
    _check_same_tree(tree, e2)
    return _combine(tree, e1.leaves & e2.leaves)


def event_or(tree: PTree, e1: Event, e2: Event) -> Event:
    _check_same_tree(tree, e1)
    _check_same_tree(tree, e2)
    return _combine(tree, e1.leaves | e2.leaves)


def event_not(tree: PTree, e: Event) -> Event:
    _check_same_tree(tree, e)
    return _combine(tree, tree.leaf_ids() - e.leaves)


def prob(tree: PTree, event: Event) -> float:
    """Total probability mass of the event's paths."""
    _check_same_tree(tree, event)
    probs = tree.path_probs()
    return float(sum(probs[i] for i in event.leaves))


# --------------------------------------------------------------------------
# see / do / counterfactual
# --------------------------------------------------------------------------


def see(tree: PTree, event: Event) -> PTree:
    """Condition the tree on the event (Bayes posterior over paths).

    Transitions above and at the cut are rescaled by posterior mass,
    off-event subtrees drop to zero, and transitions below the cut are
    unchanged. Raises ZeroConditioning when the event has no mass.
    """
    _check_same_tree(tree, event)
    probs = tree.path_probs()
    mass = sum(probs[i] for i in event.leaves)
    if mass <= 0.0:
        raise ZeroConditioning("conditioning event has zero probability")

    node_mass: dict[int, float] = {}

    def accumulate(node) -> float:
        if not node.children:
            m = probs[node.id] / mass if node.id in event.leaves else 0.0
        else:
            m = sum(accumulate(c) for c in node.children)
        node_mass[node.id] = m
        return m

    accumulate(tree.root)

    transitions: dict[int, float] = {}

    def assign(node, parent_mass):
        if parent_mass <= 0:
            # a zero-mass subtree keeps its original transitions; only the
            # edge into it carries the zero
            return
        for child in node.children:
            m = node_mass[child.id]
            transitions[child.id] = m / parent_mass
            assign(child, m)

    assign(tree.root, node_mass[tree.root.id])
    return _with_transitions(tree, transitions)


def _forced_transitions(tree: PTree, event: Event) -> dict[int, float]:
    """Transition overrides that make the event certain at its cut."""
    parent_of = tree.parent_map()
    nodes = tree.node_map()
    cut_parents: dict[int, list[int]] = {}
    for cid in event.cut:
        if cid == tree.root.id:
            continue
        cut_parents.setdefault(parent_of[cid], []).append(cid)
    overrides: dict[int, float] = {}
    for pid, cut_children in cut_parents.items():
        weight = sum(nodes[c].transition for c in cut_children)
        for child in nodes[pid].children:
            if child.id in event.cut:
                overrides[child.id] = (
                    child.transition / weight if weight > 0 else 1.0 / len(cut_children)
                )
            else:
                overrides[child.id] = 0.0
    return overrides


def _describe_branch(tree: PTree, leaf_id: int) -> str:
    parent_of = tree.parent_map()
    nodes = tree.node_map()
    path = []
    nid = leaf_id
    while nid in parent_of:
        node = nodes[nid]
        path.append(f"{node.variable}={node.code}")
        nid = parent_of[nid]
    return " / ".join(reversed(path))


def do(tree: PTree, event: Event) -> PTree:
    """Force the event with probability 1 by rewriting transitions into the
    cut; everything outside the cut's sibling families is untouched."""
    _check_same_tree(tree, event)
    if not event.cut:
        raise NotEnforceable("cannot enforce the empty event")
    if tree.root.id in event.cut:
        return tree  # already certain
    forced = _with_transitions(tree, _forced_transitions(tree, event))
    achieved = prob(forced, event)
    if abs(achieved - 1.0) > _TOL:
        probs = forced.path_probs()
        offender = next(
            (
                i
                for i in sorted(forced.leaf_ids() - event.leaves)
                if probs[i] > _TOL
            ),
            None,
        )
        branch = _describe_branch(tree, offender) if offender is not None else "?"
        raise NotEnforceable(
            f"event not enforceable: branch [{branch}] cannot reach the cut"
        )
    return forced


def counterfactual(
    tree: PTree, factual: Event, intervention: Event, query: Event
) -> float:
    """P(query under intervention | factual): condition above the cut on
    the factual, force the intervention at its cut, and reset everything
    below the cut to the original tree's transitions."""
    for e in (factual, intervention, query):
        _check_same_tree(tree, e)
    conditioned = see(tree, factual)

    # below-cut reset: original transitions for strict descendants of cut nodes
    original = {n.id: n.transition for n in tree.iter_nodes()}
    below: dict[int, float] = {}
    nodes = tree.node_map()

    def mark_descendants(node):
        for child in node.children:
            below[child.id] = original[child.id]
            mark_descendants(child)

    for cid in intervention.cut:
        mark_descendants(nodes[cid])

    merged = {n.id: n.transition for n in conditioned.iter_nodes()}
    merged.update(below)
    merged.update(_forced_transitions(tree, intervention))
    candidate = _with_transitions(tree, merged)

    achieved = prob(candidate, intervention)
    if abs(achieved - 1.0) > _TOL:
        raise NotEnforceable("intervention not enforceable given the factual premise")
    return prob(candidate, query)


def conditional_probability(
    tree: PTree, conditions: list[tuple[str, int]], target: tuple[str, int]
) -> float:
    """AND the condition statements, condition the tree, then read off the
    target's probability. Empty condition lists return 0.0 by contract."""
    if not conditions:
        return 0.0
    combined = None
    for statement in conditions:
        cut = prop(tree, statement)
        combined = cut if combined is None else event_and(tree, combined, cut)
    conditioned = see(tree, combined)
    return prob(conditioned, prop(tree, target))


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def tree_to_dict(tree: PTree) -> dict:
    nodes = []
    for node in tree.iter_nodes():
        nodes.append(
            {
                "id": node.id,
                "level": node.level,
                "variable": node.variable,
                "code": node.code,
                "transition": node.transition,
                "children": [c.id for c in node.children],
            }
        )
    return {"variable_order": list(tree.variable_order), "nodes": nodes}


def tree_from_dict(obj: dict, schema: Schema) -> PTree:
    records = {rec["id"]: rec for rec in obj["nodes"]}
    child_ids = {cid for rec in obj["nodes"] for cid in rec["children"]}
    root_ids = [rid for rid in records if rid not in child_ids]
    if len(root_ids) != 1:
        raise DataError("tree serialization must have exactly one root")

    def build(rid: int) -> PTreeNode:
        rec = records[rid]
        return PTreeNode(
            id=rec["id"],
            level=rec["level"],
            variable=rec["variable"],
            code=rec["code"],
            transition=rec["transition"],
            children=tuple(build(cid) for cid in rec["children"]),
        )

    return PTree(
        root=build(root_ids[0]),
        variable_order=tuple(obj["variable_order"]),
        schema=schema,
    )


def save_tree(tree: PTree, path) -> None:
    Path(path).write_text(json.dumps(tree_to_dict(tree)), encoding="utf-8")


def load_tree(path, schema: Schema) -> PTree:
    return tree_from_dict(
        json.loads(Path(path).read_text(encoding="utf-8")), schema
    )
