"""Score-based structure search: greedy hill climbing and tabu search.

Both searches honor edge knowledge (required/forbidden plus a target
variable that may never act as a parent) and are deterministic per seed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, InfeasibleKnowledge
from ..tabular import DiscreteTable
from .graphs import Dag, _has_path
from .scoring import BicScorer

_EPS = 1e-10


@dataclass(frozen=True)
class Knowledge:
    """Structural constraints supplied ahead of the search."""

    target: str
    forbidden: frozenset[tuple[str, str]] = field(default_factory=frozenset)
    required: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "forbidden", frozenset(tuple(e) for e in self.forbidden))
        object.__setattr__(self, "required", frozenset(tuple(e) for e in self.required))
        if self.required & self.forbidden:
            raise InfeasibleKnowledge(
                f"edges both required and forbidden: {sorted(self.required & self.forbidden)}"
            )
        for u, v in self.required:
            if u == self.target:
                raise InfeasibleKnowledge(
                    f"required edge ({u!r}, {v!r}) makes the target a parent"
                )
        if self.required and _required_cyclic(self.required):
            raise InfeasibleKnowledge("required edges form a directed cycle")


def _required_cyclic(required: frozenset[tuple[str, str]]) -> bool:
    edges = set()
    for edge in sorted(required):
        if _has_path(edges, edge[1], edge[0]):
            return True
        edges.add(edge)
    return False


@dataclass(frozen=True)
class SearchConfig:
    max_parents: int = 4
    restarts: int = 0
    seed: int = 0
    # tabu-only knobs; zero values reduce tabu search to plain hill climbing
    tabu_length: int = 0
    max_non_improving: int = 0


class _SearchState:
    """Mutable parent-set view of a DAG during search."""

    def __init__(self, nodes, edges, scorer: BicScorer):
        self.nodes = tuple(nodes)
        self.parents = {n: set() for n in self.nodes}
        for u, v in edges:
            self.parents[v].add(u)
        self.scorer = scorer
        self.score = sum(
            scorer.local_score(n, self.parents[n]) for n in self.nodes
        )

    def edges(self) -> set[tuple[str, str]]:
        return {(u, v) for v, ps in self.parents.items() for u in ps}

    def would_cycle(self, u: str, v: str) -> bool:
        return _has_path(self.edges(), v, u)

    def apply(self, move):
        kind, u, v = move
        if kind == "add":
            self.score += self._delta_parent_change(v, add=u)
            self.parents[v].add(u)
        elif kind == "del":
            self.score += self._delta_parent_change(v, remove=u)
            self.parents[v].remove(u)
        else:  # reverse (u, v) -> (v, u)
            self.score += self._delta_parent_change(v, remove=u)
            self.parents[v].remove(u)
            self.score += self._delta_parent_change(u, add=v)
            self.parents[u].add(v)

    def _delta_parent_change(self, node, add=None, remove=None) -> float:
        before = self.parents[node]
        after = set(before)
        if add is not None:
            after.add(add)
        if remove is not None:
            after.discard(remove)
        return self.scorer.local_score(node, after) - self.scorer.local_score(
            node, before
        )

    def move_delta(self, move) -> float:
        kind, u, v = move
        if kind == "add":
            return self._delta_parent_change(v, add=u)
        if kind == "del":
            return self._delta_parent_change(v, remove=u)
        return self._delta_parent_change(v, remove=u) + self._delta_parent_change(
            u, add=v
        )


def _legal_moves(state: _SearchState, knowledge: Knowledge, max_parents: int):
    forbidden = set(knowledge.forbidden)
    forbidden.update((knowledge.target, n) for n in state.nodes)
    required = knowledge.required
    edges = state.edges()
    for u in state.nodes:
        for v in state.nodes:
            if u == v:
                continue
            edge = (u, v)
            if edge in edges:
                if edge not in required:
                    yield ("del", u, v)
                    rev = (v, u)
                    if (
                        rev not in forbidden
                        and len(state.parents[u]) < max_parents
                        and not _has_path(edges - {edge}, u, v)
                    ):
                        yield ("rev", u, v)
            else:
                if (
                    edge not in forbidden
                    and (v, u) not in edges
                    and len(state.parents[v]) < max_parents
                    and not state.would_cycle(u, v)
                ):
                    yield ("add", u, v)


def _move_preference(move, target: str):
    """Sort key among equal-score moves: adding a target parent wins ties."""
    kind, u, v = move
    adds_target_parent = (kind == "add" and v == target) or (
        kind == "rev" and u == target
    )
    return (0 if adds_target_parent else 1, kind, u, v)


def _random_start(
    nodes, knowledge: Knowledge, max_parents: int, rng: np.random.Generator
) -> set[tuple[str, str]]:
    edges = set(knowledge.required)
    forbidden = set(knowledge.forbidden)
    forbidden.update((knowledge.target, n) for n in nodes)
    order = list(nodes)
    rng.shuffle(order)
    parents = {n: sum(1 for _, v in edges if v == n) for n in nodes}
    for i, v in enumerate(order):
        for u in order[:i]:
            edge = (u, v)
            if edge in edges or (v, u) in edges or edge in forbidden:
                continue
            if parents[v] >= max_parents:
                break
            if rng.random() < 0.2 and not _has_path(edges, v, u):
                edges.add(edge)
                parents[v] += 1
    return edges


def _validate_knowledge(table: DiscreteTable, knowledge: Knowledge) -> None:
    names = set(table.schema.names)
    for u, v in knowledge.required | knowledge.forbidden:
        if u not in names or v not in names:
            raise InfeasibleKnowledge(f"knowledge references unknown variable ({u!r}, {v!r})")
    if knowledge.target not in names:
        raise DataError(f"target {knowledge.target!r} not a table variable")


def _climb(
    state: _SearchState, knowledge: Knowledge, config: SearchConfig
) -> None:
    while True:
        best = None
        for move in _legal_moves(state, knowledge, config.max_parents):
            delta = state.move_delta(move)
            if delta <= _EPS:
                continue
            key = (-delta, _move_preference(move, knowledge.target))
            if best is None or key < best[0]:
                best = (key, move)
        if best is None:
            return
        state.apply(best[1])


def hill_climb(
    table: DiscreteTable, knowledge: Knowledge, config: SearchConfig = SearchConfig()
) -> Dag:
    """Greedy local search over add/delete/reverse moves under BIC."""
    _validate_knowledge(table, knowledge)
    scorer = BicScorer(table)
    nodes = table.schema.names
    rng = np.random.default_rng(config.seed)

    best_state = _SearchState(nodes, knowledge.required, scorer)
    _climb(best_state, knowledge, config)
    for _ in range(config.restarts):
        start = _random_start(nodes, knowledge, config.max_parents, rng)
        state = _SearchState(nodes, start, scorer)
        _climb(state, knowledge, config)
        if state.score > best_state.score + _EPS:
            best_state = state
    return Dag(nodes=nodes, edges=frozenset(best_state.edges()))


def tabu_search(
    table: DiscreteTable, knowledge: Knowledge, config: SearchConfig = SearchConfig()
) -> Dag:
    """Hill climbing that may take score-decreasing moves while the inverse
    of a recent move sits on the tabu list."""
    _validate_knowledge(table, knowledge)
    scorer = BicScorer(table)
    nodes = table.schema.names
    rng = np.random.default_rng(config.seed)

    def run(start_edges):
        state = _SearchState(nodes, start_edges, scorer)
        best_edges, best_score = state.edges(), state.score
        tabu: deque = deque(maxlen=max(config.tabu_length, 1))
        non_improving = 0
        while True:
            best = None
            for move in _legal_moves(state, knowledge, config.max_parents):
                delta = state.move_delta(move)
                is_tabu = _inverse(move) in tabu and config.tabu_length > 0
                aspires = state.score + delta > best_score + _EPS
                if is_tabu and not aspires:
                    continue
                key = (-delta, _move_preference(move, knowledge.target))
                if best is None or key < best[0]:
                    best = (key, move, delta)
            if best is None:
                break
            _, move, delta = best
            if delta <= _EPS:
                if non_improving >= config.max_non_improving:
                    break
                non_improving += 1
            else:
                non_improving = 0
            state.apply(move)
            if config.tabu_length > 0:
                tabu.append(_inverse(move))
            if state.score > best_score + _EPS:
                best_score, best_edges = state.score, state.edges()
        return best_edges, best_score

    best_edges, best_score = run(knowledge.required)
    for _ in range(config.restarts):
        start = _random_start(nodes, knowledge, config.max_parents, rng)
        edges, score = run(start)
        if score > best_score + _EPS:
            best_edges, best_score = edges, score
    return Dag(nodes=nodes, edges=frozenset(best_edges))


def _inverse(move):
    kind, u, v = move
    if kind == "add":
        return ("del", u, v)
    if kind == "del":
        return ("add", u, v)
    return ("rev", v, u)
