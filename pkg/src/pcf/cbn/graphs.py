"""Directed and mixed graphs, model averaging and topological ordering."""

from __future__ import annotations

import csv
import heapq
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError

log = logging.getLogger(__name__)


def _has_path(edges: set[tuple[str, str]], src: str, dst: str) -> bool:
    """True if a directed path src -> ... -> dst exists."""
    children = defaultdict(list)
    for u, v in edges:
        children[u].append(v)
    stack, seen = [src], set()
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(children[node])
    return False


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over named nodes."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        if len(set(self.nodes)) != len(self.nodes):
            raise DataError("duplicate node names")
        node_set = set(self.nodes)
        for u, v in self.edges:
            if u == v:
                raise DataError(f"self-loop on {u!r}")
            if u not in node_set or v not in node_set:
                raise DataError(f"edge ({u!r}, {v!r}) references unknown node")
        if self._cyclic():
            raise DataError("graph contains a directed cycle")

    def _cyclic(self) -> bool:
        indeg = {n: 0 for n in self.nodes}
        children = defaultdict(list)
        for u, v in self.edges:
            indeg[v] += 1
            children[u].append(v)
        queue = [n for n in self.nodes if indeg[n] == 0]
        seen = 0
        while queue:
            n = queue.pop()
            seen += 1
            for c in children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return seen != len(self.nodes)

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(u for u, v in self.edges if v == node))

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(v for u, v in self.edges if u == node))

    def skeleton(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(e) for e in self.edges)


@dataclass(frozen=True)
class MixedGraph:
    """Averaging input: directed plus undirected edges over shared nodes."""

    nodes: tuple[str, ...]
    directed: frozenset[tuple[str, str]] = field(default_factory=frozenset)
    undirected: frozenset[frozenset[str]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(
            self, "directed", frozenset(tuple(e) for e in self.directed)
        )
        object.__setattr__(
            self, "undirected", frozenset(frozenset(e) for e in self.undirected)
        )
        node_set = set(self.nodes)
        pairs = set()
        for u, v in self.directed:
            if u == v or u not in node_set or v not in node_set:
                raise DataError(f"bad directed edge ({u!r}, {v!r})")
            pair = frozenset((u, v))
            if pair in pairs:
                raise DataError(f"pair {{{u!r}, {v!r}}} appears more than once")
            pairs.add(pair)
        for pair in self.undirected:
            if len(pair) != 2 or not pair <= node_set:
                raise DataError(f"bad undirected edge {set(pair)}")
            if pair in pairs:
                raise DataError(f"pair {set(pair)} appears more than once")
            pairs.add(pair)

    @classmethod
    def from_dag(cls, dag: Dag) -> "MixedGraph":
        return cls(nodes=dag.nodes, directed=dag.edges)


def model_average(graphs: list[MixedGraph], min_frequency: int = 1) -> Dag:
    """Merge learned graphs into one DAG by edge-frequency voting.

    Directed edges enter first in descending frequency; an edge whose
    addition would close a cycle is reversed and parked in a retry set that
    is replayed after the undirected edges. Surviving undirected edges are
    oriented along the partial topological order of the edges already
    placed so the result is always acyclic.
    """
    if not graphs:
        raise DataError("model_average needs at least one input graph")
    if min_frequency < 1:
        raise DataError("min_frequency must be >= 1")
    nodes = graphs[0].nodes
    node_set = set(nodes)
    for g in graphs[1:]:
        if set(g.nodes) != node_set:
            raise DataError("input graphs must share the same node set")

    directed_freq: dict[tuple[str, str], int] = defaultdict(int)
    undirected_freq: dict[frozenset[str], int] = defaultdict(int)
    for g in graphs:
        for e in g.directed:
            directed_freq[e] += 1
        for pair in g.undirected:
            undirected_freq[pair] += 1

    placed: set[tuple[str, str]] = set()
    placed_undirected: set[frozenset[str]] = set()
    retry: list[tuple[tuple[str, str], int]] = []

    # S1: directed edges, most frequent first, lexicographic tie-break
    for edge, freq in sorted(directed_freq.items(), key=lambda kv: (-kv[1], kv[0])):
        if freq < min_frequency:
            continue
        u, v = edge
        if (v, u) in placed:
            continue
        if edge in placed:
            continue
        if _has_path(placed, v, u):
            retry.append(((v, u), freq))
        else:
            placed.add(edge)

    # S2: undirected edges, skipping pairs already placed as directed
    for pair, freq in sorted(
        undirected_freq.items(), key=lambda kv: (-kv[1], tuple(sorted(kv[0])))
    ):
        if freq < min_frequency:
            continue
        u, v = sorted(pair)
        if (u, v) in placed or (v, u) in placed:
            continue
        placed_undirected.add(pair)

    # S3: reversed cycle-causing edges, skipping pairs placed as undirected
    for edge, freq in sorted(retry, key=lambda kv: (-kv[1], kv[0])):
        u, v = edge
        if frozenset(edge) in placed_undirected:
            continue
        if edge in placed or (v, u) in placed:
            continue
        if _has_path(placed, v, u):
            log.debug("model_average: dropping %s, still cyclic at S3", edge)
            continue
        placed.add(edge)

    # orient surviving undirected edges along the current partial order
    if placed_undirected:
        order = _kahn_order(nodes, placed)
        rank = {n: i for i, n in enumerate(order)}
        for pair in sorted(placed_undirected, key=lambda p: tuple(sorted(p))):
            u, v = sorted(pair)
            if rank[u] <= rank[v]:
                placed.add((u, v))
            else:
                placed.add((v, u))
    return Dag(nodes=nodes, edges=frozenset(placed))


def _kahn_order(nodes: tuple[str, ...], edges: set[tuple[str, str]]) -> list[str]:
    """Topological order with lexicographic tie-breaking."""
    indeg = {n: 0 for n in nodes}
    children = defaultdict(list)
    for u, v in edges:
        indeg[v] += 1
        children[u].append(v)
    heap = [n for n in nodes if indeg[n] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != len(nodes):
        raise DataError("cycle encountered during topological sort")
    return order


def topological_order(dag: Dag, target: str) -> list[str]:
    """Topological order with the outcome variable forced last.

    Ties break lexicographically. If the target has outgoing edges the
    forcing violates those edges; this is logged and the target is still
    placed last.
    """
    if target not in dag.nodes:
        raise DataError(f"target {target!r} not in graph")
    outgoing = [v for u, v in dag.edges if u == target]
    if outgoing:
        log.warning(
            "target %r has outgoing edges to %s; forcing it last anyway",
            target,
            sorted(outgoing),
        )
    rest_nodes = tuple(n for n in sorted(dag.nodes) if n != target)
    rest_edges = {
        (u, v) for u, v in dag.edges if u != target and v != target
    }
    return _kahn_order(rest_nodes, rest_edges) + [target]


# --------------------------------------------------------------------------
# Graph file format: CSV with header `ID,Variable 1,Dependency,Variable 2`
# --------------------------------------------------------------------------

GRAPH_HEADER = ["ID", "Variable 1", "Dependency", "Variable 2"]


def write_graph_csv(graph: MixedGraph | Dag, path) -> None:
    if isinstance(graph, Dag):
        graph = MixedGraph.from_dag(graph)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRAPH_HEADER)
        rows = [(u, "->", v) for u, v in sorted(graph.directed)]
        rows += [
            (u, "--", v) for u, v in sorted(tuple(sorted(p)) for p in graph.undirected)
        ]
        for i, (u, dep, v) in enumerate(rows, start=1):
            writer.writerow([i, u, dep, v])


def read_graph_csv(path, nodes: tuple[str, ...] | None = None) -> MixedGraph:
    """Load a graph file; node set defaults to the variables mentioned."""
    directed, undirected, mentioned = set(), set(), []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != GRAPH_HEADER:
            raise DataError(f"{path}: expected header {GRAPH_HEADER}, got {header}")
        for rec in reader:
            if not rec or not any(cell.strip() for cell in rec):
                continue
            _, u, dep, v = (cell.strip() for cell in rec[:4])
            for name in (u, v):
                if name not in mentioned:
                    mentioned.append(name)
            if dep == "->":
                directed.add((u, v))
            elif dep == "--":
                undirected.add(frozenset((u, v)))
            else:
                raise DataError(f"{path}: unknown dependency {dep!r}")
    return MixedGraph(
        nodes=nodes if nodes is not None else tuple(mentioned),
        directed=frozenset(directed),
        undirected=frozenset(undirected),
    )
