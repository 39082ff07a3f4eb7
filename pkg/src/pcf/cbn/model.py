"""Fitted networks: CPT estimation, exact posterior inference by variable
elimination, ancestral sampling and JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, ZeroEvidence
from ..tabular import DiscreteTable, Schema
from .graphs import Dag, _kahn_order

_ROW_SUM_TOL = 1e-9


def parent_config_index(codes: dict[str, int], parents: tuple[str, ...], cards) -> int:
    """Row-major index over sorted parents (first parent most significant)."""
    idx = 0
    for p in parents:
        idx = idx * cards[p] + codes[p]
    return idx


@dataclass(frozen=True)
class Cbn:
    """DAG plus one conditional probability table per node.

    CPTs are arrays of shape (#parent configurations, cardinality), with
    parents taken in sorted name order for the configuration index.
    """

    dag: Dag
    cards: dict[str, int]
    cpts: dict[str, np.ndarray]
    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)
    target: str | None = None

    def __post_init__(self):
        for node in self.dag.nodes:
            if node not in self.cards or node not in self.cpts:
                raise DataError(f"missing CPT or cardinality for {node!r}")
            parents = self.dag.parents(node)
            q = int(np.prod([self.cards[p] for p in parents])) if parents else 1
            cpt = np.asarray(self.cpts[node], dtype=float)
            if cpt.shape != (q, self.cards[node]):
                raise DataError(
                    f"CPT for {node!r} has shape {cpt.shape}, expected {(q, self.cards[node])}"
                )
            if np.abs(cpt.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
                raise DataError(f"CPT rows for {node!r} do not sum to 1")
            cpt.setflags(write=False)
            self.cpts[node] = cpt

    def node_categories(self, node: str) -> tuple[str, ...]:
        if node in self.categories:
            return self.categories[node]
        return tuple(str(i) for i in range(self.cards[node]))

    def schema(self, target: str | None = None) -> Schema:
        target = target or self.target or self.dag.nodes[-1]
        return Schema(
            variables=tuple((n, self.node_categories(n)) for n in self.dag.nodes),
            target=target,
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.dag.nodes),
            "edges": sorted([u, v] for u, v in self.dag.edges),
            "categories": {n: list(self.node_categories(n)) for n in self.dag.nodes},
            "target": self.target,
            "cpts": {
                n: {
                    "parents": list(self.dag.parents(n)),
                    "table": np.asarray(self.cpts[n]).tolist(),
                }
                for n in self.dag.nodes
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Cbn":
        dag = Dag(
            nodes=tuple(obj["nodes"]),
            edges=frozenset(tuple(e) for e in obj["edges"]),
        )
        categories = {n: tuple(c) for n, c in obj.get("categories", {}).items()}
        cards = {n: len(categories[n]) for n in dag.nodes}
        cpts = {n: np.array(obj["cpts"][n]["table"], dtype=float) for n in dag.nodes}
        return cls(
            dag=dag,
            cards=cards,
            cpts=cpts,
            categories=categories,
            target=obj.get("target"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Cbn":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_cpts(dag: Dag, table: DiscreteTable, pseudocount: float = 0.0) -> Cbn:
    """Maximum-likelihood CPTs with additive smoothing."""
    if pseudocount < 0:
        raise DataError("pseudocount must be >= 0")
    schema = table.schema
    cards = {n: schema.cardinality(n) for n in dag.nodes}
    cpts = {}
    for node in dag.nodes:
        parents = dag.parents(node)
        r = cards[node]
        q = int(np.prod([cards[p] for p in parents])) if parents else 1
        config = np.zeros(table.n_rows, dtype=np.int64)
        for p in parents:
            config = config * cards[p] + table.column(p)
        joint = np.bincount(
            config * r + table.column(node), minlength=q * r
        ).reshape(q, r).astype(float)
        joint += pseudocount
        totals = joint.sum(axis=1, keepdims=True)
        if np.any(totals == 0):
            # unseen parent configuration with no smoothing: fall back to uniform
            joint[totals[:, 0] == 0] = 1.0
            totals = joint.sum(axis=1, keepdims=True)
        cpts[node] = joint / totals
    return Cbn(
        dag=dag,
        cards=cards,
        cpts=cpts,
        categories={n: schema.categories(n) for n in dag.nodes},
        target=schema.target if schema.target in dag.nodes else None,
    )


# --------------------------------------------------------------------------
# Exact inference by variable elimination
# --------------------------------------------------------------------------


class _Factor:
    __slots__ = ("vars", "values")

    def __init__(self, vars_: tuple[str, ...], values: np.ndarray):
        self.vars = vars_
        self.values = values

    def restrict(self, var: str, code: int) -> "_Factor":
        axis = self.vars.index(var)
        return _Factor(
            self.vars[:axis] + self.vars[axis + 1 :],
            np.take(self.values, code, axis=axis),
        )

    def multiply(self, other: "_Factor") -> "_Factor":
        all_vars = self.vars + tuple(v for v in other.vars if v not in self.vars)
        a = _expand(self, all_vars)
        b = _expand(other, all_vars)
        return _Factor(all_vars, a * b)

    def sum_out(self, var: str) -> "_Factor":
        axis = self.vars.index(var)
        return _Factor(
            self.vars[:axis] + self.vars[axis + 1 :], self.values.sum(axis=axis)
        )


def _expand(factor: _Factor, all_vars: tuple[str, ...]) -> np.ndarray:
    """Reshape a factor's array so it broadcasts over the joint axis set."""
    src_axes = [all_vars.index(v) for v in factor.vars]
    arr = np.transpose(factor.values, axes=np.argsort(src_axes))
    full_shape = [1] * len(all_vars)
    for pos, axis in enumerate(sorted(src_axes)):
        full_shape[axis] = arr.shape[pos]
    return arr.reshape(full_shape)


def _cpt_factor(cbn: Cbn, node: str) -> _Factor:
    parents = cbn.dag.parents(node)
    shape = tuple(cbn.cards[p] for p in parents) + (cbn.cards[node],)
    return _Factor(parents + (node,), np.asarray(cbn.cpts[node]).reshape(shape))


def infer_posterior(
    cbn: Cbn, evidence: dict[str, int] | list[tuple[str, int]], query: str
) -> np.ndarray:
    """Exact posterior P(query | evidence) by variable elimination."""
    if not isinstance(evidence, dict):
        ev = {}
        for var, code in evidence:
            if var in ev:
                raise DataError(f"evidence assigns {var!r} twice")
            ev[var] = code
        evidence = ev
    if query in evidence:
        raise DataError("query variable cannot also be evidence")
    if query not in cbn.dag.nodes:
        raise DataError(f"unknown query variable {query!r}")
    for var, code in evidence.items():
        if var not in cbn.dag.nodes:
            raise DataError(f"unknown evidence variable {var!r}")
        if not 0 <= code < cbn.cards[var]:
            raise DataError(f"evidence code {code} out of range for {var!r}")

    factors = []
    for node in cbn.dag.nodes:
        f = _cpt_factor(cbn, node)
        for var, code in evidence.items():
            if var in f.vars:
                f = f.restrict(var, code)
        factors.append(f)

    hidden = [n for n in _kahn_order(cbn.dag.nodes, set(cbn.dag.edges))
              if n != query and n not in evidence]
    for var in hidden:
        touching = [f for f in factors if var in f.vars]
        rest = [f for f in factors if var not in f.vars]
        if not touching:
            continue
        product = touching[0]
        for f in touching[1:]:
            product = product.multiply(f)
        factors = rest + [product.sum_out(var)]

    result = factors[0]
    for f in factors[1:]:
        result = result.multiply(f)
    values = result.values
    if result.vars != (query,):
        axis_order = [result.vars.index(query)]
        values = np.transpose(values, axes=axis_order + [
            i for i in range(values.ndim) if i != axis_order[0]
        ])
        values = values.reshape(cbn.cards[query], -1).sum(axis=1)
    total = float(values.sum())
    if total <= 0.0:
        raise ZeroEvidence(f"evidence {evidence} has probability zero")
    return values / total


def sample_from_cbn(
    cbn: Cbn, n: int, seed: int, target: str | None = None
) -> DiscreteTable:
    """Ancestral (forward) sampling in topological order."""
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.default_rng(seed)
    order = _kahn_order(cbn.dag.nodes, set(cbn.dag.edges))
    samples = {node: np.empty(n, dtype=np.int64) for node in cbn.dag.nodes}
    for node in order:
        parents = cbn.dag.parents(node)
        cpt = np.asarray(cbn.cpts[node])
        if not parents:
            rows = np.zeros(n, dtype=np.int64)
        else:
            rows = np.zeros(n, dtype=np.int64)
            for p in parents:
                rows = rows * cbn.cards[p] + samples[p]
        u = rng.random(n)
        cum = np.cumsum(cpt, axis=1)
        samples[node] = (u[:, None] > cum[rows]).sum(axis=1)
    schema = cbn.schema(target)
    data = np.column_stack([samples[name] for name in schema.names])
    return DiscreteTable(schema, data)
