"""Decomposable BIC scoring for discrete networks, with per-family caching."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DataError
from ..tabular import DiscreteTable
from .graphs import Dag


class BicScorer:
    """log-likelihood minus (ln N / 2) free parameters, per node family.

    Local scores are cached by (node, parent set); the cache belongs to one
    scorer instance, so parallel runs get independent caches.
    """

    def __init__(self, table: DiscreteTable):
        if table.n_rows == 0:
            raise DataError("cannot score an empty table")
        self.table = table
        self.n = table.n_rows
        self._log_n = math.log(self.n)
        self._cache: dict[tuple[str, frozenset[str]], float] = {}

    def local_score(self, node: str, parents) -> float:
        key = (node, frozenset(parents))
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        score = self._compute(node, sorted(key[1]))
        self._cache[key] = score
        return score

    def _compute(self, node: str, parents: list[str]) -> float:
        schema = self.table.schema
        child = self.table.column(node)
        r = schema.cardinality(node)
        q = 1
        config = np.zeros(self.n, dtype=np.int64)
        for p in parents:
            config = config * schema.cardinality(p) + self.table.column(p)
            q *= schema.cardinality(p)
        joint = np.bincount(config * r + child, minlength=q * r).reshape(q, r)
        row_totals = joint.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = joint * (np.log(joint) - np.log(row_totals))
        ll = float(np.nansum(np.where(joint > 0, terms, 0.0)))
        penalty = (self._log_n / 2.0) * (r - 1) * q
        return ll - penalty

    def score(self, dag: Dag) -> float:
        return sum(self.local_score(n, dag.parents(n)) for n in dag.nodes)

    def local_scores(self, dag: Dag) -> dict[str, float]:
        return {n: self.local_score(n, dag.parents(n)) for n in dag.nodes}


def bic_score(dag: Dag, table: DiscreteTable) -> float:
    """Convenience wrapper for one-shot scoring."""
    return BicScorer(table).score(dag)


def bic_local_scores(dag: Dag, table: DiscreteTable) -> dict[str, float]:
    return BicScorer(table).local_scores(dag)
