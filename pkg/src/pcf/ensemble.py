"""Tree-ensemble model: batch splitting, training, averaged prediction,
threshold classification and model (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ZeroConditioning
from .ptree import (
    PTree,
    create_tree_from_data,
    event_and,
    prob,
    prop,
    see,
    tree_from_dict,
    tree_to_dict,
)
from .tabular import DiscreteTable, Schema

MODEL_FORMAT_VERSION = 1

POSITIVE_CLASS = 1


@dataclass(frozen=True)
class PcfModel:
    """Ensemble of probability trees sharing one variable order."""

    schema: Schema
    variable_order: tuple[str, ...]
    trees: tuple[PTree, ...]
    pruning_threshold: float
    tau: float
    seed: int

    def __post_init__(self):
        if not self.trees:
            raise DataError("a model needs at least one tree")
        if not 0.0 < self.tau < 1.0:
            raise DataError("tau must lie in (0, 1)")
        for tree in self.trees:
            if tree.variable_order != tuple(self.variable_order):
                raise DataError("all trees must share the model's variable order")

    @property
    def target(self) -> str:
        return self.schema.target

    @property
    def feature_order(self) -> tuple[str, ...]:
        return tuple(v for v in self.variable_order if v != self.target)


def split_batches(table: DiscreteTable, k: int, seed: int) -> list[DiscreteTable]:
    """Disjoint, exhaustive, near-equal random partition into k batches."""
    if k < 1:
        raise DataError("k must be >= 1")
    if k > table.n_rows:
        raise DataError(f"k={k} exceeds row count {table.n_rows}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(table.n_rows)
    sizes = [table.n_rows // k + (1 if i < table.n_rows % k else 0) for i in range(k)]
    batches, start = [], 0
    for size in sizes:
        batches.append(table.subset(np.sort(order[start : start + size])))
        start += size
    return batches


def train_ensemble(
    table: DiscreteTable,
    variable_order,
    k: int = 5,
    pruning_threshold: float = 0.0,
    tau: float = 0.5,
    seed: int = 0,
    stratified: bool = False,
) -> PcfModel:
    """One tree per batch; batches and trees are deterministic per seed."""
    variable_order = tuple(variable_order)
    if variable_order[-1] != table.schema.target:
        raise DataError("variable order must end with the target")
    if stratified:
        batches = _stratified_batches(table, k, seed)
    else:
        batches = split_batches(table, k, seed)
    trees = tuple(
        create_tree_from_data(batch, variable_order, pruning_threshold)
        for batch in batches
    )
    return PcfModel(
        schema=table.schema,
        variable_order=variable_order,
        trees=trees,
        pruning_threshold=pruning_threshold,
        tau=tau,
        seed=seed,
    )


def _stratified_batches(table: DiscreteTable, k: int, seed: int) -> list[DiscreteTable]:
    """Round-robin per-class assignment so each batch mirrors the class mix."""
    if k < 1:
        raise DataError("k must be >= 1")
    if k > table.n_rows:
        raise DataError(f"k={k} exceeds row count {table.n_rows}")
    rng = np.random.default_rng(seed)
    y = table.target_column()
    assignment = np.empty(table.n_rows, dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == cls))
        for pos, idx in enumerate(members):
            assignment[idx] = (offset + pos) % k
        offset += len(members)
    return [table.subset(np.flatnonzero(assignment == b)) for b in range(k)]


def tree_predict_proba(tree: PTree, model: PcfModel, row: dict[str, int]) -> float:
    """Single-tree P(target = positive | row) with zero-mass backoff.

    Conditions are dropped from the deepest end of the variable order until
    the conditioning event has mass; with no conditions left the tree's
    target marginal is returned.
    """
    conditions = [(var, int(row[var])) for var in model.feature_order]
    target_event = prop(tree, (model.target, POSITIVE_CLASS))
    while conditions:
        combined = None
        for statement in conditions:
            cut = prop(tree, statement)
            combined = cut if combined is None else event_and(tree, combined, cut)
        try:
            conditioned = see(tree, combined)
        except ZeroConditioning:
            conditions.pop()
            continue
        return prob(conditioned, target_event)
    marginal = prob(tree, target_event)
    mass = tree.total_mass()
    return marginal / mass if mass > 0 else 0.0


def predict_proba(model: PcfModel, row: dict[str, int]) -> float:
    """Ensemble average of per-tree conditional probabilities."""
    _check_row(model, row)
    scores = [tree_predict_proba(tree, model, row) for tree in model.trees]
    return float(np.mean(scores))


def classify(model: PcfModel, row: dict[str, int]) -> int:
    """Positive iff the averaged score strictly exceeds tau."""
    return POSITIVE_CLASS if predict_proba(model, row) > model.tau else 0


def _check_row(model: PcfModel, row: dict[str, int]) -> None:
    for var in model.feature_order:
        if var not in row:
            raise DataError(f"row is missing feature {var!r}")
        if not 0 <= int(row[var]) < model.schema.cardinality(var):
            raise DataError(f"code {row[var]} out of range for {var!r}")


def evaluate_rows(model: PcfModel, table: DiscreteTable):
    """Scores and class labels for every row of a coded table."""
    scores, labels = [], []
    for i in range(table.n_rows):
        row = {
            name: int(table.rows[i, table.schema.index(name)])
            for name in model.feature_order
        }
        score = predict_proba(model, row)
        scores.append(score)
        labels.append(POSITIVE_CLASS if score > model.tau else 0)
    return np.array(scores), np.array(labels, dtype=np.int64)


# --------------------------------------------------------------------------
# Model file format
# --------------------------------------------------------------------------


def model_to_dict(model: PcfModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "schema": model.schema.to_dict(),
        "variable_order": list(model.variable_order),
        "pruning_threshold": model.pruning_threshold,
        "tau": model.tau,
        "seed": model.seed,
        "trees": [tree_to_dict(t) for t in model.trees],
    }


def model_from_dict(obj: dict) -> PcfModel:
    if obj.get("version") != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format version {obj.get('version')!r}")
    schema = Schema.from_dict(obj["schema"])
    return PcfModel(
        schema=schema,
        variable_order=tuple(obj["variable_order"]),
        trees=tuple(tree_from_dict(t, schema) for t in obj["trees"]),
        pruning_threshold=obj["pruning_threshold"],
        tau=obj["tau"],
        seed=obj["seed"],
    )


def save_model(model: PcfModel, path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), indent=1), encoding="utf-8"
    )


def load_model(path) -> PcfModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
