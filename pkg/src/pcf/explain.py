"""Feature attributions for ensemble predictions.

Shapley values over the model's features, with coalition absence
marginalized by substituting values from a background sample. The
background is summarized by k-modes clustering (the categorical analogue
of k-means: Hamming distance, per-feature mode centroids).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .ensemble import PcfModel, predict_proba
from .errors import DataError
from .tabular import DiscreteTable

EXACT_FEATURE_CAP = 15

DEFAULT_BACKGROUND_K = 16


@dataclass(frozen=True)
class Attribution:
    features: tuple[str, ...]
    phi: tuple[float, ...]
    base_value: float
    prediction: float


# --------------------------------------------------------------------------
# k-modes background
# --------------------------------------------------------------------------


def kmodes_background(table: DiscreteTable, k: int, seed: int = 0) -> list[dict[str, int]]:
    """k cluster modes of the table's rows under Hamming distance.

    Deterministic per seed; iteration is capped, ties in assignment go to
    the lowest cluster index and ties in the mode to the lowest code.
    """
    rows = table.rows
    distinct = np.unique(rows, axis=0)
    if k < 1:
        raise DataError("k must be >= 1")
    if k > len(distinct):
        raise DataError(f"k={k} exceeds the {len(distinct)} distinct rows")
    rng = np.random.default_rng(seed)
    centroids = distinct[rng.choice(len(distinct), size=k, replace=False)].copy()
    n_cats = [len(cats) for _, cats in table.schema.variables]
    for _ in range(100):
        dists = (rows[:, None, :] != centroids[None, :, :]).sum(axis=2)
        assign = dists.argmin(axis=1)
        new_centroids = centroids.copy()
        for c in range(k):
            members = rows[assign == c]
            if len(members) == 0:
                continue
            for j in range(rows.shape[1]):
                counts = np.bincount(members[:, j], minlength=n_cats[j])
                new_centroids[c, j] = int(counts.argmax())
        if np.array_equal(new_centroids, centroids):
            break
        centroids = new_centroids
    names = table.schema.names
    return [
        {name: int(centroids[c, j]) for j, name in enumerate(names)}
        for c in range(k)
    ]


# --------------------------------------------------------------------------
# Shapley values
# --------------------------------------------------------------------------


def _coalition_value(
    model: PcfModel,
    instance: dict[str, int],
    background: list[dict[str, int]],
    features: tuple[str, ...],
    subset: frozenset[str],
    cache: dict[frozenset[str], float],
) -> float:
    """Mean prediction over hybrids: instance values on the subset,
    background values elsewhere."""
    cached = cache.get(subset)
    if cached is not None:
        return cached
    total = 0.0
    for bg in background:
        hybrid = {
            f: instance[f] if f in subset else bg[f] for f in features
        }
        total += predict_proba(model, hybrid)
    value = total / len(background)
    cache[subset] = value
    return value


def shap_values(
    model: PcfModel,
    instance: dict[str, int],
    background: list[dict[str, int]],
    mode: str = "exact",
    n_samples: int = 1000,
    seed: int = 0,
) -> Attribution:
    """Per-feature Shapley attributions of predict_proba(instance).

    Exact mode enumerates all coalitions with factorial weights and is
    capped at 15 features; sampled mode averages marginal contributions
    over random feature permutations.
    """
    if not background:
        raise DataError("background must be nonempty")
    features = model.feature_order
    n = len(features)
    cache: dict[frozenset[str], float] = {}

    def value(subset: frozenset[str]) -> float:
        return _coalition_value(model, instance, background, features, subset, cache)

    prediction = predict_proba(model, instance)
    base = value(frozenset())

    if mode == "exact":
        if n > EXACT_FEATURE_CAP:
            raise DataError(
                f"exact mode caps at {EXACT_FEATURE_CAP} features, got {n}; "
                "use sampled mode"
            )
        weights = [
            math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n)
            for s in range(n)
        ]
        phi = []
        for i, feature in enumerate(features):
            others = features[:i] + features[i + 1 :]
            total = 0.0
            for s in range(n):
                for combo in combinations(others, s):
                    subset = frozenset(combo)
                    total += weights[s] * (
                        value(subset | {feature}) - value(subset)
                    )
            phi.append(total)
    elif mode == "sampled":
        if n_samples < 1:
            raise DataError("n_samples must be >= 1")
        rng = np.random.default_rng(seed)
        sums = np.zeros(n)
        for _ in range(n_samples):
            order = rng.permutation(n)
            subset: frozenset[str] = frozenset()
            prev = value(subset)
            for idx in order:
                subset = subset | {features[idx]}
                cur = value(subset)
                sums[idx] += cur - prev
                prev = cur
        phi = list(sums / n_samples)
    else:
        raise DataError(f"unknown mode {mode!r}")

    return Attribution(
        features=features,
        phi=tuple(float(p) for p in phi),
        base_value=base,
        prediction=prediction,
    )


def write_attribution_csv(attribution: Attribution, stream) -> None:
    writer = csv.writer(stream)
    writer.writerow(["feature", "phi"])
    for feature, phi in zip(attribution.features, attribution.phi):
        writer.writerow([feature, repr(phi)])
    writer.writerow(["__base__", repr(attribution.base_value)])
