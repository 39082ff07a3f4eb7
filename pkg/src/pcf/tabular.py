"""Categorical tabular data: schemas, CSV ingestion, discretization,
stratified splitting and categorical oversampling.

All types are immutable after construction and all operations are pure
given their inputs and seed.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError, InsufficientClass, OutOfRange, UnknownCategory

log = logging.getLogger(__name__)

_INF = float("inf")


@dataclass(frozen=True)
class Schema:
    """Named variables with ordered category labels, plus a target variable."""

    variables: tuple[tuple[str, tuple[str, ...]], ...]
    target: str

    def __post_init__(self):
        names = [name for name, _ in self.variables]
        if len(set(names)) != len(names):
            raise DataError("duplicate variable names in schema")
        for name, cats in self.variables:
            if len(cats) < 2:
                raise DataError(f"variable {name!r} needs at least 2 categories")
            if len(set(cats)) != len(cats):
                raise DataError(f"variable {name!r} has duplicate category labels")
        if self.target not in names:
            raise DataError(f"target {self.target!r} is not a schema variable")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.variables)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown variable {name!r}") from None

    def categories(self, name: str) -> tuple[str, ...]:
        return self.variables[self.index(name)][1]

    def cardinality(self, name: str) -> int:
        return len(self.categories(name))

    def code(self, name: str, label: str) -> int:
        cats = self.categories(name)
        try:
            return cats.index(label)
        except ValueError:
            raise UnknownCategory(
                f"label {label!r} not among categories of {name!r}: {list(cats)}"
            ) from None

    def to_dict(self) -> dict:
        return {
            "variables": [[n, list(c)] for n, c in self.variables],
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Schema":
        return cls(
            variables=tuple((n, tuple(c)) for n, c in obj["variables"]),
            target=obj["target"],
        )


def _freeze(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    rows.setflags(write=False)
    return rows


@dataclass(frozen=True)
class DiscreteTable:
    """Rows of small-integer category codes conforming to a schema."""

    schema: Schema
    rows: np.ndarray

    def __post_init__(self):
        rows = self.rows
        if rows.ndim != 2 or rows.shape[1] != len(self.schema.variables):
            raise DataError("row arity does not match schema")
        for j, (name, cats) in enumerate(self.schema.variables):
            col = rows[:, j]
            if len(col) and (col.min() < 0 or col.max() >= len(cats)):
                raise DataError(f"code out of range for variable {name!r}")
        object.__setattr__(self, "rows", _freeze(rows))

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.schema.index(name)]

    def target_column(self) -> np.ndarray:
        return self.column(self.schema.target)

    def subset(self, indices) -> "DiscreteTable":
        return DiscreteTable(self.schema, self.rows[np.asarray(indices, dtype=np.int64)])

    def labels_row(self, i: int) -> list[str]:
        return [
            cats[self.rows[i, j]] for j, (_, cats) in enumerate(self.schema.variables)
        ]


def load_csv(path, schema: Schema) -> DiscreteTable:
    """Decode a labelled CSV into category codes, normalizing column order."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = set(schema.names) - set(header)
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        col_of = {name: header.index(name) for name in schema.names}
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            out = []
            for name in schema.names:
                label = rec[col_of[name]]
                try:
                    out.append(schema.code(name, label))
                except UnknownCategory as exc:
                    raise UnknownCategory(
                        f"{path}:{lineno}: column {name!r}: {exc}"
                    ) from None
            rows.append(out)
    return DiscreteTable(schema, np.array(rows, dtype=np.int64).reshape(len(rows), len(schema.names)))


def write_csv(table: DiscreteTable, path) -> None:
    """Emit a labelled CSV (inverse of load_csv)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.schema.names)
        for i in range(table.n_rows):
            writer.writerow(table.labels_row(i))


# --------------------------------------------------------------------------
# Discretization rule pack
# --------------------------------------------------------------------------

KIND_THRESHOLD = "threshold-bins"
KIND_GENDER = "gender-conditioned-bins"
KIND_PASSTHROUGH = "passthrough"


@dataclass(frozen=True)
class DiscretizationRule:
    """Maps a raw numeric column to category codes via half-open bins.

    Bins are [lo, hi) and must tile the declared domain contiguously. A
    boundary value always falls into the upper bin; this convention is a
    normalization choice and is documented in the rule pack notes.
    """

    variable: str
    kind: str
    labels: tuple[str, ...]
    bins: tuple[tuple[float, float, int], ...] = ()
    gender_variable: str | None = None
    gender_bins: dict[int, tuple[tuple[float, float, int], ...]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        if self.kind not in (KIND_THRESHOLD, KIND_GENDER, KIND_PASSTHROUGH):
            raise DataError(f"unknown rule kind {self.kind!r}")
        if self.kind == KIND_THRESHOLD:
            _check_bins(self.variable, self.bins, len(self.labels))
        elif self.kind == KIND_GENDER:
            if not self.gender_variable:
                raise DataError(f"rule {self.variable!r} needs a gender variable")
            if not self.gender_bins:
                raise DataError(f"rule {self.variable!r} needs per-gender bins")
            for bins in self.gender_bins.values():
                _check_bins(self.variable, bins, len(self.labels))

    def apply(self, value: float, gender_code: int | None = None) -> int:
        if self.kind == KIND_PASSTHROUGH:
            code = int(value)
            if code != value or not 0 <= code < len(self.labels):
                raise OutOfRange(
                    f"{self.variable}: {value!r} is not a valid category code"
                )
            return code
        if self.kind == KIND_GENDER:
            if gender_code not in self.gender_bins:
                raise OutOfRange(
                    f"{self.variable}: no bins for gender code {gender_code!r}"
                )
            bins = self.gender_bins[gender_code]
        else:
            bins = self.bins
        for lo, hi, code in bins:
            if lo <= value < hi:
                return code
        raise OutOfRange(f"{self.variable}: value {value!r} outside all bins")


def _check_bins(variable: str, bins, n_labels: int) -> None:
    if not bins:
        raise DataError(f"rule {variable!r} has no bins")
    ordered = sorted(bins, key=lambda b: b[0])
    for (lo, hi, code) in ordered:
        if not lo < hi:
            raise DataError(f"rule {variable!r}: empty bin [{lo}, {hi})")
        if not 0 <= code < n_labels:
            raise DataError(f"rule {variable!r}: bin code {code} out of label range")
    for (_, hi, _), (lo2, _, _) in zip(ordered, ordered[1:]):
        if hi != lo2:
            raise DataError(
                f"rule {variable!r}: bins not contiguous at boundary {hi} vs {lo2}"
            )


def _bins_from_json(raw) -> tuple[tuple[float, float, int], ...]:
    out = []
    for lo, hi, code in raw:
        out.append(
            (
                -_INF if lo is None else float(lo),
                _INF if hi is None else float(hi),
                int(code),
            )
        )
    return tuple(out)


def _bins_to_json(bins):
    return [
        [None if lo == -_INF else lo, None if hi == _INF else hi, code]
        for lo, hi, code in bins
    ]


def load_rule_pack(source) -> tuple[list[DiscretizationRule], str]:
    """Parse a rule pack file; returns (rules, target variable name)."""
    if isinstance(source, (str, Path)):
        obj = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        obj = json.load(source)
    rules = []
    for rec in obj["rules"]:
        rules.append(
            DiscretizationRule(
                variable=rec["variable"],
                kind=rec["kind"],
                labels=tuple(rec["labels"]),
                bins=_bins_from_json(rec.get("bins", [])),
                gender_variable=rec.get("gender_variable"),
                gender_bins={
                    int(k): _bins_from_json(v)
                    for k, v in rec.get("gender_bins", {}).items()
                },
            )
        )
    return rules, obj["target"]


def dump_rule_pack(rules, target: str, path) -> None:
    recs = []
    for r in rules:
        rec = {"variable": r.variable, "kind": r.kind, "labels": list(r.labels)}
        if r.kind == KIND_THRESHOLD:
            rec["bins"] = _bins_to_json(r.bins)
        elif r.kind == KIND_GENDER:
            rec["gender_variable"] = r.gender_variable
            rec["gender_bins"] = {
                str(k): _bins_to_json(v) for k, v in sorted(r.gender_bins.items())
            }
        recs.append(rec)
    Path(path).write_text(
        json.dumps({"target": target, "rules": recs}, indent=2), encoding="utf-8"
    )


def builtin_rule_pack() -> tuple[list[DiscretizationRule], str]:
    """The bundled clinical rule pack covering the 24 ICU variables."""
    with resources.files("pcf.rules").joinpath("icu.json").open("r") as fh:
        return load_rule_pack(fh)


def rules_schema(rules: list[DiscretizationRule], target: str) -> Schema:
    return Schema(
        variables=tuple((r.variable, r.labels) for r in rules),
        target=target,
    )


def discretize(raw_csv_path, rules: list[DiscretizationRule], target: str) -> DiscreteTable:
    """Bin a raw numeric CSV into a coded table.

    Rows with a missing value in any modeled column are dropped; the drop
    count is logged.
    """
    path = Path(raw_csv_path)
    by_name = {r.variable: r for r in rules}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for rule in rules:
            if rule.variable not in header:
                raise DataError(f"{path}: rule variable {rule.variable!r} not in CSV")
            if rule.kind == KIND_GENDER and rule.gender_variable not in header:
                raise DataError(
                    f"{path}: gender column {rule.gender_variable!r} not in CSV"
                )
        col_of = {name: header.index(name) for name in header}
        rows = []
        dropped = 0
        for rec in reader:
            raw = {}
            ok = True
            for rule in rules:
                cell = rec[col_of[rule.variable]].strip()
                if cell == "":
                    ok = False
                    break
                raw[rule.variable] = float(cell)
                if rule.kind == KIND_GENDER:
                    gcell = rec[col_of[rule.gender_variable]].strip()
                    if gcell == "":
                        ok = False
                        break
                    raw[rule.gender_variable] = float(gcell)
            if not ok:
                dropped += 1
                continue
            out = []
            for rule in rules:
                gender_code = None
                if rule.kind == KIND_GENDER:
                    gender_rule = by_name.get(rule.gender_variable)
                    gval = raw[rule.gender_variable]
                    gender_code = (
                        gender_rule.apply(gval) if gender_rule else int(gval)
                    )
                out.append(rule.apply(raw[rule.variable], gender_code))
            rows.append(out)
    if dropped:
        log.warning("discretize: dropped %d rows with missing values", dropped)
    schema = rules_schema(rules, target)
    return DiscreteTable(
        schema, np.array(rows, dtype=np.int64).reshape(len(rows), len(rules))
    )


# --------------------------------------------------------------------------
# Splitting and oversampling
# --------------------------------------------------------------------------


def stratified_split(
    table: DiscreteTable, test_fraction: float, seed: int
) -> tuple[DiscreteTable, DiscreteTable]:
    """Class-stratified train/test partition, deterministic per seed."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must lie in (0, 1)")
    y = table.target_column()
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if len(members) < 2:
            raise InsufficientClass(
                f"target class {cls} has {len(members)} rows; need at least 2"
            )
        n_test = int(round(test_fraction * len(members)))
        n_test = min(max(n_test, 1), len(members) - 1)
        chosen = rng.permutation(members)[:n_test]
        test_idx.extend(int(i) for i in chosen)
    test_mask = np.zeros(table.n_rows, dtype=bool)
    test_mask[test_idx] = True
    return table.subset(np.flatnonzero(~test_mask)), table.subset(
        np.flatnonzero(test_mask)
    )


def _hamming_neighbors(features: np.ndarray, i: int, pool: np.ndarray, k: int) -> np.ndarray:
    """Indices into `pool` of the k rows nearest to features[i] (self excluded)."""
    dists = (features[pool] != features[i]).sum(axis=1)
    order = np.lexsort((pool, dists))
    picked = [j for j in order if pool[j] != i]
    return pool[np.array(picked[:k], dtype=np.int64)]


def _mode_synthesis(donors: np.ndarray, n_cats: list[int]) -> np.ndarray:
    """Per-feature mode over donor rows; ties resolved to the lowest code."""
    out = np.empty(donors.shape[1], dtype=np.int64)
    for j in range(donors.shape[1]):
        counts = np.bincount(donors[:, j], minlength=n_cats[j])
        out[j] = int(counts.argmax())
    return out


def oversample(
    table: DiscreteTable, method: str, k_neighbors: int = 5, seed: int = 0
) -> DiscreteTable:
    """Balance a binary-target table by minority oversampling.

    `random` duplicates minority rows; `smote_n` synthesizes rows as the
    per-feature mode over a seed row and its k Hamming-nearest minority
    neighbors; `adasyn_n` additionally weights seed rows by the local
    majority density so synthesis concentrates near the class boundary.
    """
    if method == "none":
        return table
    if method not in ("random", "smote_n", "adasyn_n"):
        raise DataError(f"unknown oversample method {method!r}")
    if k_neighbors < 1:
        raise DataError("k_neighbors must be >= 1")
    y = table.target_column()
    classes = np.unique(y)
    if len(classes) != 2:
        raise DataError("oversampling requires a binary target")
    counts = {int(c): int((y == c).sum()) for c in classes}
    minority = min(counts, key=lambda c: (counts[c], c))
    majority = max(counts, key=lambda c: (counts[c], -c))
    deficit = counts[majority] - counts[minority]
    if deficit == 0:
        return table
    rng = np.random.default_rng(seed)
    min_idx = np.flatnonzero(y == minority)
    tcol = table.schema.index(table.schema.target)
    feat_cols = [j for j in range(table.rows.shape[1]) if j != tcol]
    features = table.rows[:, feat_cols]
    n_cats = [len(table.schema.variables[j][1]) for j in feat_cols]

    if method == "random":
        picks = min_idx[rng.integers(0, len(min_idx), size=deficit)]
        new_rows = table.rows[picks]
    else:
        k = k_neighbors
        if len(min_idx) - 1 < k:
            k = max(1, len(min_idx) - 1)
            warnings.warn(
                f"k_neighbors clamped to {k}: minority class has {len(min_idx)} rows",
                stacklevel=2,
            )
        if len(min_idx) == 1:
            # single minority row: nothing to interpolate with, duplicate it
            picks = np.repeat(min_idx, deficit)
            new_rows = table.rows[picks]
        else:
            if method == "smote_n":
                seeds = min_idx[rng.integers(0, len(min_idx), size=deficit)]
            else:  # adasyn_n: density-weighted seed selection
                maj_share = np.empty(len(min_idx))
                for pos, i in enumerate(min_idx):
                    all_nn = _hamming_neighbors(
                        features, i, np.arange(table.n_rows), k
                    )
                    maj_share[pos] = (y[all_nn] == majority).mean()
                if maj_share.sum() == 0:
                    weights = np.full(len(min_idx), 1.0 / len(min_idx))
                else:
                    weights = maj_share / maj_share.sum()
                seeds = min_idx[rng.choice(len(min_idx), size=deficit, p=weights)]
            synth = []
            for i in seeds:
                nn = _hamming_neighbors(features, i, min_idx, k)
                donors = features[np.concatenate(([i], nn))]
                row = np.empty(table.rows.shape[1], dtype=np.int64)
                row[feat_cols] = _mode_synthesis(donors, n_cats)
                row[tcol] = minority
                synth.append(row)
            new_rows = np.array(synth, dtype=np.int64)
    combined = np.vstack([table.rows, new_rows])
    return DiscreteTable(table.schema, combined)
