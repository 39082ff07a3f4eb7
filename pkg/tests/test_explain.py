import io

import numpy as np
import pytest

from oracles import brute_force_shap
from conftest import random_table
from pcf import ensemble as ens
from pcf.errors import DataError
from pcf.explain import (
    kmodes_background,
    shap_values,
    write_attribution_csv,
)
from pcf.tabular import DiscreteTable, Schema


def three_feature_model(seed=0):
    schema = Schema(
        variables=(
            ("a", ("0", "1")),
            ("b", ("0", "1")),
            ("c", ("0", "1")),
            ("y", ("n", "p")),
        ),
        target="y",
    )
    rng = np.random.default_rng(seed)
    feats = rng.integers(0, 2, (150, 3))
    y = ((feats[:, 0] + feats[:, 1] + rng.random(150) * 0.8) > 1.2).astype(int)
    table = DiscreteTable(schema, np.column_stack([feats, y]))
    return ens.train_ensemble(table, ("a", "b", "c", "y"), k=2, seed=seed), table


class TestKmodes:
    def test_all_distinct_k_equals_rows(self):
        schema = Schema(
            variables=(("a", ("0", "1", "2")), ("b", ("0", "1", "2"))), target="b"
        )
        rows = np.array([[0, 0], [1, 1], [2, 2]])
        table = DiscreteTable(schema, rows)
        modes = kmodes_background(table, 3, seed=0)
        assert sorted((m["a"], m["b"]) for m in modes) == [(0, 0), (1, 1), (2, 2)]

    def test_two_separated_blocks(self):
        schema = Schema(
            variables=tuple((f"f{i}", ("0", "1")) for i in range(4)), target="f3"
        )
        block0 = np.zeros((10, 4), dtype=np.int64)
        block1 = np.ones((10, 4), dtype=np.int64)
        block0[0, 0] = 1  # a little intra-block noise
        block1[0, 0] = 0
        table = DiscreteTable(schema, np.vstack([block0, block1]))
        modes = kmodes_background(table, 2, seed=1)
        reps = sorted(tuple(m[f"f{i}"] for i in range(4)) for m in modes)
        assert reps == [(0, 0, 0, 0), (1, 1, 1, 1)]

    def test_determinism(self):
        rng = np.random.default_rng(5)
        table = random_table(rng, max_rows=60)
        assert kmodes_background(table, 4, seed=9) == kmodes_background(
            table, 4, seed=9
        )

    def test_k_too_large(self):
        schema = Schema(variables=(("a", ("0", "1")), ("b", ("0", "1"))), target="b")
        table = DiscreteTable(schema, np.array([[0, 0], [0, 0]]))
        with pytest.raises(DataError):
            kmodes_background(table, 2, seed=0)


class TestShapExact:
    def test_single_feature_collapses(self, xy_table):
        model = ens.train_ensemble(xy_table, ("X", "Y"), k=1)
        background = [{"X": 0}, {"X": 1}]
        att = shap_values(model, {"X": 0}, background)
        f_x = ens.predict_proba(model, {"X": 0})
        f_empty = np.mean(
            [ens.predict_proba(model, bg) for bg in background]
        )
        assert att.phi[0] == pytest.approx(f_x - f_empty, abs=1e-12)

    def test_symmetric_features_equal_phi(self):
        schema = Schema(
            variables=(("a", ("0", "1")), ("b", ("0", "1")), ("y", ("n", "p"))),
            target="y",
        )
        # y = a AND b on a symmetric table
        rows = np.array(
            [[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 1]] * 5
        )
        table = DiscreteTable(schema, rows)
        model = ens.train_ensemble(table, ("a", "b", "y"), k=1)
        background = [{"a": 0, "b": 0}, {"a": 1, "b": 1}]
        att = shap_values(model, {"a": 1, "b": 1}, background)
        assert att.phi[0] == pytest.approx(att.phi[1], abs=1e-12)

    def test_matches_brute_force_oracle(self):
        model, table = three_feature_model(3)
        background = kmodes_background(table, 4, seed=0)
        instance = {"a": 1, "b": 0, "c": 1}
        att = shap_values(model, instance, background)

        features = model.feature_order

        def value(subset):
            total = 0.0
            for bg in background:
                hybrid = {
                    f: instance[f] if f in subset else bg[f] for f in features
                }
                total += ens.predict_proba(model, hybrid)
            return total / len(background)

        expected = brute_force_shap(value, list(features))
        assert list(att.phi) == pytest.approx(expected, abs=1e-12)

    def test_efficiency(self):
        model, table = three_feature_model(6)
        background = kmodes_background(table, 5, seed=2)
        att = shap_values(model, {"a": 0, "b": 1, "c": 0}, background)
        assert sum(att.phi) + att.base_value == pytest.approx(
            att.prediction, abs=1e-9
        )

    def test_feature_cap(self):
        names = tuple(f"f{i}" for i in range(16)) + ("y",)
        schema = Schema(
            variables=tuple((n, ("0", "1")) for n in names), target="y"
        )
        rng = np.random.default_rng(0)
        table = DiscreteTable(schema, rng.integers(0, 2, (40, 17)))
        model = ens.train_ensemble(table, names, k=1)
        background = [{n: 0 for n in names[:-1]}]
        with pytest.raises(DataError, match="sampled"):
            shap_values(model, {n: 0 for n in names[:-1]}, background)


class TestShapSampled:
    def test_converges_to_exact(self):
        schema = Schema(
            variables=tuple((f"f{i}", ("0", "1")) for i in range(5))
            + (("y", ("n", "p")),),
            target="y",
        )
        rng = np.random.default_rng(2)
        feats = rng.integers(0, 2, (200, 5))
        y = (feats.sum(axis=1) + rng.random(200) > 2.9).astype(int)
        table = DiscreteTable(schema, np.column_stack([feats, y]))
        order = tuple(f"f{i}" for i in range(5)) + ("y",)
        model = ens.train_ensemble(table, order, k=2, seed=0)
        background = kmodes_background(table, 4, seed=0)
        instance = {f"f{i}": 1 for i in range(5)}
        exact = shap_values(model, instance, background, mode="exact")
        sampled = shap_values(
            model, instance, background, mode="sampled", n_samples=10_000, seed=1
        )
        for e, s in zip(exact.phi, sampled.phi):
            assert abs(e - s) <= 0.01

    def test_unknown_mode(self, xy_table):
        model = ens.train_ensemble(xy_table, ("X", "Y"), k=1)
        with pytest.raises(DataError):
            shap_values(model, {"X": 0}, [{"X": 0}], mode="mystery")


def test_csv_output(xy_table):
    model = ens.train_ensemble(xy_table, ("X", "Y"), k=1)
    att = shap_values(model, {"X": 0}, [{"X": 0}, {"X": 1}])
    buf = io.StringIO()
    write_attribution_csv(att, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "feature,phi"
    assert lines[1].startswith("X,")
    assert lines[-1].startswith("__base__,")
