import io

import numpy as np
import pytest

from oracles import finite_difference_posterior, joint_posterior
from pcf.cbn import Cbn, Dag, infer_posterior
from pcf.errors import DataError
from pcf.sensitivity import (
    apply_parameter,
    rank_parameters,
    sensitivity_coefficients,
    sensitivity_derivative,
    write_ranking_csv,
)


@pytest.fixture
def xy_cbn():
    """X -> Y with P(Y=1|X=1)=0.9, P(Y=1|X=0)=0.2."""
    dag = Dag(nodes=("X", "Y"), edges=frozenset({("X", "Y")}))
    return Cbn(
        dag=dag,
        cards={"X": 2, "Y": 2},
        cpts={
            "X": np.array([[0.6, 0.4]]),
            "Y": np.array([[0.8, 0.2], [0.1, 0.9]]),
        },
    )


def five_node_cbn(seed=0):
    rng = np.random.default_rng(seed)
    names = ("a", "b", "c", "d", "e")
    edges = frozenset({("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("d", "e")})
    dag = Dag(nodes=names, edges=edges)
    cards = {n: 2 for n in names}
    cpts = {}
    for node in names:
        q = int(np.prod([cards[p] for p in dag.parents(node)]) or 1)
        raw = rng.random((q, 2)) + 0.1
        cpts[node] = raw / raw.sum(axis=1, keepdims=True)
    return Cbn(dag=dag, cards=cards, cpts=cpts)


class TestCoefficients:
    def test_worked_example(self, xy_cbn):
        coeffs = sensitivity_coefficients(
            xy_cbn, ("Y", 1), {}, parameter=("X", 0, 1)
        )
        assert coeffs == pytest.approx((0.7, 0.2, 0.0, 1.0), abs=1e-12)

    def test_d_separated_parameter_is_flat(self):
        dag = Dag(nodes=("X", "Y"), edges=frozenset())
        cbn = Cbn(
            dag=dag,
            cards={"X": 2, "Y": 2},
            cpts={"X": np.array([[0.3, 0.7]]), "Y": np.array([[0.4, 0.6]])},
        )
        a, b, c, d = sensitivity_coefficients(cbn, ("Y", 1), {}, ("X", 0, 1))
        assert (a, c) == (0.0, 0.0)
        assert b == pytest.approx(0.6, abs=1e-12)
        assert d == 1.0

    def test_fit_matches_reinference_with_evidence(self):
        cbn = five_node_cbn(3)
        rng = np.random.default_rng(4)
        parameter = ("b", 1, 0)
        target, evidence = ("e", 1), {"a": 0}
        a, b, c, d = sensitivity_coefficients(cbn, target, evidence, parameter)
        for p in rng.random(20):
            expected = infer_posterior(
                apply_parameter(cbn, parameter, float(p)), evidence, "e"
            )[1]
            fitted = (a * p + b) / (c * p + d)
            assert fitted == pytest.approx(expected, abs=1e-9)

    def test_target_in_evidence_rejected(self, xy_cbn):
        with pytest.raises(DataError):
            sensitivity_coefficients(xy_cbn, ("Y", 1), {"Y": 0}, ("X", 0, 1))

    def test_covariation_row_sums(self, xy_cbn):
        for p in (0.0, 0.3, 1.0):
            varied = apply_parameter(xy_cbn, ("Y", 0, 1), p)
            assert np.allclose(varied.cpts["Y"].sum(axis=1), 1.0, atol=1e-12)
            assert varied.cpts["Y"][0, 1] == pytest.approx(p, abs=1e-12)

    def test_degenerate_row_uses_uniform_covariation(self):
        dag = Dag(nodes=("X",), edges=frozenset())
        cbn = Cbn(dag=dag, cards={"X": 3}, cpts={"X": np.array([[0.0, 1.0, 0.0]])})
        varied = apply_parameter(cbn, ("X", 0, 1), 0.4)
        assert varied.cpts["X"][0].tolist() == pytest.approx([0.3, 0.4, 0.3])


class TestDerivative:
    def test_linear_case(self):
        assert sensitivity_derivative(0.7, 0.2, 0.0, 1.0, 0.5) == pytest.approx(0.7)

    def test_flat(self):
        assert sensitivity_derivative(0.0, 0.42, 0.0, 1.0, 0.1) == 0.0

    def test_zero_denominator(self):
        with pytest.raises(DataError):
            sensitivity_derivative(1.0, 0.0, -2.0, 1.0, 0.5)

    def test_matches_finite_differences(self):
        cbn = five_node_cbn(8)
        target, evidence = ("e", 0), {"b": 1}
        for parameter in (("a", 0, 1), ("d", 2, 0), ("c", 1, 1)):
            a, b, c, d = sensitivity_coefficients(cbn, target, evidence, parameter)
            node, q, state = parameter
            p0 = float(cbn.cpts[node][q, state])
            analytic = sensitivity_derivative(a, b, c, d, p0)
            numeric = finite_difference_posterior(cbn, parameter, p0, target, evidence)
            assert analytic == pytest.approx(numeric, rel=1e-6, abs=1e-9)

    def test_sign_constant_on_grid(self):
        cbn = five_node_cbn(11)
        for r in rank_parameters(cbn, ("e", 1)):
            signs = {
                np.sign(sensitivity_derivative(r.a, r.b, r.c, r.d, p))
                for p in np.linspace(0, 1, 21)
            }
            assert len(signs - {0.0}) <= 1


class TestRanking:
    def test_single_node_exhaustive(self):
        dag = Dag(nodes=("X",), edges=frozenset())
        cbn = Cbn(dag=dag, cards={"X": 3}, cpts={"X": np.array([[0.2, 0.3, 0.5]])})
        results = rank_parameters(cbn, ("X", 2))
        assert len(results) == 3

    def test_strong_link_outranks_weak(self):
        # X -> Y -> Z: Y->Z near-deterministic, X->Y barely informative
        dag = Dag(nodes=("X", "Y", "Z"), edges=frozenset({("X", "Y"), ("Y", "Z")}))
        cbn = Cbn(
            dag=dag,
            cards={n: 2 for n in "XYZ"},
            cpts={
                "X": np.array([[0.5, 0.5]]),
                "Y": np.array([[0.52, 0.48], [0.48, 0.52]]),
                "Z": np.array([[0.99, 0.01], [0.01, 0.99]]),
            },
        )
        results = rank_parameters(cbn, ("Z", 1))
        first_y_rank = min(
            i for i, r in enumerate(results) if r.parameter[0] == "Y"
        )
        first_x_rank = min(
            i for i, r in enumerate(results) if r.parameter[0] == "X"
        )
        assert first_y_rank < first_x_rank

    def test_sorted_by_range(self):
        cbn = five_node_cbn(5)
        results = rank_parameters(cbn, ("e", 1), {"a": 1})
        ranges = [abs(r.t_at_1 - r.t_at_0) for r in results]
        assert ranges == sorted(ranges, reverse=True)

    def test_endpoints_consistent(self):
        cbn = five_node_cbn(6)
        for r in rank_parameters(cbn, ("e", 0)):
            assert r.t_at_0 == r.b / r.d
            assert r.t_at_1 == (r.a + r.b) / (r.c + r.d)
            assert r.d != 0

    def test_grid_match_against_oracle(self):
        cbn = five_node_cbn(7)
        target = ("e", 1)
        for r in rank_parameters(cbn, target)[:10]:
            for p in np.linspace(0.0, 1.0, 21):
                varied = apply_parameter(cbn, r.parameter, float(p))
                expected = joint_posterior(varied, {}, "e")[1]
                fitted = (r.a * p + r.b) / (r.c * p + r.d)
                assert fitted == pytest.approx(expected, abs=1e-9)

    def test_csv_shape(self):
        cbn = five_node_cbn(9)
        buf = io.StringIO()
        write_ranking_csv(rank_parameters(cbn, ("e", 1))[:3], buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "parameter,node,state,t_at_0,t_at_1,derivative,direction"
        assert len(lines) == 4
