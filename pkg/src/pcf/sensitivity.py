"""One-way sensitivity of a posterior to single CPT parameters.

Varying one CPT cell p while co-varying its row companions proportionally
makes the posterior an exact linear rational function T(p) = (ap+b)/(cp+d).
The coefficients are recovered by exact re-inference at three p values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .cbn import Cbn, infer_posterior
from .errors import DataError, ZeroEvidence

_FIT_TOL = 1e-12

Parameter = tuple[str, int, int]  # (node, parent configuration index, state)


@dataclass(frozen=True)
class SensitivityResult:
    parameter: Parameter
    a: float
    b: float
    c: float
    d: float
    current_p: float
    derivative_at_p: float
    t_at_0: float
    t_at_1: float
    direction: str  # positive | negative | flat


def apply_parameter(cbn: Cbn, parameter: Parameter, p: float) -> Cbn:
    """New network with the parameter set to p under proportional
    co-variation of the other states in its CPT row (uniform when the
    original value is 1)."""
    node, q, state = parameter
    _check_parameter(cbn, parameter)
    if not 0.0 <= p <= 1.0:
        raise DataError(f"parameter value {p} outside [0, 1]")
    cpt = np.array(cbn.cpts[node], dtype=float)
    row = cpt[q].copy()
    p0 = row[state]
    r = len(row)
    if p0 >= 1.0:
        row[:] = (1.0 - p) / (r - 1)
    else:
        row *= (1.0 - p) / (1.0 - p0)
    row[state] = p
    cpt[q] = row
    cpts = dict(cbn.cpts)
    cpts[node] = cpt
    return Cbn(
        dag=cbn.dag,
        cards=dict(cbn.cards),
        cpts=cpts,
        categories=dict(cbn.categories),
        target=cbn.target,
    )


def _check_parameter(cbn: Cbn, parameter: Parameter) -> None:
    node, q, state = parameter
    if node not in cbn.dag.nodes:
        raise DataError(f"unknown node {node!r}")
    shape = np.asarray(cbn.cpts[node]).shape
    if not (0 <= q < shape[0] and 0 <= state < shape[1]):
        raise DataError(f"parameter {parameter} outside the CPT of {node!r}")


def _posterior_at(
    cbn: Cbn,
    parameter: Parameter,
    p: float,
    target: tuple[str, int],
    evidence: dict[str, int],
) -> float:
    var, state = target
    return float(infer_posterior(apply_parameter(cbn, parameter, p), evidence, var)[state])


def sensitivity_coefficients(
    cbn: Cbn,
    target: tuple[str, int],
    evidence: dict[str, int] | list[tuple[str, int]],
    parameter: Parameter,
) -> tuple[float, float, float, float]:
    """Fit T(p) = (ap + b)/(cp + d), normalized to d = 1.

    Three exact posteriors at distinct p pin the coefficients; a constant
    posterior degenerates to (0, t, 0, 1).
    """
    evidence = dict(evidence)
    var, state = target
    if var in evidence:
        raise DataError("target variable cannot appear in the evidence")
    if not 0 <= state < cbn.cards[var]:
        raise DataError(f"target state {state} out of range for {var!r}")
    _check_parameter(cbn, parameter)

    for points in ((0.0, 0.5, 1.0), (0.25, 0.5, 0.75)):
        try:
            values = [
                _posterior_at(cbn, parameter, p, target, evidence) for p in points
            ]
            break
        except ZeroEvidence:
            continue
    else:
        raise ZeroEvidence(
            "evidence has zero probability across the parameter's range"
        )

    if max(values) - min(values) <= _FIT_TOL:
        return (0.0, values[1], 0.0, 1.0)

    # with d = 1: a*p + b - t*c*p = t at each sample point
    lhs = np.array([[p, 1.0, -t * p] for p, t in zip(points, values)])
    rhs = np.array(values)
    try:
        a, b, c = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        return (0.0, values[1], 0.0, 1.0)
    if abs(a) <= _FIT_TOL and abs(c) <= _FIT_TOL:
        return (0.0, values[1], 0.0, 1.0)
    return (float(a), float(b), float(c), 1.0)


def sensitivity_derivative(a: float, b: float, c: float, d: float, p: float) -> float:
    """dT/dp = (ad - bc)/(cp + d)^2."""
    denom = c * p + d
    if denom == 0.0:
        raise DataError(f"denominator c*p + d vanishes at p = {p}")
    return (a * d - b * c) / (denom * denom)


def rank_parameters(
    cbn: Cbn,
    target: tuple[str, int],
    evidence: dict[str, int] | list[tuple[str, int]] = (),
) -> list[SensitivityResult]:
    """One SensitivityResult per CPT cell, sorted by the size of the
    posterior's reachable range |t(1) - t(0)| descending. The sort is
    stable over the deterministic (node, configuration, state) enumeration."""
    evidence = dict(evidence)
    results = []
    for node in cbn.dag.nodes:
        cpt = np.asarray(cbn.cpts[node])
        for q in range(cpt.shape[0]):
            for state in range(cpt.shape[1]):
                parameter = (node, q, state)
                a, b, c, d = sensitivity_coefficients(cbn, target, evidence, parameter)
                p0 = float(cpt[q, state])
                deriv = sensitivity_derivative(a, b, c, d, p0)
                t0 = b / d
                t1 = (a + b) / (c + d)
                if abs(t1 - t0) <= _FIT_TOL and abs(deriv) <= _FIT_TOL:
                    direction = "flat"
                elif deriv > 0:
                    direction = "positive"
                else:
                    direction = "negative"
                results.append(
                    SensitivityResult(
                        parameter=parameter,
                        a=a,
                        b=b,
                        c=c,
                        d=d,
                        current_p=p0,
                        derivative_at_p=deriv,
                        t_at_0=t0,
                        t_at_1=t1,
                        direction=direction,
                    )
                )
    results.sort(key=lambda r: -abs(r.t_at_1 - r.t_at_0))
    return results


def write_ranking_csv(results: list[SensitivityResult], stream) -> None:
    """Ranked CSV suitable for tornado-chart rendering."""
    writer = csv.writer(stream)
    writer.writerow(
        ["parameter", "node", "state", "t_at_0", "t_at_1", "derivative", "direction"]
    )
    for r in results:
        node, q, state = r.parameter
        writer.writerow(
            [
                f"{node}[{q},{state}]",
                node,
                state,
                repr(r.t_at_0),
                repr(r.t_at_1),
                repr(r.derivative_at_p),
                r.direction,
            ]
        )
