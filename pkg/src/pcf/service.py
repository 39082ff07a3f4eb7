"""HTTP/JSON model server: prediction, intervention, counterfactual,
sensitivity, attribution and reorder-and-retrain over a shared model.

Readers work against an immutable snapshot; a retrain builds the new model
off to the side and swaps it in atomically, bumping the version that every
response reports in the X-Model-Version header.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import ensemble as ens
from . import explain, metrics, sensitivity
from .cbn import Cbn
from .errors import DataError, PcfError
from .ptree import counterfactual as tree_counterfactual
from .ptree import do as tree_do
from .ptree import event_and, prob, prop
from .tabular import DiscreteTable


@dataclass(frozen=True)
class Snapshot:
    """One immutable serving state; everything a request needs."""

    version: int
    model: ens.PcfModel
    background: list[dict[str, int]] | None


class ModelHandle:
    """Holds the current snapshot and serializes retrains."""

    def __init__(
        self,
        model: ens.PcfModel,
        train_table: DiscreteTable | None = None,
        cbn: Cbn | None = None,
        model_path: str | None = None,
        background_k: int = explain.DEFAULT_BACKGROUND_K,
    ):
        self.train_table = train_table
        self.cbn = cbn
        self.model_path = Path(model_path) if model_path else None
        self.background_k = background_k
        self._retrain_lock = threading.Lock()
        self._snapshot = Snapshot(
            version=1, model=model, background=self._make_background(model)
        )

    def _make_background(self, model: ens.PcfModel):
        if self.train_table is None:
            return None
        k = min(
            self.background_k, len(np.unique(self.train_table.rows, axis=0))
        )
        return explain.kmodes_background(self.train_table, k, seed=model.seed)

    def snapshot(self) -> Snapshot:
        return self._snapshot

    def retrain(self, variable_order: list[str]) -> tuple[Snapshot, Snapshot]:
        """Retrain under a new order; returns (old, new) snapshots."""
        if self.train_table is None:
            raise DataError("server was started without training data")
        if not self._retrain_lock.acquire(blocking=False):
            raise RetrainInProgress()
        try:
            old = self._snapshot
            current = old.model
            if sorted(variable_order) != sorted(current.variable_order):
                raise DataError(
                    "variable_order must be a permutation of the current order"
                )
            if variable_order[-1] != current.target:
                raise DataError("variable_order must end with the target")
            model = ens.train_ensemble(
                self.train_table,
                tuple(variable_order),
                k=len(current.trees),
                pruning_threshold=current.pruning_threshold,
                tau=current.tau,
                seed=current.seed,
            )
            new = Snapshot(
                version=old.version + 1,
                model=model,
                background=old.background,
            )
            if self.model_path is not None:
                versioned = self.model_path.with_name(
                    f"{self.model_path.stem}.v{new.version}{self.model_path.suffix}"
                )
                ens.save_model(model, versioned)
            self._snapshot = new
            return old, new
        finally:
            self._retrain_lock.release()


class RetrainInProgress(PcfError):
    """Another reorder request is still retraining."""


class Statement(BaseModel):
    var: str
    code: int

    def pair(self) -> tuple[str, int]:
        return (self.var, self.code)


class PredictRequest(BaseModel):
    features: dict[str, int]


class InterveneRequest(BaseModel):
    do: list[Statement]
    query: Statement


class CounterfactualRequest(BaseModel):
    factual: list[Statement]
    intervene: Statement
    query: Statement


class ShapRequest(BaseModel):
    features: dict[str, int]
    mode: str = "exact"
    n_samples: int = 1000
    seed: int = 0


class ReorderRequest(BaseModel):
    variable_order: list[str]


def _tree_marginal(tree, query: tuple[str, int]) -> float:
    mass = tree.total_mass()
    return prob(tree, prop(tree, query)) / mass if mass > 0 else 0.0


def _averaged_do(model: ens.PcfModel, statements, query) -> float:
    values = []
    for tree in model.trees:
        current = tree
        for statement in statements:
            current = tree_do(current, prop(tree, statement))
        mass = current.total_mass()
        values.append(
            prob(current, prop(tree, query)) / mass if mass > 0 else 0.0
        )
    return float(np.mean(values))


def _self_metrics(model: ens.PcfModel, table: DiscreteTable) -> dict:
    scores, labels = ens.evaluate_rows(model, table)
    truth = table.target_column()
    c = metrics.confusion(labels, truth)
    out = {}
    for name, fn in (
        ("accuracy", metrics.accuracy),
        ("specificity", metrics.specificity),
        ("sensitivity", metrics.sensitivity),
    ):
        try:
            out[name] = fn(c)
        except PcfError:
            out[name] = None
    try:
        out["auc_roc"] = metrics.auc_roc(scores, truth)
    except PcfError:
        out["auc_roc"] = None
    return out


def create_app(
    model: ens.PcfModel,
    train_table: DiscreteTable | None = None,
    cbn: Cbn | None = None,
    model_path: str | None = None,
) -> FastAPI:
    handle = ModelHandle(model, train_table=train_table, cbn=cbn, model_path=model_path)
    app = FastAPI(title="pcf model server")
    app.state.handle = handle

    def respond(payload, snapshot: Snapshot, status_code: int = 200) -> JSONResponse:
        return JSONResponse(
            payload,
            status_code=status_code,
            headers={"X-Model-Version": str(snapshot.version)},
        )

    @app.exception_handler(PcfError)
    async def domain_error(request: Request, exc: PcfError):
        if isinstance(exc, RetrainInProgress):
            status = 409
        elif exc.exit_code == 5:
            status = 422
        else:
            status = 400
        return JSONResponse(
            {"error": str(exc)},
            status_code=status,
            headers={"X-Model-Version": str(handle.snapshot().version)},
        )

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        return JSONResponse({"error": "internal error"}, status_code=500)

    @app.get("/model")
    def get_model():
        snap = handle.snapshot()
        m = snap.model
        summary = None
        if handle.train_table is not None:
            y = handle.train_table.target_column()
            summary = {
                "rows": handle.train_table.n_rows,
                "positives": int((y == ens.POSITIVE_CLASS).sum()),
            }
        return respond(
            {
                "schema": m.schema.to_dict(),
                "variable_order": list(m.variable_order),
                "k": len(m.trees),
                "tau": m.tau,
                "pruning_threshold": m.pruning_threshold,
                "seed": m.seed,
                "training": summary,
                "version": snap.version,
            },
            snap,
        )

    @app.post("/predict")
    def post_predict(body: PredictRequest):
        snap = handle.snapshot()
        p = ens.predict_proba(snap.model, body.features)
        return respond(
            {"probability": p, "class": int(p > snap.model.tau)}, snap
        )

    @app.post("/intervene")
    def post_intervene(body: InterveneRequest):
        snap = handle.snapshot()
        model = snap.model
        query = body.query.pair()
        baseline = float(
            np.mean([_tree_marginal(t, query) for t in model.trees])
        )
        intervened = _averaged_do(
            model, [s.pair() for s in body.do], query
        )
        return respond(
            {
                "baseline": baseline,
                "intervened": intervened,
                "delta": intervened - baseline,
            },
            snap,
        )

    @app.post("/counterfactual")
    def post_counterfactual(body: CounterfactualRequest):
        snap = handle.snapshot()
        model = snap.model
        if not body.factual:
            raise DataError("factual must be nonempty")
        values = []
        for tree in model.trees:
            factual_event = None
            for statement in body.factual:
                cut = prop(tree, statement.pair())
                factual_event = (
                    cut
                    if factual_event is None
                    else event_and(tree, factual_event, cut)
                )
            values.append(
                tree_counterfactual(
                    tree,
                    factual_event,
                    prop(tree, body.intervene.pair()),
                    prop(tree, body.query.pair()),
                )
            )
        return respond({"probability": float(np.mean(values))}, snap)

    @app.get("/sensitivity")
    def get_sensitivity(
        target: str = Query(...), evidence: list[str] = Query(default=[])
    ):
        snap = handle.snapshot()
        if handle.cbn is None:
            raise DataError("server was started without a network file")
        tvar, _, tstate = target.partition("=")
        if not tstate:
            raise DataError("target must be var=state")
        ev = {}
        for item in evidence:
            var, _, code = item.partition("=")
            if not code:
                raise DataError("evidence items must be var=code")
            ev[var] = int(code)
        results = sensitivity.rank_parameters(
            handle.cbn, (tvar, int(tstate)), ev
        )
        return respond(
            {
                "ranking": [
                    {
                        "node": r.parameter[0],
                        "config": r.parameter[1],
                        "state": r.parameter[2],
                        "t_at_0": r.t_at_0,
                        "t_at_1": r.t_at_1,
                        "derivative": r.derivative_at_p,
                        "direction": r.direction,
                    }
                    for r in results
                ]
            },
            snap,
        )

    @app.post("/shap")
    def post_shap(body: ShapRequest):
        snap = handle.snapshot()
        if snap.background is None:
            raise DataError("server was started without training data")
        att = explain.shap_values(
            snap.model,
            body.features,
            snap.background,
            mode=body.mode,
            n_samples=body.n_samples,
            seed=body.seed,
        )
        return respond(
            {
                "features": list(att.features),
                "phi": list(att.phi),
                "base_value": att.base_value,
                "prediction": att.prediction,
            },
            snap,
        )

    @app.post("/reorder")
    def post_reorder(body: ReorderRequest):
        old, new = handle.retrain(body.variable_order)
        before = _self_metrics(old.model, handle.train_table)
        after = _self_metrics(new.model, handle.train_table)
        return respond(
            {
                "metrics_before": before,
                "metrics_after": after,
                "variable_order": list(new.model.variable_order),
                "version": new.version,
            },
            new,
        )

    return app
