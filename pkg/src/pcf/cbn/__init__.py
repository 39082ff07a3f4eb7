"""Causal Bayesian networks: graphs, structure learning, averaging,
ordering, CPT fitting, exact inference and sampling."""

from .graphs import (
    Dag,
    MixedGraph,
    model_average,
    read_graph_csv,
    topological_order,
    write_graph_csv,
)
from .model import Cbn, fit_cpts, infer_posterior, sample_from_cbn
from .scoring import BicScorer, bic_local_scores, bic_score
from .search import Knowledge, SearchConfig, hill_climb, tabu_search

__all__ = [
    "Dag",
    "MixedGraph",
    "model_average",
    "topological_order",
    "read_graph_csv",
    "write_graph_csv",
    "Cbn",
    "fit_cpts",
    "infer_posterior",
    "sample_from_cbn",
    "BicScorer",
    "bic_score",
    "bic_local_scores",
    "Knowledge",
    "SearchConfig",
    "hill_climb",
    "tabu_search",
]
