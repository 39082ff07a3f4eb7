"""Causal discovery and probability-tree prediction for discrete tabular
data: structure learning with model averaging, tree ensembles supporting
interventions and counterfactuals, sensitivity analysis, and Shapley
explanations, with a CLI and an HTTP model server on top."""

__version__ = "0.1.0"
