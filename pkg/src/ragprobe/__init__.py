"""Counterfactual evidence interventions for single-shot RAG pipelines."""

__version__ = "0.1.0"
