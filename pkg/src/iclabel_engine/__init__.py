"""Standalone ICLabel-style EEG independent component classifier."""

__version__ = "0.1.0"

from .dataset import EegDataset, ica_activations, load_set
from .network import load_weights
from .pipeline import ClassificationTable, Compat, classify, extract_features

__all__ = [
    "__version__",
    "EegDataset",
    "ClassificationTable",
    "Compat",
    "classify",
    "extract_features",
    "ica_activations",
    "load_set",
    "load_weights",
]
