"""Python bindings for the irco C++ core."""

import json

from ._irco import (
    DegenerateError,
    DegenerateSlopeError,
    DivergenceError,
    Error,
    heteroscedastic,
    load_csv,
    metric,
    partial_auc_pr,
    partial_auc_roc,
    roc_auc,
)
from ._irco import gradcheck as _gradcheck
from ._irco import run_experiment as _run_experiment

__all__ = [
    "DegenerateError",
    "DegenerateSlopeError",
    "DivergenceError",
    "Error",
    "gradcheck",
    "heteroscedastic",
    "load_csv",
    "metric",
    "partial_auc_pr",
    "partial_auc_roc",
    "roc_auc",
    "run_experiment",
]


def _config_text(config):
    return config if isinstance(config, str) else json.dumps(config)


def run_experiment(config):
    """Run a sweep from a config dict or JSON string; returns the report dict."""
    return json.loads(_run_experiment(_config_text(config)))


def gradcheck(config):
    """Finite-difference checks at the initial parameters; returns max errors."""
    return _gradcheck(_config_text(config))
