"""Trajectory grade-of-membership models for binary panel data."""

import json
import os

from ._tgom import (
    Chain,
    ChainFormatError,
    ConfigError,
    IoError,
    NumericalError,
    Panel,
    TgomError,
    ValidationError,
    __version__,
    age_quantile,
)
from . import _tgom

__all__ = [
    "Chain",
    "ChainFormatError",
    "ConfigError",
    "IoError",
    "NumericalError",
    "Panel",
    "TgomError",
    "ValidationError",
    "__version__",
    "age_quantile",
    "baseline_phi",
    "cross_validate",
    "fit",
    "load_config",
    "phi",
    "run_cli",
    "simulate",
    "summarize",
]


def _as_json(config):
    if isinstance(config, (str, os.PathLike)) and os.path.exists(config):
        with open(config) as f:
            return f.read()
    if isinstance(config, dict):
        return json.dumps(config)
    return config


def load_config(config):
    """Validated fit config as a dict, defaults filled in."""
    return json.loads(_tgom.normalize_config(_as_json(config)))


def simulate(spec, seed=None):
    """Draw a synthetic panel. Returns (Panel, ground-truth CSV text)."""
    text = _as_json(spec)
    if seed is None:
        seed = json.loads(text).get("seed", 1)
    return _tgom.simulate(text, int(seed))


def fit(panel, config):
    """Run the sampler on a Panel with a config dict, JSON string or path."""
    return _tgom.fit(panel, _as_json(config))


def summarize(chain, relabel=True):
    """Posterior summaries as a dict: xi, alpha0, per-profile coefficients and onset ages."""
    if relabel:
        chain, _ = chain.relabel()
    return json.loads(chain.summary_json())


def phi(heldout, chain, membership_draws=20, max_draws=0, seed=1):
    """Held-out predictive probabilities: arrays cell (N,T,J), item, wave, all, plus means."""
    return _tgom.phi(heldout, chain, membership_draws, max_draws, seed)


def baseline_phi(train, heldout):
    """Same quantities under independent per-item cubic logistic curves."""
    return _tgom.baseline_phi(train, heldout)


def cross_validate(panel, models, folds=4, seed=1, membership_draws=20, max_draws=0, baseline=True):
    """K-fold comparison. models maps a display name to a fit config."""
    pairs = [(name, _as_json(cfg)) for name, cfg in dict(models).items()]
    return json.loads(_tgom.cross_validate(panel, pairs, folds, seed, membership_draws, max_draws, baseline))


def run_cli(*args):
    """Run a command line in-process. Returns (exit code, stdout, stderr)."""
    return _tgom.run_cli([str(a) for a in args])
