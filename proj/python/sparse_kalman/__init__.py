"""Sparse Kalman identification.

Joint state and basis-weight estimation with a square-root unscented Kalman
filter whose weight priors are learned online (automatic relevance
determination). Configs are plain dicts with the same schema as the CLI's JSON
files.
"""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    SkiError,
    chol_rank_one,
    cholesky_factor,
    qr_r_factor,
    solve_with_factor,
    sparse_regress,
)

__all__ = [
    "ConfigError",
    "SkiError",
    "chol_rank_one",
    "cholesky_factor",
    "default_config",
    "load_config",
    "qr_r_factor",
    "resolve_config",
    "run",
    "solve_with_factor",
    "sparse_regress",
]


def default_config(scenario):
    """Preset config for "wingrock", "delay", "quadrotor" or "quad-z"."""
    return _json.loads(_core.default_config(scenario))


def load_config(path):
    return _json.loads(_core.load_config(str(path)))


def resolve_config(config, overrides=()):
    """Validate a config dict and apply "a.b=value" overrides."""
    return _json.loads(_core.resolve_config(_json.dumps(config), list(overrides)))


def run(config, method=None, seed=0):
    """Run one (method, seed) cell.

    `config` is a dict or a path to a JSON file. Returns a dict with the
    per-step arrays (t, y, u, estimate, half_width, prior_variance), the basis
    labels and a "metrics" dict matching metrics.json.
    """
    if not isinstance(config, dict):
        config = load_config(config)
    return _core.run(_json.dumps(config), method or "", int(seed))
