"""Minimum contrast estimation for small-noise diffusions."""

import json

from ._core import (
    ConfigError,
    SmallNoiseError,
    fisher_information,
    model_ids,
    oracle,
    simulate_sde,
    simulate_sir,
)
from . import _core

__all__ = [
    "ConfigError",
    "SmallNoiseError",
    "estimate",
    "fisher_information",
    "model_ids",
    "oracle",
    "run_mc",
    "simulate_sde",
    "simulate_sir",
]


def estimate(model, estimator, obs, horizon, epsilon, alpha_box, beta_box, beta0=(), flow_substeps=16,
             info_mesh_steps=1000):
    """Estimate parameters from observations on an even grid over [0, horizon].

    alpha_box and beta_box are (lower, upper) pairs of sequences.
    """
    doc = _core.estimate_json(model, estimator, obs, horizon, epsilon, list(alpha_box[0]), list(alpha_box[1]),
                              list(beta_box[0]), list(beta_box[1]), list(beta0), flow_substeps, info_mesh_steps)
    return json.loads(doc)


def run_mc(config, out_dir=""):
    """Run a Monte Carlo experiment. `config` is a dict in the CLI config schema."""
    return json.loads(_core.run_mc_json(json.dumps(config), str(out_dir)))
