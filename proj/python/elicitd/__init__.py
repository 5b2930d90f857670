"""Python bindings for the elicitd core library."""

import json as _json

from ._elicitd import (
    ElicitdError,
    ElicitdIoError,
    Model,
    NumericsError,
    beta_cdf,
    beta_from_moments,
    beta_pdf,
    ci_correct,
    credible_interval,
    discretize_beta,
    distribution_entropy,
    f_score,
    fit_beta,
    generate_panel,
    kl_divergence,
    point_entropy,
)
from ._elicitd import run as _run

__version__ = "0.1.0"


def run(command, config=None, *, seed=None, out=None, quiet=True):
    """Run a pipeline subcommand. `config` is a dict or a JSON string."""
    if config is None:
        config = {}
    if not isinstance(config, str):
        config = _json.dumps(config)
    _run(command, config, seed=seed, out=None if out is None else str(out), quiet=quiet)


__all__ = [
    "ElicitdError",
    "ElicitdIoError",
    "Model",
    "NumericsError",
    "beta_cdf",
    "beta_from_moments",
    "beta_pdf",
    "ci_correct",
    "credible_interval",
    "discretize_beta",
    "distribution_entropy",
    "f_score",
    "fit_beta",
    "generate_panel",
    "kl_divergence",
    "point_entropy",
    "run",
]
