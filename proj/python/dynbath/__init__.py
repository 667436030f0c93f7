"""Python bindings for the dynbath engine."""

import json as _json

from ._core import (
    NumericalError,
    ValidationError,
    basis_states,
    eigenvalues,
    fit_bose_einstein,
    fit_biexponential,
    fit_fdt_beta,
    hamiltonian,
    r_ratio,
    sector_dimension,
    version,
)
from ._core import run as _run

__all__ = [
    "NumericalError",
    "ValidationError",
    "basis_states",
    "eigenvalues",
    "fit_bose_einstein",
    "fit_biexponential",
    "fit_fdt_beta",
    "hamiltonian",
    "r_ratio",
    "run",
    "sector_dimension",
    "version",
]


def run(config, output_directory=None):
    """Run a configuration given as a dict, JSON text, or path; returns the manifest dict."""
    if isinstance(config, dict):
        text = _json.dumps(config)
    elif isinstance(config, str) and config.lstrip().startswith("{"):
        text = config
    else:
        with open(config) as fh:
            text = fh.read()
    return _json.loads(_run(text, str(output_directory) if output_directory else ""))
