"""Python front end for the semiflow C++ core."""

import json

from . import _core
from ._core import SemiflowError, model_names

__all__ = ["SemiflowError", "model_names", "solve", "jet", "fd_check", "certify", "semiflow_defect", "run"]


def _params(params):
    return json.dumps(params or {})


def solve(model, params=None, T=0.5, n_steps=100, tol=1e-12, x0=None):
    return _core.solve(model, _params(params), T, n_steps, tol, x0)


def jet(model, params=None, T=0.5, n_steps=100, tol=1e-12, order=1):
    return _core.jet(model, _params(params), T, n_steps, tol, order)


def fd_check(model, params=None, T=0.5, n_steps=100, tol=1e-13, eps=(4e-3, 2e-3, 1e-3, 5e-4), direction=0):
    return _core.fd_check(model, _params(params), T, n_steps, tol, list(eps), direction)


def certify(model, params=None, use_alpha=False):
    """Regularity report as a dict; report["verdict"] is "certified" or "failed(<check>)"."""
    return json.loads(_core.certify_json(model, _params(params), use_alpha))


def semiflow_defect(model, params=None, s=0.25, t=0.25, n_steps=50):
    return _core.semiflow_defect(model, _params(params), s, t, n_steps)


def run(command, config, output_dir=None, seed=None):
    """Runs one CLI pipeline; returns (exit_code, diagnostics)."""
    text = config if isinstance(config, str) else json.dumps(config, indent=2)
    return _core.run(command, text, output_dir or "", seed)
