"""Market implied scenario distributions for CLO tranches."""

import json

from . import _core
from ._core import Error, SolverError, ValidationError

__all__ = ["Error", "SolverError", "ValidationError", "calibrate", "map_bespoke", "risk", "synth", "maxent"]


def calibrate(scenarios, pv, quotes):
    """Calibrate an index MISD from fixture files; returns the report as a dict."""
    return json.loads(_core.calibrate(str(scenarios), str(pv), str(quotes)))


def map_bespoke(scenarios, index_pv, index_quotes, bespoke_pv, bespoke_quotes=None):
    return json.loads(
        _core.map(str(scenarios), str(index_pv), str(index_quotes), str(bespoke_pv),
                  None if bespoke_quotes is None else str(bespoke_quotes)))


def risk(scenarios, index_pv, index_quotes, bespoke_pv, bespoke_quotes, mode="delta",
         constraint_mode="hard", bump=1.0, scheme="forward"):
    return json.loads(
        _core.risk(str(scenarios), str(index_pv), str(index_quotes), str(bespoke_pv), str(bespoke_quotes),
                   mode, constraint_mode, bump, scheme))


def synth(spec, scenarios, periods=None):
    """PV matrix CSV text for a synthetic deal across the scenario set."""
    return _core.synth(str(spec), str(scenarios), periods)


def maxent(coefficients, targets, n, prior=None):
    """Maximum entropy (or minimum cross entropy against `prior`) weights."""
    return _core.maxent([list(map(float, row)) for row in coefficients], [float(t) for t in targets], int(n),
                        None if prior is None else [float(p) for p in prior])
