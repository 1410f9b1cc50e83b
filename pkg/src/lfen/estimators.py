"""scikit-learn style facade: hyperparameters in ``__init__``, results in ``*_`` attributes.

``fit`` takes a :class:`LeaderFollowerInstance` (or a game) instead of an
``(X, y)`` pair; only the parameter handling of ``BaseEstimator`` applies.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .api import oracle_value
from .games import Game, LeaderFollowerInstance
from .meta import BlackBoxConfig
from .runner import run_method
from .solvers.result import SolveConfig


class LeaderFollowerSolver(BaseEstimator):
    """Compute a leader commitment and the followers' equilibrium response.

    Parameters mirror the CLI flags; ``method`` is any id accepted by
    ``lfen solve --method``.
    """

    def __init__(self, method="onf3", mode="optimistic", gap_tol=1e-6, time_limit=math.inf,
                 eval_budget=None, seed=0):
        self.method = method
        self.mode = mode
        self.gap_tol = gap_tol
        self.time_limit = time_limit
        self.eval_budget = eval_budget
        self.seed = seed

    def fit(self, instance, y=None):
        if isinstance(instance, Game):
            instance = LeaderFollowerInstance(instance)
        method = self.method
        if method == "onf3" and instance.game.kind == "pm":
            method = "opm3"
        config = SolveConfig(rel_gap_tol=self.gap_tol, time_limit=self.time_limit)
        bb = BlackBoxConfig(eval_budget=self.eval_budget, seed=self.seed)
        sol = run_method(instance, method, self.mode, config, bb)
        self.instance_ = instance
        self.solution_ = sol
        self.delta_ = sol.delta
        self.rhos_ = sol.rhos
        self.value_ = sol.value
        self.certified_ = sol.certified
        return self

    def _check(self):
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit first")

    def predict(self, deltas) -> np.ndarray:
        """Oracle value (in ``mode``) at each row of ``deltas``."""
        self._check()
        deltas = np.atleast_2d(np.asarray(deltas, dtype=np.float64))
        return np.array([oracle_value(self.instance_, d, self.mode, "enumeration").value
                         for d in deltas])

    def score(self, instance=None, y=None) -> float:
        self._check()
        return float(self.value_)
