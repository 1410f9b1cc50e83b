"""High-level entry points: solve a formulation, evaluate the follower oracle."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import formulations as fm
from . import games as gc
from . import oracles
from .formulations import FormulationId
from .games import LeaderFollowerInstance, pure_strategy
from .heuristics import oracle_hook
from .solvers.bnb import solve_milp, solve_spatial
from .solvers.result import SolveConfig, SolveResult
from .validation import NE_EPS


@dataclass
class LfenSolution:
    """Leader commitment, follower profile and how it was obtained and certified."""

    delta: Optional[np.ndarray]
    rhos: Optional[list]
    value: float
    certified: bool
    max_regret: float
    method: str
    status: str
    lower_bound: float = -math.inf
    upper_bound: float = math.inf
    nodes: int = 0
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "value": self.value,
            "delta": None if self.delta is None else [float(v) for v in self.delta],
            "rhos": None if self.rhos is None else [[float(v) for v in r] for r in self.rhos],
            "certified": self.certified,
            "max_regret": self.max_regret,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "nodes": self.nodes,
            "wall_time": self.wall_time,
        }


def _from_result(model, result: SolveResult, instance, method, eps=NE_EPS) -> LfenSolution:
    if not result.has_solution:
        return LfenSolution(None, None, math.nan, False, math.nan, method, result.status,
                            result.lower_bound, result.upper_bound, result.nodes, result.wall_time)
    sol = fm.extract_solution(model, result.x, instance, eps=eps, certify=False)
    if len(instance.followers) == 2:
        _snap(sol, instance, eps, maximize=model.direction == "max")
    lb, ub = result.lower_bound, result.upper_bound
    if model.direction == "max":
        ub = max(ub, sol.leader_value)
        lb = sol.leader_value
    else:
        lb = min(lb, sol.leader_value)
        ub = sol.leader_value
    return LfenSolution(sol.delta, sol.rhos, sol.leader_value, sol.certified, sol.max_regret,
                        method, result.status, lb, ub, result.nodes, result.wall_time,
                        {"lp_iterations": result.lp_iterations})


def _snap(sol, instance, eps, maximize):
    """Replace the follower profile by the exact equilibrium on its supports when that is
    no worse for the model's objective direction by more than rounding."""
    A, B = gc.induced_follower_game(instance, sol.delta)
    snapped = oracles.snap_equilibrium(A, B, *sol.rhos)
    if snapped is None:
        return
    rhos = list(snapped)
    verdict = gc.is_epsilon_ne(instance, sol.delta, rhos, eps)
    if not verdict.ok:
        return
    value = gc.leader_utility(instance, sol.delta, rhos)
    scale = 1e-8 * (1.0 + abs(sol.leader_value))
    if (value < sol.leader_value - scale) if maximize else (value > sol.leader_value + scale):
        return
    sol.rhos, sol.leader_value = rhos, value
    sol.max_regret, sol.certified = verdict.max_violation, True


def solve_model(model, instance, config: Optional[SolveConfig] = None, use_hook: bool = True):
    """Pick the engine for a built model: MILP when every product has a binary factor."""
    config = config or SolveConfig()
    hook = oracle_hook(model, instance) if use_hook and "delta" not in model.metadata else None
    fid = FormulationId(model.metadata["formulation"])
    if fid in (FormulationId.OPM_LPFM3, FormulationId.ORACLE_PM):
        return solve_milp(model, config, hook)
    return solve_spatial(model, config, hook)


def solve_formulation(instance: LeaderFollowerInstance, fid, config: Optional[SolveConfig] = None,
                      use_hook: bool = True) -> LfenSolution:
    """Build and globally solve one leader formulation; the value is recomputed from the game."""
    fid = FormulationId(fid)
    model = fm.build(instance, fid)
    result = solve_model(model, instance, config, use_hook)
    return _from_result(model, result, instance, fid.value)


@dataclass
class OracleOutcome:
    value: float
    rhos: Optional[list]
    certified: bool
    wall_time: float
    discrepancy: float = 0.0     # |formulation value - support-enumeration value|
    status: str = "optimal"


ORACLE_CONFIG = SolveConfig(rel_gap_tol=1e-9)


def oracle_value(instance: LeaderFollowerInstance, delta, mode: str = "optimistic",
                 backend: str = "formulation", config: Optional[SolveConfig] = None,
                 cross_check: bool = True) -> OracleOutcome:
    """Best (optimistic) or worst (pessimistic) leader utility over follower equilibria at ``delta``.

    ``backend="formulation"`` solves the oracle model (MILP for polymatrix,
    spatial branch-and-bound otherwise) and compares with support
    enumeration; ``backend="enumeration"`` uses support enumeration alone.
    """
    start = time.perf_counter()
    if backend == "enumeration":
        rec = oracles.best_worst_ne_for_leader(instance, delta, mode)
        return OracleOutcome(rec.leader_value, list(rec.rhos), True, time.perf_counter() - start)
    if backend != "formulation":
        raise ValueError(f"unknown oracle backend {backend!r}")
    fid = FormulationId.ORACLE_PM if instance.game.kind == "pm" else FormulationId.ORACLE_NF
    model = fm.build(instance, fid, delta=delta, mode=mode)
    result = solve_model(model, instance, config or ORACLE_CONFIG, use_hook=False)
    if not result.has_solution:
        raise RuntimeError(f"oracle model ended without a solution ({result.status}); "
                           "an equilibrium always exists, so this is numerical trouble")
    sol = _from_result(model, result, instance, fid.value)
    gap = 0.0
    if cross_check:
        gap = abs(sol.value - oracles.best_worst_ne_for_leader(instance, delta, mode).leader_value)
    return OracleOutcome(sol.value, sol.rhos, sol.certified, time.perf_counter() - start, gap,
                         result.status)


def pure_leader_values(instance, backend: str = "formulation", config=None) -> list:
    """Optimistic oracle value at every pure commitment (the exhaustive baseline)."""
    return [oracle_value(instance, pure_strategy(instance.m_leader, i), "optimistic", backend,
                         config).value for i in range(instance.m_leader)]
