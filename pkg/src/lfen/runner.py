"""One entry point per method id, shared by the CLI, the bench and the estimator."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import oracles
from .api import LfenSolution, solve_formulation
from .exceptions import WrongGameClassError
from .games import LeaderFollowerInstance, pure_strategy
from .meta import BlackBoxConfig, blackbox_lfen, implicit_enumeration
from .solvers.result import OPTIMAL, SolveConfig, compute_gaps

FORMULATION_METHODS = ("onf1", "onf2", "onf3", "opm1", "opm2", "opm3", "lpfm3")
METHODS = FORMULATION_METHODS + ("implicit-enum", "blackbox", "grid", "pure-pure", "lmfp")
MODE_METHODS = ("blackbox", "grid")     # the only ones with a pessimistic variant


class UsageError(ValueError):
    """Inconsistent method, mode and game class."""


def check_method(method: str, kind: str, mode: str) -> None:
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    if method[:3] in ("onf", "opm") and method[1:3] != kind:
        raise UsageError(f"method {method} needs a {method[1:3]} game, got {kind}")
    if mode != "optimistic" and method not in MODE_METHODS:
        raise UsageError(f"method {method} is optimistic only")


def run_method(instance: LeaderFollowerInstance, method: str, mode: str = "optimistic",
               config: Optional[SolveConfig] = None, blackbox: Optional[BlackBoxConfig] = None,
               trace_path=None) -> LfenSolution:
    """Solve ``instance`` with ``method``; heuristics report an infinite upper bound."""
    kind = instance.game.kind
    check_method(method, kind, mode)
    config = config or SolveConfig()
    if method in FORMULATION_METHODS:
        fid = f"o{kind}_lpfm3" if method == "lpfm3" else method
        try:
            return solve_formulation(instance, fid, config)
        except WrongGameClassError as exc:
            raise UsageError(str(exc)) from exc
    start = time.perf_counter()
    if method == "implicit-enum":
        return implicit_enumeration(instance)
    if method == "blackbox":
        bb = blackbox or BlackBoxConfig()
        bb.mode = mode
        sol, trace = blackbox_lfen(instance, bb)
        if trace_path is not None:
            trace.to_csv(trace_path)
        return sol
    if method == "grid":
        res = oracles.grid_search_lmfm(instance, mode=mode)
        return LfenSolution(res.delta, list(res.record.rhos), res.value, True, 0.0, "grid",
                            "heuristic", res.value, math.inf, res.points,
                            time.perf_counter() - start)
    if method == "pure-pure":
        res = oracles.enumerate_pure_pure(instance)
        if not res.found:
            return LfenSolution(None, None, math.nan, False, math.nan, "pure-pure", "infeasible",
                                -math.inf, -math.inf, 0, time.perf_counter() - start)
        rhos = [pure_strategy(instance.game.m[f], a)
                for f, a in zip(instance.followers, res.follower_actions)]
        return LfenSolution(pure_strategy(instance.m_leader, res.leader_action), rhos, res.value,
                            True, 0.0, "pure-pure", OPTIMAL, res.value, res.value, 0,
                            time.perf_counter() - start)
    res = oracles.lmfp_via_lps(instance)
    if not res.found:
        return LfenSolution(None, None, math.nan, False, math.nan, "lmfp", "infeasible",
                            -math.inf, -math.inf, res.lps, time.perf_counter() - start)
    rhos = [pure_strategy(instance.game.m[f], a)
            for f, a in zip(instance.followers, res.follower_actions)]
    return LfenSolution(res.delta, rhos, res.value, True, 0.0, "lmfp", OPTIMAL, res.value,
                        res.value, res.lps, time.perf_counter() - start)


@dataclass
class BenchRow:
    game_class: str
    n: int
    m: int
    seed: int
    method: str
    status: str
    lb: float
    ub: float
    mult_gap: float
    add_gap: float
    wall_time: float
    nodes: int
    value: float

    FIELDS = ("class", "n", "m", "seed", "method", "status", "lb", "ub", "mult_gap", "add_gap",
              "wall_time", "nodes", "value")

    @classmethod
    def from_solution(cls, sol: LfenSolution, game_class, n, m, seed, method) -> "BenchRow":
        lb, ub = sol.lower_bound, sol.upper_bound
        mult, add = compute_gaps(lb, ub) if not (math.isinf(lb) and lb < 0) else (math.inf, math.inf)
        return cls(game_class, n, m, seed, method, sol.status, lb, ub, mult, add, sol.wall_time,
                   sol.nodes, sol.value)

    def as_list(self) -> list:
        return list(asdict(self).values())


def average_row(rows: list) -> list:
    """Arithmetic means of the numeric columns over ``rows`` (one class, m and method)."""
    first = rows[0]
    cols = ["lb", "ub", "mult_gap", "add_gap", "wall_time", "nodes", "value"]
    means = [float(np.mean([getattr(r, c) for r in rows])) for c in cols]
    n_opt = sum(r.status == OPTIMAL for r in rows)
    return [first.game_class, first.n, first.m, "avg", first.method, f"{n_opt}/{len(rows)} optimal",
            *means]
