"""Meta-procedures built on the follower oracle.

``implicit_enumeration`` solves the pure-leader problem by visiting leader
actions in order of a correlated-equilibrium upper bound and pruning the rest.
``blackbox_lfen`` searches the leader simplex with a cubic RBF surrogate.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import RBFInterpolator

from .api import LfenSolution, oracle_value
from .exceptions import LfenError, UnsupportedError
from .games import LeaderFollowerInstance, pure_strategy
from .oracles import OPTIMISTIC, PESSIMISTIC, best_ce_for_leader
from .solvers.result import OPTIMAL, SolveConfig

log = logging.getLogger(__name__)

#: UB(i) within this relative distance of LB counts as a tie, and ties prune
PRUNE_TOL = 1e-9


def _need_two_followers(instance):
    if len(instance.followers) != 2:
        raise UnsupportedError("this procedure needs exactly two followers")


@dataclass
class UbTable:
    """Correlated-equilibrium bound per leader action and the visiting order."""

    bounds: np.ndarray
    order: list

    @classmethod
    def build(cls, instance: LeaderFollowerInstance, lp_backend: str = "highs") -> "UbTable":
        bounds = np.array([best_ce_for_leader(instance, i, lp_backend)
                           for i in range(instance.m_leader)])
        order = sorted(range(len(bounds)), key=lambda i: (-bounds[i], i))
        return cls(bounds, order)


def implicit_enumeration(instance: LeaderFollowerInstance, config: Optional[SolveConfig] = None,
                         backend: str = "formulation") -> LfenSolution:
    """Best pure leader commitment against an optimistic Nash response.

    ``info`` carries ``oracle_calls``, the ``pruned`` actions, the ``ub`` table
    and the largest disagreement between the oracle model and support
    enumeration.
    """
    _need_two_followers(instance)
    start = time.perf_counter()
    table = UbTable.build(instance)
    lb, best, best_i = -math.inf, None, None
    calls, pruned, discrepancy = 0, [], 0.0
    for i in table.order:
        if table.bounds[i] <= lb + PRUNE_TOL * (1.0 + abs(lb)):
            pruned.append(i)
            continue
        out = oracle_value(instance, pure_strategy(instance.m_leader, i), OPTIMISTIC, backend, config)
        calls += 1
        discrepancy = max(discrepancy, out.discrepancy)
        if out.value > lb:
            lb, best, best_i = out.value, out, i
    delta = pure_strategy(instance.m_leader, best_i)
    info = {"oracle_calls": calls, "pruned": pruned, "ub": table.bounds.tolist(),
            "order": table.order, "leader_action": best_i, "discrepancy": discrepancy}
    return LfenSolution(delta, best.rhos, best.value, best.certified, 0.0, "implicit-enum",
                        OPTIMAL, best.value, best.value, calls, time.perf_counter() - start, info)


def exhaustive_pure_leader(instance: LeaderFollowerInstance, config: Optional[SolveConfig] = None,
                           backend: str = "formulation") -> LfenSolution:
    """Reference for ``implicit_enumeration``: the oracle at every pure commitment."""
    _need_two_followers(instance)
    start = time.perf_counter()
    outs = [oracle_value(instance, pure_strategy(instance.m_leader, i), OPTIMISTIC, backend, config)
            for i in range(instance.m_leader)]
    values = [o.value for o in outs]
    i = int(np.argmax(values))
    return LfenSolution(pure_strategy(instance.m_leader, i), outs[i].rhos, values[i],
                        outs[i].certified, 0.0, "pure-leader-exhaustive", OPTIMAL, values[i],
                        values[i], len(outs), time.perf_counter() - start,
                        {"values": values, "leader_action": i})


@dataclass
class BlackBoxConfig:
    eval_budget: Optional[int] = None          # default 50 * m_leader
    init_design_size: Optional[int] = None     # default 2 * m_leader + 1
    rbf_kernel: str = "cubic"
    candidate_pool: int = 500
    seed: int = 0
    mode: str = OPTIMISTIC
    backend: str = "formulation"
    oracle_config: Optional[SolveConfig] = None

    def resolved(self, m_leader: int) -> tuple[int, int]:
        budget = 50 * m_leader if self.eval_budget is None else int(self.eval_budget)
        init = 2 * m_leader + 1 if self.init_design_size is None else int(self.init_design_size)
        if self.rbf_kernel != "cubic":
            raise ValueError(f"unsupported kernel {self.rbf_kernel!r}")
        if self.mode not in (OPTIMISTIC, PESSIMISTIC):
            raise ValueError(f"mode must be optimistic or pessimistic, got {self.mode!r}")
        if self.candidate_pool < 1:
            raise ValueError("candidate_pool must be positive")
        if not budget >= init >= m_leader + 1:
            raise ValueError(f"need eval_budget >= init_design_size >= m_leader + 1, "
                             f"got {budget}, {init}, {m_leader}")
        return budget, init


@dataclass
class TraceRow:
    iteration: int
    delta: np.ndarray
    value: float
    best: float
    oracle_time: float
    certified: bool


@dataclass
class BlackBoxTrace:
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)   # (iteration, delta, error message)

    def to_csv(self, path) -> None:
        m = len(self.rows[0].delta) if self.rows else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", *[f"delta_{i}" for i in range(m)], "value", "best_so_far",
                        "oracle_time"])
            for r in self.rows:
                w.writerow([r.iteration, *[repr(float(v)) for v in r.delta], repr(r.value),
                            repr(r.best), f"{r.oracle_time:.6f}"])


def _initial_design(m: int, size: int, rng) -> np.ndarray:
    pts = list(np.eye(m))
    if size > m:
        pts.extend(rng.dirichlet(np.ones(m), size - m))
    return np.array(pts[:size])


def _fit(points: np.ndarray, values: np.ndarray):
    chart = points[:, :-1]
    try:
        return RBFInterpolator(chart, values, kernel="cubic", degree=1)
    except np.linalg.LinAlgError:
        return RBFInterpolator(chart, values, kernel="cubic", degree=1, smoothing=1e-10)


def blackbox_lfen(instance: LeaderFollowerInstance, config: Optional[BlackBoxConfig] = None):
    """Surrogate search over leader commitments; returns ``(solution, trace)``.

    The surrogate is fitted in the chart that drops the last coordinate of the
    simplex. Each candidate scores ``s - lam * (1 - d)`` where ``s`` is the
    surrogate rescaled to [0, 1] over the pool, ``d`` its distance to the
    nearest evaluated point rescaled likewise, and ``lam`` falls linearly from 1
    to 0 over the budget.
    """
    _need_two_followers(instance)
    config = config or BlackBoxConfig()
    m = instance.m_leader
    start = time.perf_counter()
    trace = BlackBoxTrace()
    rng = np.random.default_rng(config.seed)
    if m == 1:
        budget, queue = 1, [np.ones(1)]
    else:
        budget, init = config.resolved(m)
        queue = list(_initial_design(m, init, rng))
    best_val, best_out, best_delta = -math.inf, None, None
    evaluated, values = [], []
    it = 0

    def evaluate(delta):
        nonlocal best_val, best_out, best_delta
        t0 = time.perf_counter()
        try:
            out = oracle_value(instance, delta, config.mode, config.backend, config.oracle_config,
                               cross_check=False)
        except (LfenError, RuntimeError, ValueError) as exc:
            log.warning("oracle failed at %s: %s; point skipped", delta, exc)
            trace.skipped.append((it, delta, str(exc)))
            return
        evaluated.append(delta)
        values.append(out.value)
        if out.value > best_val:
            best_val, best_out, best_delta = out.value, out, delta
        trace.rows.append(TraceRow(it, delta, out.value, best_val, time.perf_counter() - t0,
                                   out.certified))

    while it < budget:
        if queue:
            delta = queue.pop(0)
        else:
            delta = _acquire(np.array(evaluated), np.array(values), it, budget, config, rng, m)
            if delta is None:
                break
        evaluate(delta)
        it += 1
    if best_out is None:
        raise LfenError("every oracle evaluation failed")
    sol = LfenSolution(best_delta, best_out.rhos, best_val, best_out.certified, 0.0, "blackbox",
                       "budget", best_val, math.inf, len(trace.rows), time.perf_counter() - start,
                       {"evaluations": len(trace.rows), "skipped": len(trace.skipped),
                        "mode": config.mode})
    return sol, trace


def _acquire(points, values, it, budget, config, rng, m):
    if len(points) < m:    # too few points for the linear tail
        return rng.dirichlet(np.ones(m))
    surrogate = _fit(points, values)
    pool = rng.dirichlet(np.ones(m), config.candidate_pool)
    pred = surrogate(pool[:, :-1])
    dist = np.min(np.linalg.norm(pool[:, None, :-1] - points[None, :, :-1], axis=2), axis=1)
    fresh = dist > 1e-9
    if not fresh.any():
        return None
    pool, pred, dist = pool[fresh], pred[fresh], dist[fresh]
    span = pred.max() - pred.min()
    s = (pred - pred.min()) / span if span > 0 else np.zeros_like(pred)
    d = dist / dist.max()
    lam = 1.0 - it / max(budget - 1, 1)
    return pool[int(np.argmax(s - lam * (1.0 - d)))]
