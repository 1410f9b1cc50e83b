"""Solver configuration, result record, and the optimality-gap formulas."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..exceptions import InconsistentBoundsError

GAP_CAP = 1e5

OPTIMAL = "optimal"
GAP_LIMIT = "gap_limit"
TIME_LIMIT = "time_limit"
NODE_LIMIT = "node_limit"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MEMORY = "memory"


def compute_gaps(lb: float, ub: float, tol: float = 1e-9) -> tuple[float, float]:
    """Return ``(mult_gap, add_gap)``.

    ``mult_gap`` is ``min((UB - LB) / LB * 100, 1e5)`` in percent and is
    clamped to ``1e5`` whenever ``LB <= 0``; ``add_gap`` is ``UB - LB``.
    """
    if ub < lb - tol:
        raise InconsistentBoundsError(f"UB {ub!r} < LB {lb!r}")
    add = max(ub - lb, 0.0) if math.isfinite(ub - lb) else math.inf
    if not lb > 0 or not math.isfinite(lb):
        return GAP_CAP, add
    return min(add / lb * 100.0, GAP_CAP), add


@dataclass
class SolveConfig:
    rel_gap_tol: float = 1e-6
    abs_gap_tol: float = 1e-9
    time_limit: float = math.inf
    node_limit: int = 1_000_000
    memory_cap: int = 200_000          # open nodes
    branching: str = "most-violated-product"
    node_order: str = "best-first"
    lp_backend: str = "highs"
    feas_tol: float = 1e-7
    hook_every: int = 16
    rlt: bool = True                   # bound-factor product rows in the relaxation
    accept_lp_points: bool = False     # with a hook, take incumbents from the hook only
    node_log: Optional[Callable] = None

    def __post_init__(self):
        if not self.rel_gap_tol > 0:
            raise ValueError("rel_gap_tol must be positive")
        if self.branching not in ("most-violated-product", "pseudo-cost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_order != "best-first":
            raise ValueError("only best-first node order is supported")


@dataclass
class SolveResult:
    status: str
    x: Optional[np.ndarray]
    objective: float
    lower_bound: float
    upper_bound: float
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    names: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def mult_gap(self) -> float:
        return compute_gaps(self.lower_bound, self.upper_bound)[0]

    @property
    def add_gap(self) -> float:
        return compute_gaps(self.lower_bound, self.upper_bound)[1]

    @property
    def assignment(self) -> dict:
        if self.x is None:
            return {}
        return dict(zip(self.names, (float(v) for v in self.x)))

    @property
    def has_solution(self) -> bool:
        return self.x is not None
