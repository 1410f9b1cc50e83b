"""Best-first branch-and-bound over McCormick relaxations.

One engine serves both entry points. :func:`solve_milp` only branches on
binaries, which is exact when every product in the model has a binary factor.
:func:`solve_spatial` additionally splits continuous domains of the product
with the largest violation ``|w - a*b|``.
"""
from __future__ import annotations

import csv
import heapq
import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from ..exceptions import ModelError
from ..model import Model
from .lp import solve_lp_arrays
from .relax import Relaxation
from .result import (GAP_LIMIT, INFEASIBLE, MEMORY, NODE_LIMIT, OPTIMAL, TIME_LIMIT, SolveConfig,
                     SolveResult, compute_gaps)

INT_TOL = 1e-6
PRODUCT_TOL = 1e-9
MIN_WIDTH = 1e-9
CLAMP = 0.2

IncumbentHook = Callable[[np.ndarray, np.ndarray, np.ndarray], Iterable[np.ndarray]]


@dataclass
class _Node:
    lo: np.ndarray
    hi: np.ndarray
    bound: float
    depth: int
    ident: int
    branch: int = -1


class NodeLog:
    """CSV writer for the node trace: id, depth, LB, UB, gap, branch variable."""

    header = ("node", "depth", "lb", "ub", "mult_gap", "branch")

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(self.header)

    def __call__(self, node, depth, lb, ub, gap, branch):
        self._w.writerow((node, depth, repr(lb), repr(ub), repr(gap), branch))

    def close(self):
        self._fh.close()


class _Search:
    def __init__(self, model: Model, config: SolveConfig, hook: Optional[IncumbentHook],
                 binaries_only: bool):
        self.model = model
        self.cfg = config
        self.hook = hook
        self.binaries_only = binaries_only
        self.rel = Relaxation(model, config.rlt)
        self.n = model.num_vars
        self.sign = 1.0 if model.direction == "max" else -1.0
        self.bin = np.array(model.binaries, dtype=np.intp)
        self.is_bin = np.zeros(self.n, dtype=bool)
        self.is_bin[self.bin] = True
        self.root_lo, self.root_hi = model.lower, model.upper
        self.width0 = np.maximum(self.root_hi - self.root_lo, MIN_WIDTH)
        self.inc_x: Optional[np.ndarray] = None
        self.inc_val = -math.inf
        self.ub = math.inf
        self.unresolved = -math.inf
        self.nodes = 0
        self.lp_iters = 0
        self.counter = itertools.count()
        self.pseudo = np.ones(self.n)
        self.pseudo_n = np.zeros(self.n)
        self.definitions = _definitions(model)
        if binaries_only:
            for p in self.rel.products:
                if not (self._has_binary_leaf(p.a) or self._has_binary_leaf(p.b)):
                    raise ModelError("solve_milp needs every product to have a binary factor; "
                                     "use solve_spatial")

    def _has_binary_leaf(self, col):
        return col < self.n and self.is_bin[col]

    # incumbents ---------------------------------------------------------
    def repair(self, x: np.ndarray) -> np.ndarray:
        """Recompute variables fixed by product-definition rows ``t = poly``."""
        x = x.copy()
        for _ in range(3):
            for t, coef, rest, rhs in self.definitions:
                x[t] = (rhs - sum(c * np.prod(x[list(key)]) for key, c in rest)) / coef
        return x

    def offer(self, x: np.ndarray, repair: bool = False) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if repair and self.definitions:
            if self.offer(self.repair(x)):
                return True
        if self.bin.size:
            x = x.copy()
            x[self.bin] = np.round(x[self.bin])
        x = np.clip(x, self.root_lo, self.root_hi)
        ev = self.model.evaluate(x)
        if ev.max_violation > self.cfg.feas_tol:
            return False
        val = self.sign * ev.objective
        if val > self.inc_val:
            self.inc_val, self.inc_x = val, x
            return True
        return False

    def tol(self) -> float:
        if not math.isfinite(self.inc_val):
            return self.cfg.abs_gap_tol
        return max(self.cfg.abs_gap_tol, self.cfg.rel_gap_tol * abs(self.inc_val))

    # node processing ----------------------------------------------------
    def bounds(self, node: _Node):
        flo, fhi = self.rel.extend_bounds(node.lo, node.hi)
        if not self.rel.tighten(flo, fhi):
            return None
        if self.bin.size:
            flo[self.bin] = np.ceil(flo[self.bin] - INT_TOL)
            fhi[self.bin] = np.floor(fhi[self.bin] + INT_TOL)
            if np.any(flo[self.bin] > fhi[self.bin]):
                return None
            self.rel.forward(flo, fhi)
        return flo, fhi

    def choose(self, x, flo, fhi, threshold=PRODUCT_TOL):
        """Return ``(variable, value, label)`` to split on, or None when nothing is violated."""
        if self.bin.size:
            frac = np.abs(x[self.bin] - np.round(x[self.bin]))
            frac = np.where(fhi[self.bin] > flo[self.bin], frac, 0.0)
            if frac.max() > INT_TOL:
                k = int(np.argmin(np.where(frac > INT_TOL, np.abs(frac - 0.5), np.inf)))
                j = int(self.bin[k])
                return j, x[j], "binary"
        if self.binaries_only or not self.rel.products:
            return None
        viol = self.rel.violations(x)
        scale = 1.0 + np.abs(x[self.rel.prod_col])
        order = np.argsort(-viol, kind="stable")
        for rank, k in enumerate(order):
            if viol[k] <= threshold * scale[k]:
                break
            leaves = [j for j in self.rel.leaves[k] if not self.is_bin[j] or fhi[j] > flo[j]]
            widths = np.array([(fhi[j] - flo[j]) / self.width0[j] for j in leaves])
            if self.cfg.branching == "pseudo-cost":
                widths = widths * np.array([self.pseudo[j] for j in leaves])
            if widths.size == 0 or widths.max() <= MIN_WIDTH:
                continue
            j = leaves[int(np.argmax(widths))]
            return j, x[j], "product"
        return None

    def split(self, node: _Node, flo, fhi, j, value, bound):
        lo, hi = flo[:self.n].copy(), fhi[:self.n].copy()
        if self.is_bin[j]:
            left_hi, right_lo = 0.0, 1.0
        else:
            w = hi[j] - lo[j]
            point = min(max(value, lo[j] + CLAMP * w), hi[j] - CLAMP * w)
            left_hi = right_lo = point
        kids = []
        for side in (0, 1):
            clo, chi = lo.copy(), hi.copy()
            if side == 0:
                chi[j] = left_hi
            else:
                clo[j] = right_lo
            kids.append(_Node(clo, chi, bound, node.depth + 1, next(self.counter), j))
        return kids

    def run(self) -> SolveResult:
        cfg = self.cfg
        start = time.perf_counter()
        log = cfg.node_log
        heap: list = []
        root = _Node(self.root_lo.copy(), self.root_hi.copy(), math.inf, 0, next(self.counter))
        heapq.heappush(heap, (-root.bound, root.ident, root))
        status = None
        while heap:
            if time.perf_counter() - start > cfg.time_limit:
                status = TIME_LIMIT
                break
            if self.nodes >= cfg.node_limit:
                status = NODE_LIMIT
                break
            if len(heap) > cfg.memory_cap:
                status = MEMORY
                break
            neg, _, node = heapq.heappop(heap)
            self.ub = min(self.ub, max(-neg, self.unresolved, self.inc_val))
            if self.ub - self.inc_val <= self.tol():
                heapq.heappush(heap, (neg, node.ident, node))
                status = OPTIMAL
                break
            if node.bound <= self.inc_val + self.tol():
                continue
            self.nodes += 1
            box = self.bounds(node)
            if box is None:
                continue
            flo, fhi = box
            lp = self.rel.linear_program(flo, fhi, self.sign)
            try:
                res = solve_lp_arrays(lp, cfg.lp_backend)
            except RuntimeError:
                # no trustworthy bound for this box: keep its parent bound
                self.unresolved = max(self.unresolved, node.bound)
                continue
            self.lp_iters += res.iterations
            if res.status == INFEASIBLE:
                continue
            if res.status != OPTIMAL:
                self.unresolved = max(self.unresolved, node.bound)
                continue
            bound = min(-res.objective + self.sign * self.rel.obj_const, node.bound)
            if node.branch >= 0 and math.isfinite(node.bound):
                j0 = node.branch
                self.pseudo_n[j0] += 1
                self.pseudo[j0] += (max(node.bound - bound, 0.0) - self.pseudo[j0]) / self.pseudo_n[j0]
            x = res.x
            if node.depth == 0 or self.hook is not None and self.nodes % cfg.hook_every == 1:
                if self.hook is not None:
                    for cand in self.hook(x[:self.n], flo[:self.n], fhi[:self.n]):
                        self.offer(cand)
            if bound <= self.inc_val + self.tol():
                continue
            pick = self.choose(x, flo, fhi)
            if pick is None:
                # exact points from the hook first; the raw LP point only as a last resort
                if self.hook is not None:
                    for cand in self.hook(x[:self.n], flo[:self.n], fhi[:self.n]):
                        self.offer(cand)
                raw_ok = self.hook is None or self.cfg.accept_lp_points
                if self.inc_val < bound - self.tol() and not (raw_ok and self.offer(x[:self.n], repair=True)):
                    # tiny product errors can still break feasibility: keep splitting while possible
                    pick = self.choose(x, flo, fhi, threshold=0.0)
                    if pick is None:
                        self.unresolved = max(self.unresolved, bound)
                if pick is None:
                    continue
            j, value, _ = pick
            for kid in self.split(node, flo, fhi, j, value, bound):
                heapq.heappush(heap, (-kid.bound, kid.ident, kid))
            if log is not None:
                lb_m, ub_m = self._report(max(bound, -heap[0][0]))
                log(node.ident, node.depth, lb_m, ub_m, compute_gaps(*_ordered(lb_m, ub_m))[0],
                    self.model.variables[j].name)
        if status is None:
            if self.unresolved > self.inc_val + self.tol():
                self.ub = self.unresolved
                status = GAP_LIMIT
            else:
                self.ub = self.inc_val
                status = OPTIMAL if self.inc_x is not None else INFEASIBLE
        elif status != OPTIMAL:
            open_bound = max((-h[0] for h in heap), default=-math.inf)
            self.ub = min(self.ub, max(open_bound, self.unresolved, self.inc_val))
        elapsed = time.perf_counter() - start
        lb, ub = self._report(self.ub)
        obj = self.sign * self.inc_val if self.inc_x is not None else math.nan
        return SolveResult(status, self.inc_x, obj, lb, ub, self.nodes, self.lp_iters, elapsed,
                           self.model.names)

    def _report(self, internal_ub):
        """Model-sense (LB, UB) from the internal maximization record."""
        if self.sign > 0:
            return self.inc_val, internal_ub
        return -internal_ub, -self.inc_val


def _definitions(model: Model) -> list:
    """Equality rows read as ``t = rest``, one defined variable per row.

    ``t`` is the continuous linear variable of the row with the fewest
    occurrences in the model, so auxiliaries (products, utilities, regrets)
    are defined in terms of the strategies rather than the other way round.
    """
    count = np.zeros(model.num_vars, dtype=np.intp)
    for con in model.constraints:
        for j in {j for key in con.terms for j in key}:
            count[j] += 1
    out, taken = [], set()
    for con in model.constraints:
        if con.sense != "=":
            continue
        nonlinear = {j for key in con.terms if len(key) > 1 for j in key}
        linear = [(key[0], c) for key, c in con.terms.items() if len(key) == 1
                  and key[0] not in taken and key[0] not in nonlinear
                  and model.variables[key[0]].kind == "continuous"]
        if not linear:
            continue
        t, coef = min(linear, key=lambda tc: (count[tc[0]], tc[0]))
        taken.add(t)
        rest = [(key, c) for key, c in con.terms.items() if key != (t,)]
        out.append((t, coef, rest, con.rhs))
    return out


def _ordered(lb, ub):
    return (lb, ub) if ub >= lb else (lb, lb)


def solve_spatial(model: Model, config: Optional[SolveConfig] = None,
                  incumbent_hook: Optional[IncumbentHook] = None) -> SolveResult:
    """Global optimum of a bounded polynomial model by spatial branch-and-bound.

    ``incumbent_hook(x_lp, lo, hi)`` receives the relaxation point (original
    variables) and node box and may return candidate points; each is accepted
    only if it passes ``model.evaluate`` within ``config.feas_tol``.
    """
    return _Search(model, config or SolveConfig(), incumbent_hook, binaries_only=False).run()


def solve_milp(model: Model, config: Optional[SolveConfig] = None,
               incumbent_hook: Optional[IncumbentHook] = None) -> SolveResult:
    """Best-first branch-and-bound on LP relaxations, branching on the most fractional binary.

    Products of a binary with a bounded variable are linearized by their
    McCormick envelope, which is exact at integral values.
    """
    if model.constraint_degree > 2 or model.objective_degree > 2:
        raise ModelError("solve_milp handles at most products of a binary and one other variable")
    return _Search(model, config or SolveConfig(), incumbent_hook, binaries_only=True).run()
