"""Linear programming: a dense two-phase simplex and a HiGHS-backed path.

Both backends consume the same :class:`LinearProgram` (minimization form).
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..exceptions import ModelError
from ..model import Model
from .result import INFEASIBLE, OPTIMAL, UNBOUNDED, SolveResult

PIVOT_TOL = 1e-11
OPT_TOL = 1e-9


@dataclass
class LinearProgram:
    """``min c @ x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lo <= x <= hi``."""

    c: np.ndarray
    A_ub: object = None
    b_ub: object = None
    A_eq: object = None
    b_eq: object = None
    lo: object = None
    hi: object = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        n = self.c.shape[0]
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=np.float64)
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=np.float64)

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]


@dataclass
class LpResult:
    status: str
    x: Optional[np.ndarray]
    objective: float
    iterations: int = 0


def _dense(a, n):
    if a is None:
        return np.zeros((0, n))
    if sp.issparse(a):
        return a.toarray()
    return np.atleast_2d(np.asarray(a, dtype=np.float64)).reshape(-1, n)


def _vec(b):
    return np.zeros(0) if b is None else np.asarray(b, dtype=np.float64).ravel()


class _Tableau:
    """Dense simplex tableau; last row holds reduced costs, last column the rhs."""

    def __init__(self, T, basis):
        self.T = T
        self.basis = basis
        self.iterations = 0

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed, max_iter=50_000):
        """Bland's rule: lowest-index improving column, lowest-index leaving basic."""
        T = self.T
        while self.iterations < max_iter:
            cost = T[-1, :-1]
            cand = np.flatnonzero((cost < -OPT_TOL) & allowed)
            if cand.size == 0:
                return OPTIMAL
            j = cand[0]
            col = T[:-1, j]
            pos = col > PIVOT_TOL
            if not pos.any():
                return UNBOUNDED
            ratios = np.full(col.shape, np.inf)
            ratios[pos] = T[:-1, -1][pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            r = ties[np.argmin(np.asarray(self.basis)[ties])]
            self.pivot(r, j)
        raise RuntimeError("simplex iteration limit reached")


def simplex(lp: LinearProgram) -> LpResult:
    """Two-phase dense tableau simplex with Bland's anti-cycling rule."""
    n = lp.num_vars
    A_ub, b_ub = _dense(lp.A_ub, n), _vec(lp.b_ub)
    A_eq, b_eq = _dense(lp.A_eq, n), _vec(lp.b_eq)
    lo, hi = lp.lo, lp.hi
    if np.any(lo > hi + 1e-12):
        return LpResult(INFEASIBLE, None, np.nan)

    # x = shift + T @ x', x' >= 0
    cols, shift = [], np.zeros(n)
    upper_rows = []
    for j in range(n):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                upper_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            shift[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    k = len(cols)
    Tmap = np.zeros((n, k))
    for c_idx, (j, s) in enumerate(cols):
        Tmap[j, c_idx] = s

    rows_ub = [A_ub @ Tmap] if A_ub.shape[0] else []
    rhs_ub = [b_ub - A_ub @ shift] if A_ub.shape[0] else []
    if upper_rows:
        U = np.zeros((len(upper_rows), k))
        for r, (c_idx, width) in enumerate(upper_rows):
            U[r, c_idx] = 1.0
        rows_ub.append(U)
        rhs_ub.append(np.array([w for _, w in upper_rows]))
    G = np.vstack(rows_ub) if rows_ub else np.zeros((0, k))
    g = np.concatenate(rhs_ub) if rhs_ub else np.zeros(0)
    E = A_eq @ Tmap
    e = b_eq - A_eq @ shift
    cost = Tmap.T @ lp.c

    m_ub, m_eq = G.shape[0], E.shape[0]
    m = m_ub + m_eq
    # columns: structural k | slacks m_ub | artificials m
    A = np.zeros((m, k + m_ub))
    A[:m_ub, :k] = G
    A[:m_ub, k:] = np.eye(m_ub)
    A[m_ub:, :k] = E
    b = np.concatenate([g, e])
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    basis = [-1] * m
    need_art = []
    for r in range(m):
        if r < m_ub and not neg[r]:
            basis[r] = k + r
        else:
            need_art.append(r)
    n_art = len(need_art)
    width = k + m_ub + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :k + m_ub] = A
    T[:m, -1] = b
    for a, r in enumerate(need_art):
        T[r, k + m_ub + a] = 1.0
        basis[r] = k + m_ub + a
    tab = _Tableau(T, basis)

    if n_art:
        T[-1, :] = 0.0
        T[-1, k + m_ub:width] = 1.0
        for r in need_art:
            T[-1] -= T[r]
        tab.run(np.ones(width, dtype=bool))
        if -T[-1, -1] > 1e-8 * max(1.0, np.abs(b).max(initial=0.0)):
            return LpResult(INFEASIBLE, None, np.nan, tab.iterations)
        # drive artificials out of the basis, dropping redundant rows
        keep = []
        for r in range(m):
            if tab.basis[r] >= k + m_ub:
                row = T[r, :k + m_ub]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size:
                    tab.pivot(r, nz[0])
                    keep.append(r)
            else:
                keep.append(r)
        T = np.vstack([T[keep][:, list(range(k + m_ub)) + [width]], np.zeros((1, k + m_ub + 1))])
        tab = _Tableau(T, [tab.basis[r] for r in keep])
        tab.iterations = 0
        m = len(keep)
    else:
        T = tab.T

    width2 = k + m_ub
    T[-1, :] = 0.0
    T[-1, :k] = cost
    for r, j in enumerate(tab.basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status = tab.run(np.ones(width2, dtype=bool))
    iters = tab.iterations
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, None, -np.inf, iters)
    if np.any(T[-1, :width2] < -OPT_TOL):
        raise RuntimeError("simplex exit without dual feasibility")
    xs = np.zeros(width2)
    for r, j in enumerate(tab.basis):
        xs[j] = T[r, -1]
    x = shift + Tmap @ xs[:k]
    return LpResult(OPTIMAL, x, float(lp.c @ x), iters)


HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}


def _linprog(lp, bounds, options):
    return linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq,
                   bounds=bounds, method="highs", options=options)


def highs(lp: LinearProgram) -> LpResult:
    bounds = np.column_stack([lp.lo, lp.hi])
    res = _linprog(lp, bounds, HIGHS_OPTIONS)
    if res.status != 0:
        # tight tolerances occasionally confuse the status; confirm without presolve
        res = _linprog(lp, bounds, {"presolve": False})
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        return LpResult(OPTIMAL, res.x, float(res.fun), iters)
    if res.status in (2, 3):
        if res.status == 3 and np.all(np.isfinite(bounds)):
            raise RuntimeError("HiGHS reports a bounded LP as unbounded")
        # presolve may report "infeasible or unbounded"; settle with a zero objective
        probe = linprog(np.zeros_like(lp.c), A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq,
                        b_eq=lp.b_eq, bounds=bounds, method="highs")
        if probe.status == 0:
            if np.all(np.isfinite(bounds)):
                raise RuntimeError("HiGHS status inconsistent with a feasible bounded LP")
            return LpResult(UNBOUNDED, None, -np.inf, iters)
        return LpResult(INFEASIBLE, None, np.nan, iters)
    raise RuntimeError(f"HiGHS failed: {res.message}")


BACKENDS = {"simplex": simplex, "highs": highs}


def solve_lp_arrays(lp: LinearProgram, backend: str = "highs") -> LpResult:
    """Solve with ``backend``; a HiGHS failure falls back to the dense simplex."""
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}") from None
    try:
        return fn(lp)
    except RuntimeError:
        if fn is simplex:
            raise
        return simplex(lp)


def model_to_lp(model: Model) -> tuple[LinearProgram, float]:
    """Minimization-form arrays of a continuous linear model, plus the objective sign."""
    if model.degree > 1:
        raise ModelError("solve_lp needs a linear model")
    if model.binaries:
        raise ModelError("solve_lp needs a continuous model")
    n = model.num_vars
    sign = -1.0 if model.direction == "max" else 1.0
    c = np.zeros(n)
    for key, coef in model.objective.items():
        if key:
            c[key[0]] += sign * coef
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for con in model.constraints:
        row = np.zeros(n)
        for key, coef in con.terms.items():
            row[key[0]] += coef
        if con.sense == "=":
            eq_rows.append(row)
            eq_rhs.append(con.rhs)
        elif con.sense == "<=":
            ub_rows.append(row)
            ub_rhs.append(con.rhs)
        else:
            ub_rows.append(-row)
            ub_rhs.append(-con.rhs)
    lp = LinearProgram(
        c,
        np.array(ub_rows) if ub_rows else None, np.array(ub_rhs) if ub_rhs else None,
        np.array(eq_rows) if eq_rows else None, np.array(eq_rhs) if eq_rhs else None,
        model.lower, model.upper,
    )
    return lp, sign


def solve_lp(model: Model, backend: str = "simplex") -> SolveResult:
    """Solve a continuous linear model exactly; objective reported in the model's sense."""
    start = time.perf_counter()
    lp, sign = model_to_lp(model)
    const = model.objective.get((), 0.0)
    res = solve_lp_arrays(lp, backend)
    elapsed = time.perf_counter() - start
    if res.status != OPTIMAL:
        bad = -np.inf if model.direction == "max" else np.inf
        return SolveResult(res.status, None, bad, -np.inf, np.inf, 1, res.iterations, elapsed,
                           model.names)
    value = sign * res.objective + const
    return SolveResult(OPTIMAL, res.x, value, value, value, 1, res.iterations, elapsed, model.names)
