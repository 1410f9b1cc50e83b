"""McCormick linear relaxations of polynomial models over variable boxes.

Every monomial of degree two or more is factored, in sorted variable order, into
a chain of bilinear products ``w = a * b``; ``a`` may itself be an earlier
product. Identical products share one auxiliary column. Each product is replaced
by its four McCormick inequalities at the current box, which makes the envelope
exact whenever a factor sits at one of its bounds.

Optionally the relaxation is strengthened with reformulation-linearization
rows: a constraint multiplied by one variable (equalities) or by its bound
factors ``x - lo >= 0`` and ``hi - x >= 0`` (inequalities), kept only when every
resulting monomial already has a column.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..exceptions import ModelError
from ..model import Model
from .lp import LinearProgram

BOUND_MARGIN = 1e-10


@dataclass(frozen=True)
class Product:
    column: int
    a: int
    b: int
    level: int


class Relaxation:
    """Linearized view of ``model``: original columns first, then products."""

    def __init__(self, model: Model, rlt: bool = True):
        lo, hi = model.lower, model.upper
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            bad = [v.name for v in model.variables if not (np.isfinite(v.lower) and np.isfinite(v.upper))]
            raise ModelError(f"relaxation needs bounded variables; unbounded: {bad}")
        self.model = model
        self.n = model.num_vars
        self.products: list[Product] = []
        self._pair: dict = {}
        self._monomial: dict = {}
        self._level = [0] * self.n

        eq_rows, eq_rhs, ub_rows, ub_rhs = [], [], [], []
        self.row_tags = []
        for con in model.constraints:
            row = self._linearize(con.terms)
            if con.sense == "=":
                eq_rows.append(row)
                eq_rhs.append(con.rhs)
            elif con.sense == "<=":
                ub_rows.append(row)
                ub_rhs.append(con.rhs)
            else:
                ub_rows.append({k: -v for k, v in row.items()})
                ub_rhs.append(-con.rhs)
        obj = dict(model.objective)
        self.obj_const = obj.pop((), 0.0)
        obj_row = self._linearize(obj)

        rlt_eq, rlt_ub = self._rlt_rows(model) if rlt else ([], [])
        for row in rlt_eq:
            eq_rows.append(row)
            eq_rhs.append(0.0)
        self.ncols = self.n + len(self.products)
        self.A_eq = _to_csr(eq_rows, self.ncols)
        self.b_eq = np.array(eq_rhs, dtype=np.float64)
        # bound-factor rows: (x_k - lo_k) g >= 0 and (hi_k - x_k) g >= 0 with g = G z + g0
        self.rlt_var = np.array([k for k, _, _, _ in rlt_ub], dtype=np.intp)
        self.rlt_P = _to_csr([p for _, p, _, _ in rlt_ub], self.ncols)
        self.rlt_G = _to_csr([g for _, _, g, _ in rlt_ub], self.ncols)
        self.rlt_g0 = np.array([g0 for _, _, _, g0 in rlt_ub], dtype=np.float64)
        self.A_ub = _to_csr(ub_rows, self.ncols)
        self.b_ub = np.array(ub_rhs, dtype=np.float64)
        self.c = np.zeros(self.ncols)
        for col, coef in obj_row.items():
            self.c[col] += coef

        K = len(self.products)
        self.prod_col = np.array([p.column for p in self.products], dtype=np.intp)
        self.prod_a = np.array([p.a for p in self.products], dtype=np.intp)
        self.prod_b = np.array([p.b for p in self.products], dtype=np.intp)
        levels = np.array([p.level for p in self.products], dtype=np.intp)
        self._by_level = [np.flatnonzero(levels == lv) for lv in range(1, levels.max() + 1)] if K else []
        self.leaves = [self._leaves(p.column) for p in self.products]
        # FBBT works on <= rows: equalities appear twice
        self._fb_A = sp.vstack([self.A_ub, self.A_eq, -self.A_eq]).tocsr() if self.ncols else None
        self._fb_b = np.concatenate([self.b_ub, self.b_eq, -self.b_eq])
        self._fb_rows = np.repeat(np.arange(self._fb_A.shape[0]), np.diff(self._fb_A.indptr))

    # construction -------------------------------------------------------
    def _product(self, a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key in self._pair:
            return self._pair[key]
        col = self.n + len(self.products)
        level = 1 + max(self._level[a], self._level[b])
        self.products.append(Product(col, key[0], key[1], level))
        self._level.append(level)
        self._pair[key] = col
        return col

    def column(self, key: tuple) -> int:
        if len(key) == 1:
            return key[0]
        if key not in self._monomial:
            col = key[0]
            for f in key[1:]:
                col = self._product(col, f)
            self._monomial[key] = col
        return self._monomial[key]

    def _linearize(self, terms: dict) -> dict:
        row: dict = {}
        for key, coef in terms.items():
            if not key:
                raise ModelError("constant term inside a row")
            col = self.column(key)
            row[col] = row.get(col, 0.0) + coef
        return row

    def _rlt_rows(self, model: Model):
        """Products of rows with multipliers whose resulting monomials all have columns.

        Equalities are multiplied by any known monomial, inequalities by the
        bound factors of single variables.
        """
        known = set(self._monomial)
        known.update((j,) for j in range(self.n))
        for key in list(self._monomial):
            for t in range(2, len(key)):
                known.add(key[:t])
        multipliers = sorted(known, key=lambda k: (len(k), k))
        eq, ub = [], []
        for con in model.constraints:
            for mult in multipliers:
                if con.sense != "=" and len(mult) > 1:
                    break
                lifted = {tuple(sorted(key + mult)): c for key, c in con.terms.items()}
                if not all(key in known for key in lifted):
                    continue
                k = self.column(mult)
                if con.sense == "=":
                    # mult * (lhs - rhs) = 0
                    row = self._linearize(lifted)
                    if con.rhs != 0.0:
                        row[k] = row.get(k, 0.0) - con.rhs
                    eq.append(row)
                    continue
                sgn = 1.0 if con.sense == ">=" else -1.0
                P = self._linearize({key: sgn * c for key, c in lifted.items()})
                g0 = -sgn * con.rhs
                if g0 != 0.0:
                    P[k] = P.get(k, 0.0) + g0
                G = self._linearize({key: sgn * c for key, c in con.terms.items()})
                ub.append((k, P, G, g0))
        return eq, ub

    def _leaves(self, col: int) -> tuple:
        if col < self.n:
            return (col,)
        p = self.products[col - self.n]
        return tuple(sorted(set(self._leaves(p.a) + self._leaves(p.b))))

    @property
    def num_products(self) -> int:
        return len(self.products)

    def registry(self) -> dict:
        """Map ``(factor_a, factor_b)`` column pairs to their product column."""
        return dict(self._pair)

    def column_name(self, col: int) -> str:
        if col < self.n:
            return self.model.variables[col].name
        p = self.products[col - self.n]
        return f"({self.column_name(p.a)}*{self.column_name(p.b)})"

    # bounds -------------------------------------------------------------
    def extend_bounds(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interval bounds for every product column given original-variable bounds."""
        flo = np.empty(self.ncols)
        fhi = np.empty(self.ncols)
        flo[:self.n] = lo
        fhi[:self.n] = hi
        self.forward(flo, fhi, intersect=False)
        return flo, fhi

    def forward(self, flo, fhi, intersect=True):
        for idx in self._by_level:
            a, b, w = self.prod_a[idx], self.prod_b[idx], self.prod_col[idx]
            plo, phi = _interval_product(flo[a], fhi[a], flo[b], fhi[b], a == b)
            if intersect:
                flo[w] = np.maximum(flo[w], plo)
                fhi[w] = np.minimum(fhi[w], phi)
            else:
                flo[w], fhi[w] = plo, phi

    def tighten(self, flo: np.ndarray, fhi: np.ndarray, rounds: int = 3) -> bool:
        """Feasibility-based bound tightening in place; False if the box is empty."""
        A, b = self._fb_A, self._fb_b
        if A is None or A.shape[0] == 0:
            return True
        data, cols, rows = A.data, A.indices, self._fb_rows
        for _ in range(rounds):
            old_lo, old_hi = flo.copy(), fhi.copy()
            self.forward(flo, fhi)
            contrib_min = np.where(data > 0, data * flo[cols], data * fhi[cols])
            act = np.bincount(rows, weights=contrib_min, minlength=A.shape[0])
            slack = b[rows] - act[rows] + contrib_min
            bound = slack / data
            pos = data > 0
            if pos.any():
                np.minimum.at(fhi, cols[pos], bound[pos] + BOUND_MARGIN * (1.0 + np.abs(bound[pos])))
            if (~pos).any():
                np.maximum.at(flo, cols[~pos], bound[~pos] - BOUND_MARGIN * (1.0 + np.abs(bound[~pos])))
            self._reverse(flo, fhi)
            if np.any(flo > fhi + 1e-7):
                return False
            cross = flo > fhi
            if cross.any():
                mid = 0.5 * (flo[cross] + fhi[cross])
                flo[cross] = mid
                fhi[cross] = mid
            change = max(np.max(flo - old_lo, initial=0.0), np.max(old_hi - fhi, initial=0.0))
            if change < 1e-6:
                break
        return True

    def _reverse(self, flo, fhi):
        """Divide product bounds back onto nonnegative factors."""
        if not self.products:
            return
        a, b, w = self.prod_a, self.prod_b, self.prod_col
        ok = (flo[a] >= 0) & (flo[b] >= 0) & (flo[w] >= 0) & (a != b)
        for x, y in ((a, b), (b, a)):
            sel = ok & (flo[y] > 1e-9)
            if sel.any():
                cap = fhi[w[sel]] / flo[y[sel]]
                np.minimum.at(fhi, x[sel], cap + BOUND_MARGIN * (1.0 + np.abs(cap)))
            sel = ok & (fhi[y] > 1e-9)
            if sel.any():
                floor = flo[w[sel]] / fhi[y[sel]]
                np.maximum.at(flo, x[sel], floor - BOUND_MARGIN * (1.0 + np.abs(floor)))

    # LP -----------------------------------------------------------------
    def mccormick(self, flo: np.ndarray, fhi: np.ndarray):
        """Sparse ``G x <= h`` rows of all McCormick envelopes at the given box."""
        K = len(self.products)
        if K == 0:
            return sp.csr_matrix((0, self.ncols)), np.zeros(0)
        a, b, w = self.prod_a, self.prod_b, self.prod_col
        aL, aU, bL, bU = flo[a], fhi[a], flo[b], fhi[b]
        r = np.arange(K)
        rows = np.concatenate([r, r, r, K + r, K + r, K + r, 2 * K + r, 2 * K + r, 2 * K + r,
                               3 * K + r, 3 * K + r, 3 * K + r])
        cols = np.concatenate([b, a, w, b, a, w, b, a, w, b, a, w])
        one = np.ones(K)
        data = np.concatenate([aL, bL, -one, aU, bU, -one, -aU, -bL, one, -aL, -bU, one])
        rhs = np.concatenate([aL * bL, aU * bU, -aU * bL, -aL * bU])
        G = sp.csr_matrix((data, (rows, cols)), shape=(4 * K, self.ncols))
        return G, rhs

    def linear_program(self, flo: np.ndarray, fhi: np.ndarray, sign: float = 1.0) -> LinearProgram:
        """LP maximizing ``sign * objective`` over the relaxation (stated as a minimization)."""
        G, h = self.mccormick(flo, fhi)
        parts, rhs = [self.A_ub, G], [self.b_ub, h]
        if self.rlt_var.size:
            lo_k, hi_k = flo[self.rlt_var], fhi[self.rlt_var]
            parts.append(sp.diags(lo_k) @ self.rlt_G - self.rlt_P)
            rhs.append(-lo_k * self.rlt_g0)
            parts.append(self.rlt_P - sp.diags(hi_k) @ self.rlt_G)
            rhs.append(hi_k * self.rlt_g0)
        A_ub = sp.vstack(parts).tocsr()
        b_ub = np.concatenate(rhs)
        return LinearProgram(-sign * self.c, A_ub if A_ub.shape[0] else None,
                             b_ub if b_ub.size else None,
                             self.A_eq if self.A_eq.shape[0] else None,
                             self.b_eq if self.b_eq.size else None, flo.copy(), fhi.copy())

    def violations(self, x: np.ndarray) -> np.ndarray:
        """``|w - a*b|`` for every registered product at the point ``x``."""
        if not self.products:
            return np.zeros(0)
        return np.abs(x[self.prod_col] - x[self.prod_a] * x[self.prod_b])

    def lift(self, x_orig: np.ndarray) -> np.ndarray:
        """Extend an original-variable point with exact product values."""
        x = np.empty(self.ncols)
        x[:self.n] = x_orig
        for p in self.products:
            x[p.column] = x[p.a] * x[p.b]
        return x


def relax(model: Model, rlt: bool = True) -> Relaxation:
    return Relaxation(model, rlt)


def _interval_product(aL, aU, bL, bU, square):
    c = np.stack([aL * bL, aL * bU, aU * bL, aU * bU])
    lo, hi = c.min(axis=0), c.max(axis=0)
    if np.any(square):
        sq_lo = np.where((aL <= 0) & (aU >= 0), 0.0, np.minimum(aL * aL, aU * aU))
        lo = np.where(square, sq_lo, lo)
        hi = np.where(square, np.maximum(aL * aL, aU * aU), hi)
    return lo, hi


def _to_csr(rows: list, ncols: int) -> sp.csr_matrix:
    r, c, d = [], [], []
    for i, row in enumerate(rows):
        for col, coef in row.items():
            r.append(i)
            c.append(col)
            d.append(coef)
    return sp.csr_matrix((d, (r, c)), shape=(len(rows), ncols))
