"""Brute-force equilibrium oracles used to certify the optimization results.

Support enumeration on the induced bimatrix game, best/worst equilibrium for
the leader at a fixed commitment, correlated-equilibrium bounds, a leader grid
search, and the two pure-strategy procedures (pure leader and followers; mixed
leader against pure followers).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import games as gc
from .exceptions import ResourceError, UnsupportedError
from .games import LeaderFollowerInstance
from .solvers.lp import LinearProgram, solve_lp_arrays
from .solvers.result import OPTIMAL
from .validation import check_strategy

ENUM_CAP = 8
DEDUP_TOL = 1e-7
RANK_TOL = 1e-10
PERTURB = 1e-6
OPTIMISTIC = "optimistic"
PESSIMISTIC = "pessimistic"


@dataclass
class NeRecord:
    supports: tuple            # (S1, S2) as sorted tuples of actions
    rhos: tuple                # (rho_1, rho_2)
    values: tuple              # follower values (v_1, v_2)
    leader_value: float = float("nan")


def _subsets(m: int):
    for size in range(1, m + 1):
        yield from itertools.combinations(range(m), size)


_NEEDS_LP = object()


def _side(M: np.ndarray, rows: tuple, cols: tuple, tol: float):
    """Opponent strategy on ``cols`` making the owner of ``rows`` indifferent on them.

    ``M[j, k]`` is the owner's payoff for own action ``j`` against ``k``.
    Returns ``(strategy, value)``, None when no such strategy exists, or
    ``_NEEDS_LP`` when the indifference system has a continuum of solutions.
    """
    r, c = len(rows), len(cols)
    sub = M[np.ix_(rows, cols)]
    system = np.zeros((r + 1, c + 1))
    system[:r, :c] = sub
    system[:r, c] = -1.0
    system[r, :c] = 1.0
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    U, S, Vt = np.linalg.svd(system, full_matrices=False)
    cut = RANK_TOL * (1.0 + np.abs(sub).max()) * max(system.shape)
    if S.size < c + 1 or S[-1] <= cut:
        return _NEEDS_LP
    sol = Vt.T @ ((U.T @ rhs) / S)
    if np.abs(system @ sol - rhs).max() > tol:
        return None
    x, value = sol[:c], sol[c]
    if x.min() < -tol:
        return None
    return _finish(M, rows, cols, x, value, tol)


def _finish(M, rows, cols, x, value, tol):
    others = [j for j in range(M.shape[0]) if j not in rows]
    if others and (M[np.ix_(others, cols)] @ x).max() > value + tol:
        return None
    full = np.zeros(M.shape[1])
    full[list(cols)] = np.clip(x, 0.0, None)
    full /= full.sum()
    return full, float(value)


def _side_lp(M, rows, cols, rng, lp_backend):
    """Degenerate case: a point of the indifference polytope maximizing its smallest
    probability, with a seeded random perturbation to pick among ties."""
    c = len(cols)
    others = [j for j in range(M.shape[0]) if j not in rows]
    # variables: x (c), value (1, free), t = min probability (1)
    A_eq = np.hstack([M[np.ix_(rows, cols)], -np.ones((len(rows), 1)), np.zeros((len(rows), 1))])
    A_eq = np.vstack([A_eq, np.append(np.ones(c), [0.0, 0.0])])
    b_eq = np.append(np.zeros(len(rows)), 1.0)
    ub = [np.hstack([-np.eye(c), np.zeros((c, 1)), np.ones((c, 1))])]
    b_ub = [np.zeros(c)]
    if others:
        ub.append(np.hstack([M[np.ix_(others, cols)], -np.ones((len(others), 1)),
                             np.zeros((len(others), 1))]))
        b_ub.append(np.zeros(len(others)))
    lo = np.append(np.zeros(c), [-np.inf, 0.0])
    hi = np.append(np.ones(c), [np.inf, 1.0])
    obj = np.append(PERTURB * rng.uniform(-1.0, 1.0, c), [0.0, -1.0])
    res = solve_lp_arrays(LinearProgram(obj, np.vstack(ub), np.concatenate(b_ub), A_eq, b_eq,
                                        lo, hi), lp_backend)
    if res.status != OPTIMAL:
        return None
    return _finish(M, rows, cols, res.x[:c], res.x[c], 1e-7 * (1.0 + np.abs(M).max()))


def enumerate_nes(A, B, cap: int = ENUM_CAP, seed: int = 0, lp_backend: str = "highs") -> list:
    """All Nash equilibria of the bimatrix game ``(A, B)`` found by support enumeration.

    One equilibrium per feasible support pair; degenerate pairs use an LP that
    keeps every support probability as large as possible. Results are
    deduplicated at ``1e-7`` and kept in support order (size, then
    lexicographic).
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape or A.ndim != 2:
        raise ValueError("A and B must be matrices of equal shape")
    m1, m2 = A.shape
    if max(m1, m2) > cap:
        raise ResourceError(f"support enumeration capped at {cap} actions per follower, got {A.shape}")
    rng = np.random.default_rng(seed)
    tol = 1e-9 * (1.0 + max(np.abs(A).max(), np.abs(B).max()))
    found: list[NeRecord] = []
    Bt = B.T
    for s1 in _subsets(m1):
        for s2 in _subsets(m2):
            p2 = _side(A, s1, s2, tol)
            if p2 is None:
                continue
            p1 = _side(Bt, s2, s1, tol)
            if p1 is None:
                continue
            if p2 is _NEEDS_LP:
                p2 = _side_lp(A, s1, s2, rng, lp_backend)
                if p2 is None:
                    continue
            if p1 is _NEEDS_LP:
                p1 = _side_lp(Bt, s2, s1, rng, lp_backend)
                if p1 is None:
                    continue
            rho1, v2 = p1
            rho2, v1 = p2
            if any(np.abs(rec.rhos[0] - rho1).max() <= DEDUP_TOL and
                   np.abs(rec.rhos[1] - rho2).max() <= DEDUP_TOL for rec in found):
                continue
            found.append(NeRecord((s1, s2), (rho1, rho2), (v1, v2)))
    return found


def snap_equilibrium(A, B, rho1, rho2, support_tol: float = 1e-7):
    """Exact equilibrium on the supports of an approximate one, or None.

    Actions with probability above ``support_tol`` form the supports; the
    indifference systems are solved by linear algebra and the result is
    accepted only if it is an equilibrium to ``1e-9`` relative accuracy.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    s1 = tuple(int(j) for j in np.flatnonzero(np.asarray(rho1) > support_tol))
    s2 = tuple(int(k) for k in np.flatnonzero(np.asarray(rho2) > support_tol))
    if not s1 or not s2:
        return None
    tol = 1e-9 * (1.0 + max(np.abs(A).max(), np.abs(B).max()))
    p2 = _side(A, s1, s2, tol)
    p1 = _side(B.T, s2, s1, tol)
    if p1 is None or p2 is None or p1 is _NEEDS_LP or p2 is _NEEDS_LP:
        return None
    return p1[0], p2[0]


def _check_mode(mode):
    if mode not in (OPTIMISTIC, PESSIMISTIC):
        raise ValueError(f"unknown mode {mode!r}")


def equilibria_at(instance: LeaderFollowerInstance, delta, cap: int = ENUM_CAP, seed: int = 0) -> list:
    """Follower equilibria at ``delta`` with leader values filled in."""
    delta = check_strategy(delta, instance.m_leader, name="delta")
    A, B = gc.induced_follower_game(instance, delta)
    L = gc.leader_matrix(instance, delta)
    recs = enumerate_nes(A, B, cap, seed)
    for rec in recs:
        rec.leader_value = float(rec.rhos[0] @ L @ rec.rhos[1])
    return recs


def best_worst_ne_for_leader(instance: LeaderFollowerInstance, delta, mode: str = OPTIMISTIC,
                             cap: int = ENUM_CAP, seed: int = 0) -> NeRecord:
    """Equilibrium maximizing (optimistic) or minimizing (pessimistic) the leader's utility.

    Ties go to the first equilibrium in support order.
    """
    _check_mode(mode)
    recs = equilibria_at(instance, delta, cap, seed)
    sign = 1.0 if mode == OPTIMISTIC else -1.0
    best = recs[0]
    for rec in recs[1:]:
        if sign * rec.leader_value > sign * best.leader_value:
            best = rec
    return best


def best_ce_for_leader(instance: LeaderFollowerInstance, leader_action: int,
                       lp_backend: str = "highs") -> float:
    """Leader-optimal correlated equilibrium of the followers at the pure commitment ``e_i``.

    Upper-bounds the optimistic equilibrium value at ``e_i``.
    """
    if len(instance.followers) != 2:
        raise UnsupportedError("correlated bound needs exactly two followers")
    if not 0 <= leader_action < instance.m_leader:
        raise IndexError(f"leader action {leader_action} out of range")
    delta = gc.pure_strategy(instance.m_leader, leader_action)
    A, B = gc.induced_follower_game(instance, delta)
    L = gc.leader_matrix(instance, delta)
    m1, m2 = A.shape
    rows = []
    # p is indexed p[j * m2 + k]; each row encodes "deviating is not profitable" as <= 0
    for j in range(m1):
        for jp in range(m1):
            if jp != j:
                row = np.zeros((m1, m2))
                row[j] = A[jp] - A[j]
                rows.append(row.ravel())
    for k in range(m2):
        for kp in range(m2):
            if kp != k:
                row = np.zeros((m1, m2))
                row[:, k] = B[:, kp] - B[:, k]
                rows.append(row.ravel())
    A_ub = sp.csr_matrix(np.array(rows)) if rows else None
    b_ub = np.zeros(len(rows)) if rows else None
    lp = LinearProgram(-L.ravel(), A_ub, b_ub, np.ones((1, m1 * m2)), np.ones(1),
                       np.zeros(m1 * m2), np.ones(m1 * m2))
    res = solve_lp_arrays(lp, lp_backend)
    if res.status != OPTIMAL:
        raise RuntimeError(f"correlated-equilibrium LP ended with status {res.status}")
    return float(-res.objective)


@dataclass
class GridResult:
    delta: np.ndarray
    value: float
    record: NeRecord
    points: int


def simplex_lattice(m: int, divisions: int):
    """Points of the simplex with coordinates in multiples of ``1/divisions``, lexicographic."""
    for cuts in itertools.combinations(range(divisions + m - 1), m - 1):
        parts, prev = [], -1
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(divisions + m - 2 - prev)
        yield np.array(parts, dtype=np.float64) / divisions


def grid_search_lmfm(instance: LeaderFollowerInstance, step: float = 0.05, mode: str = OPTIMISTIC,
                     max_leader_actions: int = 4) -> GridResult:
    """Best leader commitment on the simplex lattice of spacing ``step``.

    In optimistic mode the value is an achievable, hence lower, bound on the
    leader-mixed optimum.
    """
    _check_mode(mode)
    if instance.m_leader > max_leader_actions:
        raise ResourceError(f"grid search capped at {max_leader_actions} leader actions")
    divisions = int(round(1.0 / step))
    if divisions < 1 or abs(divisions * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1")
    best = None
    count = 0
    for delta in simplex_lattice(instance.m_leader, divisions):
        count += 1
        rec = best_worst_ne_for_leader(instance, delta, mode)
        if best is None or rec.leader_value > best[1].leader_value:
            best = (delta, rec)
    return GridResult(best[0], best[1].leader_value, best[1], count)


def _nf_view(instance):
    game = instance.game
    if game.kind == "pm":
        game = game.to_normal_form()
    return game.payoffs


@dataclass
class PureResult:
    found: bool
    leader_action: Optional[int] = None
    follower_actions: Optional[tuple] = None
    value: float = float("nan")


def enumerate_pure_pure(instance: LeaderFollowerInstance) -> PureResult:
    """Best profile with leader and followers all pure and followers in equilibrium."""
    U = _nf_view(instance)
    game = instance.game
    ell = instance.leader
    best = PureResult(False)
    for prof in itertools.product(*(range(k) for k in game.m)):
        ok = True
        for f in instance.followers:
            idx = list(prof)
            idx[f] = slice(None)
            if U[f][tuple(idx)].max() > U[f][prof] + 1e-12 * (1 + abs(U[f][prof])):
                ok = False
                break
        if not ok:
            continue
        val = float(U[ell][prof])
        if not best.found or val > best.value:
            best = PureResult(True, prof[ell], tuple(prof[f] for f in instance.followers), val)
    return best


@dataclass
class LmfpResult:
    found: bool
    delta: Optional[np.ndarray] = None
    follower_actions: Optional[tuple] = None
    value: float = float("nan")
    lps: int = 0


def lmfp_via_lps(instance: LeaderFollowerInstance, lp_backend: str = "highs") -> LmfpResult:
    """Mixed leader against pure followers: one LP over ``delta`` per follower profile."""
    U = _nf_view(instance)
    game = instance.game
    ell = instance.leader
    F = instance.followers
    m_l = instance.m_leader
    best = LmfpResult(False)
    count = 0
    # axes (leader, followers...) for simple indexing
    T = {a: np.moveaxis(U[a], ell, 0) for a in range(game.n)}
    for acts in itertools.product(*(range(game.m[f]) for f in F)):
        count += 1
        rows = []
        for pos, f in enumerate(F):
            here = T[f][(slice(None),) + acts]
            for jp in range(game.m[f]):
                if jp == acts[pos]:
                    continue
                alt = list(acts)
                alt[pos] = jp
                rows.append(T[f][(slice(None),) + tuple(alt)] - here)
        c = -T[ell][(slice(None),) + acts]
        A_ub = np.array(rows) if rows else None
        b_ub = np.zeros(len(rows)) if rows else None
        res = solve_lp_arrays(LinearProgram(c, A_ub, b_ub, np.ones((1, m_l)), np.ones(1),
                                            np.zeros(m_l), np.ones(m_l)), lp_backend)
        if res.status != OPTIMAL:
            continue
        delta = np.clip(res.x, 0.0, None)
        delta /= delta.sum()
        val = float(-c @ delta)
        if not best.found or val > best.value:
            best = LmfpResult(True, delta, acts, val)
    best.lps = count
    return best
