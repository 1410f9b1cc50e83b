"""Primal heuristics feeding feasible points to branch-and-bound.

The main hook fixes the leader commitment at the relaxation's values, asks the
support-enumeration oracle for the leader's best follower equilibrium there,
and lifts the resulting profile to a full model assignment. A local polish then
moves the commitment with the follower supports held fixed.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from . import games as gc
from .formulations import lift
from .games import LeaderFollowerInstance
from .model import Model
from .oracles import best_worst_ne_for_leader

CACHE_DIGITS = 6


def _leader_columns(model: Model, instance: LeaderFollowerInstance):
    return np.array([model.var(f"d_{i}") for i in range(instance.m_leader)], dtype=np.intp)


def _three_tensors(instance):
    game = instance.game
    if game.kind == "pm":
        game = game.to_normal_form()
    ell = instance.leader
    f1, f2 = instance.followers
    # axes (leader, f1, f2)
    return [np.moveaxis(game.payoffs[a], ell, 0) for a in (ell, f1, f2)]


def polish_commitment(instance: LeaderFollowerInstance, delta, record, maxiter: int = 100):
    """Improve ``delta`` locally while the followers keep the supports of ``record``.

    Solves the fixed-support system (indifference on supports, best responses
    off them) for the leader's best point with SLSQP; returns ``(delta, rhos)``
    or None. Feasibility of the result is left to the caller.
    """
    L, U1, U2 = _three_tensors(instance)
    ml, m1, m2 = L.shape
    s1 = np.asarray(record.rhos[0]) > 1e-9
    s2 = np.asarray(record.rhos[1]) > 1e-9
    n = ml + m1 + m2 + 2

    def split(z):
        return z[:ml], z[ml:ml + m1], z[ml + m1:ml + m1 + m2], z[-2], z[-1]

    def obj(z):
        d, p, q, _, _ = split(z)
        return -np.einsum("ijk,i,j,k->", L, d, p, q)

    def obj_grad(z):
        d, p, q, _, _ = split(z)
        g = np.zeros(n)
        g[:ml] = -np.einsum("ijk,j,k->i", L, p, q)
        g[ml:ml + m1] = -np.einsum("ijk,i,k->j", L, d, q)
        g[ml + m1:ml + m1 + m2] = -np.einsum("ijk,i,j->k", L, d, p)
        return g

    def gaps(z):
        """``v_f - u_f^j`` for every action of both followers."""
        d, p, q, v1, v2 = split(z)
        u1 = np.einsum("ijk,i,k->j", U1, d, q)
        u2 = np.einsum("ijk,i,j->k", U2, d, p)
        return np.concatenate([v1 - u1, v2 - u2])

    def gaps_jac(z):
        d, p, q, _, _ = split(z)
        J = np.zeros((m1 + m2, n))
        J[:m1, :ml] = -np.einsum("ijk,k->ji", U1, q)
        J[:m1, ml + m1:ml + m1 + m2] = -np.einsum("ijk,i->jk", U1, d)
        J[:m1, -2] = 1.0
        J[m1:, :ml] = -np.einsum("ijk,j->ki", U2, p)
        J[m1:, ml:ml + m1] = -np.einsum("ijk,i->kj", U2, d)
        J[m1:, -1] = 1.0
        return J

    on = np.concatenate([s1, s2])
    sums = np.zeros((3, n))
    sums[0, :ml] = 1.0
    sums[1, ml:ml + m1] = 1.0
    sums[2, ml + m1:ml + m1 + m2] = 1.0
    cons = [
        {"type": "eq", "fun": lambda z: sums @ z - 1.0, "jac": lambda z: sums},
        {"type": "eq", "fun": lambda z: gaps(z)[on], "jac": lambda z: gaps_jac(z)[on]},
    ]
    if (~on).any():
        cons.append({"type": "ineq", "fun": lambda z: gaps(z)[~on], "jac": lambda z: gaps_jac(z)[~on]})
    bounds = [(0.0, 1.0)] * ml + [(0.0, 1.0 if k else 0.0) for k in s1] + \
             [(0.0, 1.0 if k else 0.0) for k in s2] + [(None, None)] * 2
    z0 = np.concatenate([delta, record.rhos[0], record.rhos[1], list(record.values)])
    with np.errstate(all="ignore"):
        res = minimize(obj, z0, jac=obj_grad, bounds=bounds, constraints=cons, method="SLSQP",
                       options={"maxiter": maxiter, "ftol": 1e-13})
    if not np.all(np.isfinite(res.x)):
        return None
    d, p, q, _, _ = split(res.x)
    d, p, q = (np.clip(a, 0.0, None) for a in (d, p, q))
    if min(d.sum(), p.sum(), q.sum()) <= 0:
        return None
    return d / d.sum(), [p / p.sum(), q / q.sum()]


class OracleHook:
    """Incumbent hook for leader-commitment models with two followers.

    Results are cached by the rounded commitment, so revisiting a relaxation
    point costs nothing.
    """

    def __init__(self, model: Model, instance: LeaderFollowerInstance, polish: bool = True):
        self.model = model
        self.instance = instance
        self.cols = _leader_columns(model, instance)
        self.pure = bool(model.metadata.get("formulation", "").endswith("lpfm3"))
        self.polish = polish and not self.pure
        self.cache: dict = {}
        self.calls = 0

    def commitment(self, x):
        d = np.clip(np.asarray(x)[self.cols], 0.0, None)
        if self.pure or d.sum() <= 0:
            return gc.pure_strategy(len(d), int(np.argmax(d)))
        return d / d.sum()

    def __call__(self, x, lo=None, hi=None):
        delta = self.commitment(x)
        key = tuple(np.round(delta, CACHE_DIGITS))
        if key in self.cache:
            return self.cache[key]
        self.calls += 1
        rec = best_worst_ne_for_leader(self.instance, delta, "optimistic")
        out = [lift(self.model, self.instance, delta, rec.rhos)]
        if self.polish:
            moved = polish_commitment(self.instance, delta, rec)
            if moved is not None:
                d2, rhos2 = moved
                out.append(lift(self.model, self.instance, d2, rhos2))
                # re-solve the followers exactly at the moved commitment
                rec2 = best_worst_ne_for_leader(self.instance, d2, "optimistic")
                out.append(lift(self.model, self.instance, d2, rec2.rhos))
        self.cache[key] = out
        return out


def oracle_hook(model: Model, instance: LeaderFollowerInstance, polish: bool = True):
    if len(instance.followers) != 2:
        return None
    return OracleHook(model, instance, polish)
