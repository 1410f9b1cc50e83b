"""Builders turning a leader--follower instance into polynomial models.

Variable names are deterministic and 0-based: ``d_i`` (leader), ``r_f_j``
(follower ``f`` plays ``j``), ``s_f_j`` (1 = action out of support), ``v_f``,
``u_f_j``, ``reg_f_j``, ``y_f_i_j`` (``d_i * r_f_j``), ``z_i_j_k`` (leader times
both followers), ``w_j_k`` (oracle product of the two followers). Followers are
named by their agent index.

Model ids: ``onf1..3`` (normal form, leader mixed), ``opm1..3`` (polymatrix),
``oracle_nf``/``oracle_pm`` (second level at a fixed ``delta``), and
``onf_lpfm3``/``opm_lpfm3`` (leader restricted to pure strategies).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import games as gc
from .exceptions import CertificationError, UnsupportedError, WrongGameClassError
from .games import LeaderFollowerInstance, NormalFormGame, PolymatrixGame
from .model import BINARY, Model
from .validation import NE_EPS, TOL_FEAS, check_strategy, normalize_strategy

OPTIMISTIC = "optimistic"
PESSIMISTIC = "pessimistic"


class FormulationId(str, Enum):
    ONF1 = "onf1"
    ONF2 = "onf2"
    ONF3 = "onf3"
    OPM1 = "opm1"
    OPM2 = "opm2"
    OPM3 = "opm3"
    ORACLE_NF = "oracle_nf"
    ORACLE_PM = "oracle_pm"
    ONF_LPFM3 = "onf_lpfm3"
    OPM_LPFM3 = "opm_lpfm3"

    @property
    def game_kind(self) -> str:
        return "pm" if "pm" in self.value else "nf"

    @property
    def is_oracle(self) -> bool:
        return self.value.startswith("oracle")

    @property
    def leader_pure(self) -> bool:
        return "lpfm" in self.value


# helpers ----------------------------------------------------------------

def _require(instance: LeaderFollowerInstance, kind: str, fid: str):
    if instance.game.kind != kind:
        raise WrongGameClassError(f"{fid} needs a {kind} game, got {instance.game.kind}")


def _nf_tensors(instance: LeaderFollowerInstance) -> dict:
    """Payoff tensors with axes reordered to (leader, followers in order)."""
    ell = instance.leader
    return {a: np.moveaxis(instance.game.payoffs[a], ell, 0) for a in range(instance.game.n)}


def _new_model(instance, fid: FormulationId, direction="max") -> Model:
    model = Model(name=fid.value)
    model.direction = direction
    model.metadata.update({"formulation": fid.value, "leader": instance.leader,
                           "followers": list(instance.followers), "m": list(instance.game.m),
                           "kind": instance.game.kind, "chains": {}})
    return model


def _add_delta(model, instance, binary=False) -> list:
    kind = BINARY if binary else "continuous"
    cols = [model.add_variable(f"d_{i}", 0.0, 1.0, kind) for i in range(instance.m_leader)]
    model.add_constraint([(1.0, c) for c in cols], "=", 1.0, "leader simplex")
    return cols


def _add_rhos(model, instance) -> dict:
    rho = {}
    for f in instance.followers:
        rho[f] = [model.add_variable(f"r_{f}_{j}") for j in range(instance.game.m[f])]
        model.add_constraint([(1.0, c) for c in rho[f]], "=", 1.0, f"follower simplex f={f}")
    return rho


def _add_support_block(model, instance, rho, u, with_bounds=True):
    """v_f >= u_f^j, reg = v - u, rho <= 1 - s, reg <= M_f s; returns (v, reg, s)."""
    v, reg, s = {}, {}, {}
    for f in instance.followers:
        lo, hi = _u_range(model, instance, f)
        mf = gc.big_m(instance, f)
        v[f] = model.add_variable(f"v_{f}", lo, hi)
        reg[f], s[f] = [], []
        for j in range(instance.game.m[f]):
            reg[f].append(model.add_variable(f"reg_{f}_{j}", 0.0, mf))
            s[f].append(model.add_variable(f"s_{f}_{j}", 0.0, 1.0, BINARY))
        for j in range(instance.game.m[f]):
            model.add_constraint([(1.0, v[f]), (-1.0, u[f][j])], ">=", 0.0, f"best response f={f} j={j}")
        for j in range(instance.game.m[f]):
            model.add_constraint([(1.0, reg[f][j]), (-1.0, v[f]), (1.0, u[f][j])], "=", 0.0,
                                 f"regret f={f} j={j}")
        for j in range(instance.game.m[f]):
            model.add_constraint([(1.0, rho[f][j]), (1.0, s[f][j])], "<=", 1.0,
                                 f"support exclusion f={f} j={j}")
        for j in range(instance.game.m[f]):
            model.add_constraint([(1.0, reg[f][j]), (-mf, s[f][j])], "<=", 0.0,
                                 f"regret deactivation f={f} j={j}")
    return v, reg, s


def _u_range(model, instance, f):
    rng = model.metadata.get("u_range", {}).get(f)
    return rng if rng is not None else gc.utility_range(instance, f)


def _add_u(model, instance) -> dict:
    u = {}
    for f in instance.followers:
        lo, hi = _u_range(model, instance, f)
        u[f] = [model.add_variable(f"u_{f}_{j}", lo, hi) for j in range(instance.game.m[f])]
    return u


def _nf_entry(tensor, instance, i, acts: dict):
    idx = (i,) + tuple(acts[g] for g in instance.followers)
    return tensor[idx]


# NF formulations ----------------------------------------------------------

def _nf_follower_terms(instance, rho, delta_cols, T, f, j):
    """Monomials of u_f^j = sum_i sum_{a_-f} d_i prod rho U_f (delta as variables)."""
    terms = []
    others = [g for g in instance.followers if g != f]
    for i in range(instance.m_leader):
        for acts in itertools.product(*(range(instance.game.m[g]) for g in others)):
            a = dict(zip(others, acts))
            a[f] = j
            coef = _nf_entry(T[f], instance, i, a)
            terms.append((coef, (delta_cols[i],) + tuple(rho[g][a[g]] for g in others)))
    return terms


def _nf_leader_terms(instance, rho, delta_cols, T):
    terms = []
    ell = instance.leader
    for i in range(instance.m_leader):
        for acts in itertools.product(*(range(instance.game.m[g]) for g in instance.followers)):
            a = dict(zip(instance.followers, acts))
            terms.append((_nf_entry(T[ell], instance, i, a),
                          (delta_cols[i],) + tuple(rho[g][a[g]] for g in instance.followers)))
    return terms


def build_onf1(instance: LeaderFollowerInstance) -> Model:
    """Complementarity formulation: cubic objective and |F| cubic rows for n = 3."""
    _require(instance, "nf", "onf1")
    model = _new_model(instance, FormulationId.ONF1)
    T = _nf_tensors(instance)
    d = _add_delta(model, instance)
    rho = _add_rhos(model, instance)
    v = {}
    for f in instance.followers:
        lo, hi = gc.utility_range(instance, f)
        v[f] = model.add_variable(f"v_{f}", lo, hi)
    for f in instance.followers:
        for j in range(instance.game.m[f]):
            terms = [(-c, fac) for c, fac in _nf_follower_terms(instance, rho, d, T, f, j)]
            model.add_constraint(terms + [(1.0, v[f])], ">=", 0.0, f"best response f={f} j={j}")
    for f in instance.followers:
        terms = []
        for j in range(instance.game.m[f]):
            terms.append((1.0, (rho[f][j], v[f])))
            for c, fac in _nf_follower_terms(instance, rho, d, T, f, j):
                terms.append((-c, fac + (rho[f][j],)))
        model.add_constraint(terms, "=", 0.0, f"complementarity f={f}")
    model.set_objective(_nf_leader_terms(instance, rho, d, T), "max")
    return model.freeze()


def build_onf2(instance: LeaderFollowerInstance) -> Model:
    """Support-binary formulation: quadratic rows defining u, cubic objective."""
    _require(instance, "nf", "onf2")
    model = _new_model(instance, FormulationId.ONF2)
    T = _nf_tensors(instance)
    d = _add_delta(model, instance)
    rho = _add_rhos(model, instance)
    u = _add_u(model, instance)
    for f in instance.followers:
        for j in range(instance.game.m[f]):
            terms = [(-c, fac) for c, fac in _nf_follower_terms(instance, rho, d, T, f, j)]
            model.add_constraint(terms + [(1.0, u[f][j])], "=", 0.0, f"utility f={f} j={j}")
    _add_support_block(model, instance, rho, u)
    model.set_objective(_nf_leader_terms(instance, rho, d, T), "max")
    return model.freeze()


class _Chains:
    """Auxiliary variables for products ``d_i * prod_g r_g``, built prefix by prefix."""

    def __init__(self, model, instance, d, rho, pure_leader=False):
        self.model, self.instance, self.d, self.rho = model, instance, d, rho
        self.vars: dict = {}
        self.families: dict = {}
        self.pure_leader = pure_leader

    def name(self, group, i, acts):
        inst = self.instance
        if len(group) == 1:
            return f"y_{group[0]}_{i}_{acts[0]}"
        if tuple(group) == inst.followers:
            return "z_" + "_".join(str(k) for k in (i,) + tuple(acts))
        return "p_" + "-".join(str(g) for g in group) + "_" + "_".join(str(k) for k in (i,) + tuple(acts))

    def get(self, group: tuple, i: int, acts: tuple) -> int:
        key = (group, i, acts)
        if key in self.vars:
            return self.vars[key]
        name = self.name(group, i, acts)
        col = self.model.add_variable(name, 0.0, 1.0)
        self.vars[key] = col
        self.families.setdefault(group, []).append(col)
        self.model.metadata["chains"][name] = (i, tuple(zip(group, acts)))
        g_last, a_last = group[-1], acts[-1]
        if len(group) == 1:
            d_col, r_col = self.d[i], self.rho[g_last][a_last]
            if self.pure_leader:
                self.model.add_constraint([(1.0, col), (-1.0, d_col)], "<=", 0.0,
                                          f"envelope upper-leader f={g_last} i={i} j={a_last}")
                self.model.add_constraint([(1.0, col), (-1.0, r_col)], "<=", 0.0,
                                          f"envelope upper-follower f={g_last} i={i} j={a_last}")
                self.model.add_constraint([(1.0, col), (-1.0, d_col), (-1.0, r_col)], ">=", -1.0,
                                          f"envelope lower f={g_last} i={i} j={a_last}")
            else:
                self.model.add_constraint([(1.0, col), (-1.0, (d_col, r_col))], "=", 0.0,
                                          f"leader-follower product f={g_last} i={i} j={a_last}")
        else:
            prev = self.get(group[:-1], i, acts[:-1])
            self.model.add_constraint([(1.0, col), (-1.0, (prev, self.rho[g_last][a_last]))], "=", 0.0,
                                      f"joint product {name}")
        return col

    def add_valid_sums(self):
        for group, cols in self.families.items():
            label = "y" if len(group) == 1 else "z"
            self.model.add_constraint([(1.0, c) for c in cols], "=", 1.0,
                                      f"{label} sum group={'-'.join(map(str, group))}")


def _build_onf3_like(instance, fid, pure_leader):
    _require(instance, "nf", fid.value)
    model = _new_model(instance, fid)
    T = _nf_tensors(instance)
    d = _add_delta(model, instance, binary=pure_leader)
    rho = _add_rhos(model, instance)
    chains = _Chains(model, instance, d, rho, pure_leader)
    F = instance.followers
    m = instance.game.m
    # chains in deterministic order: each follower's y block, then the joint ones
    for f in F:
        for i in range(instance.m_leader):
            for j in range(m[f]):
                chains.get((f,), i, (j,))
    for i in range(instance.m_leader):
        for acts in itertools.product(*(range(m[g]) for g in F)):
            chains.get(F, i, acts)
    u = _add_u(model, instance)
    for f in F:
        others = tuple(g for g in F if g != f)
        for j in range(m[f]):
            terms = [(1.0, u[f][j])]
            for i in range(instance.m_leader):
                for acts in itertools.product(*(range(m[g]) for g in others)):
                    a = dict(zip(others, acts))
                    a[f] = j
                    terms.append((-_nf_entry(T[f], instance, i, a), chains.get(others, i, acts)))
            model.add_constraint(terms, "=", 0.0, f"utility f={f} j={j}")
    chains.add_valid_sums()
    _add_support_block(model, instance, rho, u)
    ell = instance.leader
    obj = []
    for i in range(instance.m_leader):
        for acts in itertools.product(*(range(m[g]) for g in F)):
            a = dict(zip(F, acts))
            obj.append((_nf_entry(T[ell], instance, i, a), chains.get(F, i, acts)))
    model.set_objective(obj, "max")
    return model.freeze()


def build_onf3(instance: LeaderFollowerInstance) -> Model:
    """Lifted formulation with product variables y, z and their valid unit sums."""
    return _build_onf3_like(instance, FormulationId.ONF3, pure_leader=False)


def build_onf_lpfm3(instance: LeaderFollowerInstance) -> Model:
    """Leader-pure lifted formulation: y linked to binary d by its McCormick envelope."""
    return _build_onf3_like(instance, FormulationId.ONF_LPFM3, pure_leader=True)


# PM formulations ----------------------------------------------------------

def _pm_follower_terms(instance, rho, d, f, j):
    game = instance.game
    ell = instance.leader
    terms = [(game.pairwise[(f, ell)][j, i], (d[i],)) for i in range(instance.m_leader)]
    for g in instance.followers:
        if g == f:
            continue
        mat = game.pairwise[(f, g)]
        terms.extend((mat[j, k], (rho[g][k],)) for k in range(game.m[g]))
    return terms


def _pm_leader_terms(instance, rho, d, y=None):
    game = instance.game
    ell = instance.leader
    terms = []
    for f in instance.followers:
        mat = game.pairwise[(ell, f)]
        for i in range(instance.m_leader):
            for j in range(game.m[f]):
                fac = (y[(f, i, j)],) if y is not None else (d[i], rho[f][j])
                terms.append((mat[i, j], fac))
    return terms


def build_opm1(instance: LeaderFollowerInstance) -> Model:
    """Complementarity formulation for polymatrix games: |F| quadratic rows."""
    _require(instance, "pm", "opm1")
    model = _new_model(instance, FormulationId.OPM1)
    d = _add_delta(model, instance)
    rho = _add_rhos(model, instance)
    v = {}
    for f in instance.followers:
        lo, hi = gc.utility_range(instance, f)
        v[f] = model.add_variable(f"v_{f}", lo, hi)
    for f in instance.followers:
        for j in range(instance.game.m[f]):
            terms = [(-c, fac) for c, fac in _pm_follower_terms(instance, rho, d, f, j)]
            model.add_constraint(terms + [(1.0, v[f])], ">=", 0.0, f"best response f={f} j={j}")
    for f in instance.followers:
        terms = []
        for j in range(instance.game.m[f]):
            terms.append((1.0, (rho[f][j], v[f])))
            for c, fac in _pm_follower_terms(instance, rho, d, f, j):
                terms.append((-c, fac + (rho[f][j],)))
        model.add_constraint(terms, "=", 0.0, f"complementarity f={f}")
    model.set_objective(_pm_leader_terms(instance, rho, d), "max")
    return model.freeze()


def _pm_with_u(instance, fid, binary_delta=False):
    model = _new_model(instance, fid)
    d = _add_delta(model, instance, binary=binary_delta)
    rho = _add_rhos(model, instance)
    u = _add_u(model, instance)
    for f in instance.followers:
        for j in range(instance.game.m[f]):
            terms = [(-c, fac) for c, fac in _pm_follower_terms(instance, rho, d, f, j)]
            model.add_constraint(terms + [(1.0, u[f][j])], "=", 0.0, f"utility f={f} j={j}")
    _add_support_block(model, instance, rho, u)
    return model, d, rho


def build_opm2(instance: LeaderFollowerInstance) -> Model:
    """Support-binary formulation: linear rows, quadratic objective."""
    _require(instance, "pm", "opm2")
    model, d, rho = _pm_with_u(instance, FormulationId.OPM2)
    model.set_objective(_pm_leader_terms(instance, rho, d), "max")
    return model.freeze()


def _build_opm3_like(instance, fid, pure_leader):
    _require(instance, "pm", fid.value)
    model, d, rho = _pm_with_u(instance, fid, binary_delta=pure_leader)
    chains = _Chains(model, instance, d, rho, pure_leader)
    y = {}
    for f in instance.followers:
        for i in range(instance.m_leader):
            for j in range(instance.game.m[f]):
                y[(f, i, j)] = chains.get((f,), i, (j,))
    chains.add_valid_sums()
    model.set_objective(_pm_leader_terms(instance, rho, d, y), "max")
    return model.freeze()


def build_opm3(instance: LeaderFollowerInstance) -> Model:
    """Lifted polymatrix formulation: y = d * r rows, linear objective."""
    return _build_opm3_like(instance, FormulationId.OPM3, pure_leader=False)


def build_opm_lpfm3(instance: LeaderFollowerInstance) -> Model:
    """Leader-pure polymatrix formulation; a mixed-integer linear program."""
    return _build_opm3_like(instance, FormulationId.OPM_LPFM3, pure_leader=True)


# oracles --------------------------------------------------------------------

def build_oracle(instance: LeaderFollowerInstance, delta, mode: str = OPTIMISTIC) -> Model:
    """Second-level model at a fixed leader strategy.

    Its optimum is the best (optimistic) or worst (pessimistic) leader utility
    over the followers' Nash equilibria at ``delta``.
    """
    if mode not in (OPTIMISTIC, PESSIMISTIC):
        raise ValueError(f"unknown mode {mode!r}")
    if len(instance.followers) != 2:
        raise UnsupportedError("oracle models need exactly two followers")
    game = instance.game
    delta = check_strategy(delta, instance.m_leader, name="delta")
    fid = FormulationId.ORACLE_PM if game.kind == "pm" else FormulationId.ORACLE_NF
    direction = "max" if mode == OPTIMISTIC else "min"
    model = _new_model(instance, fid, direction)
    model.metadata["delta"] = delta.tolist()
    model.metadata["mode"] = mode
    f1, f2 = instance.followers
    A, B = gc.induced_follower_game(instance, delta)
    L = gc.leader_matrix(instance, delta)
    model.metadata["u_range"] = {f1: (float(A.min()), float(A.max())),
                                 f2: (float(B.min()), float(B.max()))}
    rho = _add_rhos(model, instance)
    u = _add_u(model, instance)
    m1, m2 = game.m[f1], game.m[f2]
    for j in range(m1):
        terms = [(1.0, u[f1][j])] + [(-A[j, k], rho[f2][k]) for k in range(m2)]
        model.add_constraint(terms, "=", 0.0, f"utility f={f1} j={j}")
    for k in range(m2):
        terms = [(1.0, u[f2][k])] + [(-B[j, k], rho[f1][j]) for j in range(m1)]
        model.add_constraint(terms, "=", 0.0, f"utility f={f2} j={k}")
    _add_support_block(model, instance, rho, u)
    if game.kind == "pm":
        ell = instance.leader
        c1 = delta @ game.pairwise[(ell, f1)]
        c2 = delta @ game.pairwise[(ell, f2)]
        obj = [(c1[j], rho[f1][j]) for j in range(m1)] + [(c2[k], rho[f2][k]) for k in range(m2)]
    else:
        w = {}
        for j in range(m1):
            for k in range(m2):
                w[(j, k)] = model.add_variable(f"w_{j}_{k}", 0.0, 1.0)
                model.add_constraint([(1.0, w[(j, k)]), (-1.0, (rho[f1][j], rho[f2][k]))], "=", 0.0,
                                     f"follower product j={j} k={k}")
        model.add_constraint([(1.0, c) for c in w.values()], "=", 1.0, "w sum")
        obj = [(L[j, k], w[(j, k)]) for j in range(m1) for k in range(m2)]
    model.set_objective(obj, direction)
    return model.freeze()


BUILDERS = {
    FormulationId.ONF1: build_onf1,
    FormulationId.ONF2: build_onf2,
    FormulationId.ONF3: build_onf3,
    FormulationId.OPM1: build_opm1,
    FormulationId.OPM2: build_opm2,
    FormulationId.OPM3: build_opm3,
    FormulationId.ONF_LPFM3: build_onf_lpfm3,
    FormulationId.OPM_LPFM3: build_opm_lpfm3,
}


def build(instance: LeaderFollowerInstance, fid, delta=None, mode: str = OPTIMISTIC) -> Model:
    fid = FormulationId(fid)
    if fid.is_oracle:
        if delta is None:
            raise ValueError("oracle models need a leader strategy")
        if fid.game_kind != instance.game.kind:
            raise WrongGameClassError(f"{fid.value} needs a {fid.game_kind} game")
        return build_oracle(instance, delta, mode)
    if mode != OPTIMISTIC:
        raise ValueError("pessimistic mode is only available for oracle models")
    return BUILDERS[fid](instance)


# points <-> strategies ------------------------------------------------------

def lift(model: Model, instance: LeaderFollowerInstance, delta, rhos) -> np.ndarray:
    """Complete assignment of ``model`` induced by a strategy profile.

    Auxiliary variables take their defining values; support binaries are 0
    exactly on actions with probability above ``TOL_FEAS``.
    """
    delta = np.asarray(model.metadata.get("delta", delta), dtype=np.float64)
    rhos = [np.asarray(r, dtype=np.float64) for r in rhos]
    rho = dict(zip(instance.followers, rhos))
    u = {f: gc.follower_utilities(instance, delta, rhos, f) for f in instance.followers}
    chains = model.metadata.get("chains", {})
    x = np.zeros(model.num_vars)
    for var in model.variables:
        name = var.name
        parts = name.split("_")
        head = parts[0]
        if head == "d":
            val = delta[int(parts[1])]
        elif head == "r":
            val = rho[int(parts[1])][int(parts[2])]
        elif head == "u":
            val = u[int(parts[1])][int(parts[2])]
        elif head == "v":
            val = u[int(parts[1])].max()
        elif head == "reg":
            f = int(parts[1])
            val = u[f].max() - u[f][int(parts[2])]
        elif head == "s":
            val = 0.0 if rho[int(parts[1])][int(parts[2])] > TOL_FEAS else 1.0
        elif head == "w":
            f1, f2 = instance.followers
            val = rho[f1][int(parts[1])] * rho[f2][int(parts[2])]
        elif name in chains:
            i, acts = chains[name]
            val = delta[i]
            for g, a in acts:
                val *= rho[g][a]
        else:
            raise KeyError(f"cannot lift variable {name!r}")
        x[var.index] = val
    return x


@dataclass
class ExtractedSolution:
    delta: np.ndarray
    rhos: list
    leader_value: float
    max_regret: float
    certified: bool
    auxiliaries: dict = field(default_factory=dict)


def strategies_from(model: Model, x: np.ndarray, instance: LeaderFollowerInstance):
    x = model.assignment_vector(x)
    if "delta" in model.metadata:
        delta = np.asarray(model.metadata["delta"], dtype=np.float64)
    else:
        delta = np.array([x[model.var(f"d_{i}")] for i in range(instance.m_leader)])
    rhos = [np.array([x[model.var(f"r_{f}_{j}")] for j in range(instance.game.m[f])])
            for f in instance.followers]
    return delta, rhos


def extract_solution(model: Model, assignment, instance: LeaderFollowerInstance,
                     eps: float = NE_EPS, certify: bool = True) -> ExtractedSolution:
    """Read strategies off a model point, renormalize, and certify the NE.

    The leader value is recomputed from the game, never read from the model.
    """
    x = model.assignment_vector(assignment)
    delta, rhos = strategies_from(model, x, instance)
    delta = normalize_strategy(delta)
    rhos = [normalize_strategy(r) for r in rhos]
    verdict = gc.is_epsilon_ne(instance, delta, rhos, eps)
    if certify and not verdict.ok:
        raise CertificationError(verdict.max_violation)
    value = gc.leader_utility(instance, delta, rhos)
    aux = {v.name: float(x[v.index]) for v in model.variables if v.name[0] not in "dr" or
           v.name.startswith("reg")}
    return ExtractedSolution(delta, rhos, value, verdict.max_violation, verdict.ok, aux)
