"""Normal-form and polymatrix games, expected utilities, and NE checks.

Strategies are plain 1-d float arrays. A *profile* is a sequence with one
strategy per agent, in agent order. Functions taking a leader--follower
``instance`` instead take the leader strategy ``delta`` and the follower
strategies ``rhos`` separately, ``rhos`` listed in ``instance.followers`` order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import DimensionError, UnsupportedError
from .validation import (
    NE_EPS,
    TOL_FEAS,
    check_action_counts,
    check_agent_index,
    check_finite_array,
    check_strategy,
)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


class Game:
    """Common surface of :class:`NormalFormGame` and :class:`PolymatrixGame`."""

    kind: str = ""
    m: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def num_outcomes(self) -> int:
        return int(np.prod(self.m))


class NormalFormGame(Game):
    """Dense n-player game: one payoff tensor of shape ``m_1 x ... x m_n`` per agent."""

    kind = "nf"

    def __init__(self, payoffs: Sequence[np.ndarray]):
        tensors = [check_finite_array(p, "payoff tensor") for p in payoffs]
        if len(tensors) < 2:
            raise DimensionError("a game needs at least two agents")
        shape = tensors[0].shape
        if len(shape) != len(tensors):
            raise DimensionError(
                f"payoff tensors have rank {len(shape)} but there are {len(tensors)} agents"
            )
        for i, t in enumerate(tensors):
            if t.shape != shape:
                raise DimensionError(f"payoff tensor of agent {i} has shape {t.shape}, expected {shape}")
        self.m = check_action_counts(shape)
        self.payoffs = tuple(_readonly(t) for t in tensors)

    def payoff(self, agent: int) -> np.ndarray:
        return self.payoffs[agent]

    def __eq__(self, other):
        if not isinstance(other, NormalFormGame) or other.m != self.m:
            return NotImplemented if not isinstance(other, Game) else False
        return all(np.array_equal(a, b) for a, b in zip(self.payoffs, other.payoffs))

    __hash__ = None

    def __repr__(self):
        return f"NormalFormGame(m={self.m})"


class PolymatrixGame(Game):
    """Polymatrix game: one ``m_i x m_j`` matrix per ordered pair of agents.

    Pairs missing from ``pairwise`` are taken as all-zero matrices.
    """

    kind = "pm"

    def __init__(self, m: Sequence[int], pairwise: dict):
        self.m = check_action_counts(m)
        n = len(self.m)
        if n < 2:
            raise DimensionError("a game needs at least two agents")
        mats = {}
        for (i, j), mat in pairwise.items():
            i, j = check_agent_index(i, n), check_agent_index(j, n)
            if i == j:
                raise DimensionError(f"pairwise matrix ({i},{i}) is not allowed")
            arr = check_finite_array(mat, f"U[{i},{j}]")
            if arr.shape != (self.m[i], self.m[j]):
                raise DimensionError(
                    f"U[{i},{j}] has shape {arr.shape}, expected {(self.m[i], self.m[j])}"
                )
            mats[(i, j)] = _readonly(arr)
        for i, j in itertools.permutations(range(n), 2):
            if (i, j) not in mats:
                mats[(i, j)] = _readonly(np.zeros((self.m[i], self.m[j])))
        self.pairwise = dict(sorted(mats.items()))

    def matrix(self, i: int, j: int) -> np.ndarray:
        return self.pairwise[(i, j)]

    def to_normal_form(self) -> NormalFormGame:
        """Embed into a dense game with ``U_i[a] = sum_j U_ij[a_i, a_j]``."""
        n = self.n
        tensors = []
        for i in range(n):
            t = np.zeros(self.m)
            for j in range(n):
                if j == i:
                    continue
                shape = [1] * n
                shape[i], shape[j] = self.m[i], self.m[j]
                mat = self.pairwise[(i, j)]
                if i > j:
                    mat = mat.T
                t = t + mat.reshape(shape)
            tensors.append(t)
        return NormalFormGame(tensors)

    def __eq__(self, other):
        if not isinstance(other, PolymatrixGame) or other.m != self.m:
            return NotImplemented if not isinstance(other, Game) else False
        return all(np.array_equal(a, other.pairwise[k]) for k, a in self.pairwise.items())

    __hash__ = None

    def __repr__(self):
        return f"PolymatrixGame(m={self.m})"


def _check_profile(game: Game, profile) -> list[np.ndarray]:
    if len(profile) != game.n:
        raise DimensionError(f"profile has {len(profile)} strategies for {game.n} agents")
    return [check_strategy(x, k, name=f"strategy of agent {i}")
            for i, (x, k) in enumerate(zip(profile, game.m))]


def _contract_except(tensor: np.ndarray, strategies, keep: int | None) -> np.ndarray:
    """Contract every axis of ``tensor`` except ``keep`` against the strategies."""
    out = tensor
    for axis in reversed(range(tensor.ndim)):
        if axis == keep:
            continue
        out = np.tensordot(out, strategies[axis], axes=([axis], [0]))
    return out


def utility_vector(game: Game, profile, agent: int) -> np.ndarray:
    """Expected utility of each pure action of ``agent`` against the others' strategies."""
    agent = check_agent_index(agent, game.n)
    profile = _check_profile(game, profile)
    if isinstance(game, NormalFormGame):
        return _contract_except(game.payoffs[agent], profile, agent)
    total = np.zeros(game.m[agent])
    for j in range(game.n):
        if j != agent:
            total += game.pairwise[(agent, j)] @ profile[j]
    return total


def expected_utility(game: Game, profile, agent: int) -> float:
    """Multilinear (NF) or bilinear (PM) expected utility of ``agent``."""
    profile = _check_profile(game, profile)
    return float(utility_vector(game, profile, agent) @ profile[agent])


@dataclass(frozen=True)
class LeaderFollowerInstance:
    """A game together with the index of the committing agent."""

    game: Game
    leader: int = -1
    followers: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        n = self.game.n
        leader = n - 1 if self.leader == -1 else check_agent_index(self.leader, n, "leader")
        object.__setattr__(self, "leader", leader)
        object.__setattr__(self, "followers", tuple(i for i in range(n) if i != leader))

    @property
    def m_leader(self) -> int:
        return self.game.m[self.leader]

    def follower_position(self, follower: int) -> int:
        try:
            return self.followers.index(follower)
        except ValueError:
            raise IndexError(f"agent {follower} is not a follower") from None

    def profile(self, delta, rhos) -> list[np.ndarray]:
        if len(rhos) != len(self.followers):
            raise DimensionError(f"got {len(rhos)} follower strategies, expected {len(self.followers)}")
        prof = [None] * self.game.n
        prof[self.leader] = np.asarray(delta, dtype=np.float64)
        for f, rho in zip(self.followers, rhos):
            prof[f] = np.asarray(rho, dtype=np.float64)
        return prof


def leader_utility(instance: LeaderFollowerInstance, delta, rhos) -> float:
    return expected_utility(instance.game, instance.profile(delta, rhos), instance.leader)


def follower_utilities(instance: LeaderFollowerInstance, delta, rhos, follower: int) -> np.ndarray:
    """Vector ``u_f`` of expected utilities of the follower's pure actions."""
    instance.follower_position(follower)
    return utility_vector(instance.game, instance.profile(delta, rhos), follower)


def action_utility(instance: LeaderFollowerInstance, delta, rhos, follower: int, action: int) -> float:
    u = follower_utilities(instance, delta, rhos, follower)
    if not 0 <= action < u.shape[0]:
        raise IndexError(f"action {action} out of range for follower {follower}")
    return float(u[action])


def regrets(instance: LeaderFollowerInstance, delta, rhos, follower: int) -> np.ndarray:
    """``max_j u_f^j - u_f``; nonnegative with at least one zero entry."""
    u = follower_utilities(instance, delta, rhos, follower)
    return u.max() - u


class NeVerdict(NamedTuple):
    ok: bool
    max_violation: float


def is_epsilon_ne(instance: LeaderFollowerInstance, delta, rhos, eps: float = NE_EPS,
                  support_tol: float = TOL_FEAS) -> NeVerdict:
    """Check that no follower can gain more than ``eps`` by deviating.

    Both the largest regret of an action in the support (probability above
    ``support_tol``) and the gap between best-response value and the
    follower's own expected utility are measured.
    """
    worst = 0.0
    for f, rho in zip(instance.followers, rhos):
        rho = np.asarray(rho, dtype=np.float64)
        u = follower_utilities(instance, delta, rhos, f)
        r = u.max() - u
        supp = rho > support_tol
        if supp.any():
            worst = max(worst, float(r[supp].max()))
        worst = max(worst, float(u.max() - u @ rho))
    return NeVerdict(worst <= eps, worst)


def big_m(instance: LeaderFollowerInstance, follower: int) -> float:
    """Payoff range of ``follower``; bounds every regret the follower can have."""
    instance.follower_position(follower)
    game = instance.game
    if isinstance(game, NormalFormGame):
        u = game.payoffs[follower]
        return float(u.max() - u.min())
    return float(sum(mat.max() - mat.min()
                     for (i, _), mat in game.pairwise.items() if i == follower))


def utility_range(instance: LeaderFollowerInstance, agent: int) -> tuple[float, float]:
    """Lower and upper bound on any expected utility of ``agent``."""
    game = instance.game
    if isinstance(game, NormalFormGame):
        u = game.payoffs[agent]
        return float(u.min()), float(u.max())
    mats = [mat for (i, _), mat in game.pairwise.items() if i == agent]
    return float(sum(m.min() for m in mats)), float(sum(m.max() for m in mats))


def induced_follower_game(instance: LeaderFollowerInstance, delta) -> tuple[np.ndarray, np.ndarray]:
    """Bimatrix game ``(A, B)`` the two followers play once ``delta`` is fixed.

    Rows index the first follower's actions, columns the second's.
    """
    if len(instance.followers) != 2:
        raise UnsupportedError("induced bimatrix game needs exactly two followers")
    game = instance.game
    ell = instance.leader
    f1, f2 = instance.followers
    delta = check_strategy(delta, game.m[ell], name="delta")
    if isinstance(game, NormalFormGame):
        mats = []
        for f in (f1, f2):
            t = np.tensordot(game.payoffs[f], delta, axes=([ell], [0]))
            mats.append(np.asarray(t))
        # remaining axes are (f1, f2) in agent order, and f1 < f2
        return mats[0], mats[1]
    a = game.pairwise[(f1, f2)] + (game.pairwise[(f1, ell)] @ delta)[:, None]
    b = game.pairwise[(f2, f1)].T + (game.pairwise[(f2, ell)] @ delta)[None, :]
    return a, b


def leader_matrix(instance: LeaderFollowerInstance, delta) -> np.ndarray:
    """Leader payoff over follower action pairs at fixed ``delta`` (two followers)."""
    if len(instance.followers) != 2:
        raise UnsupportedError("leader matrix needs exactly two followers")
    game = instance.game
    ell = instance.leader
    f1, f2 = instance.followers
    delta = np.asarray(delta, dtype=np.float64)
    if isinstance(game, NormalFormGame):
        return np.tensordot(game.payoffs[ell], delta, axes=([ell], [0]))
    base = delta @ game.pairwise[(ell, f1)]
    other = delta @ game.pairwise[(ell, f2)]
    return base[:, None] + other[None, :]


def pure_strategy(size: int, action: int) -> np.ndarray:
    e = np.zeros(size)
    e[action] = 1.0
    return e
