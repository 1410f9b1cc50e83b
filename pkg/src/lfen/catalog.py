"""Small hand-made games with known equilibria, used in tests and examples."""
from __future__ import annotations

import numpy as np

from .games import LeaderFollowerInstance, NormalFormGame, PolymatrixGame


def coordination() -> LeaderFollowerInstance:
    """Followers (agents 0, 1) get 1 when their actions match; the leader (agent 2)
    gets 10 on (a1, a1), 1 on (a2, a2), 0 otherwise, whatever it plays."""
    follower = np.zeros((2, 2, 2))
    leader = np.zeros((2, 2, 2))
    for i in range(2):
        follower[0, 0, i] = follower[1, 1, i] = 1.0
        leader[0, 0, i] = 10.0
        leader[1, 1, i] = 1.0
    return LeaderFollowerInstance(NormalFormGame([follower, follower.copy(), leader]))


def matching_pennies() -> LeaderFollowerInstance:
    """Polymatrix game: the followers play matching pennies and the leader earns
    4 when it plays a1 against follower 0's a1."""
    pairwise = {
        (0, 1): np.eye(2),
        (1, 0): np.array([[0.0, 1.0], [1.0, 0.0]]),
        (2, 0): np.array([[4.0, 0.0], [0.0, 0.0]]),
    }
    return LeaderFollowerInstance(PolymatrixGame([2, 2, 2], pairwise))


def constant(n: int = 3, m: int = 2, value: float = 5.0) -> LeaderFollowerInstance:
    shape = (m,) * n
    return LeaderFollowerInstance(NormalFormGame([np.full(shape, float(value)) for _ in range(n)]))


def leader_blind(game_class: str, m: int, seed: int) -> LeaderFollowerInstance:
    """A seeded random game whose followers ignore the leader's action.

    The followers' equilibrium set does not move with the commitment, so the
    leader-mixed optimum is attained at a pure commitment.
    """
    from .instances import generate_instance

    inst = generate_instance(game_class, 3, m, seed)
    game = inst.game
    if game.kind == "pm":
        pairwise = {k: v for k, v in game.pairwise.items() if k[1] != inst.leader}
        return LeaderFollowerInstance(PolymatrixGame(game.m, pairwise))
    payoffs = list(game.payoffs)
    for f in inst.followers:
        slice0 = payoffs[f][..., :1]
        payoffs[f] = np.broadcast_to(slice0, payoffs[f].shape).copy()
    return LeaderFollowerInstance(NormalFormGame(payoffs))
