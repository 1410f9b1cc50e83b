"""Leader-follower equilibria with Nash followers.

Games and instances live in :mod:`lfen.games` and :mod:`lfen.instances`,
formulations in :mod:`lfen.formulations`, the global solver in
:mod:`lfen.solvers`, and the meta-procedures in :mod:`lfen.meta`.
"""
from .api import LfenSolution, oracle_value, solve_formulation
from .formulations import FormulationId, build, extract_solution
from .games import (LeaderFollowerInstance, NormalFormGame, PolymatrixGame, is_epsilon_ne,
                    leader_utility)
from .instances import generate_instance, read_game, write_game
from .meta import BlackBoxConfig, blackbox_lfen, implicit_enumeration
from .solvers.result import SolveConfig, SolveResult, compute_gaps

__version__ = "0.1.0"

__all__ = [
    "BlackBoxConfig", "FormulationId", "LeaderFollowerInstance", "LfenSolution", "NormalFormGame",
    "PolymatrixGame", "SolveConfig", "SolveResult", "blackbox_lfen", "build", "compute_gaps",
    "extract_solution", "generate_instance", "implicit_enumeration", "is_epsilon_ne",
    "leader_utility", "oracle_value", "read_game", "solve_formulation", "write_game",
]
