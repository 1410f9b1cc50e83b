import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfen import catalog
from lfen import formulations as fm
from lfen.api import solve_formulation, solve_model
from lfen.exceptions import InconsistentBoundsError, ModelError
from lfen.instances import generate_instance
from lfen.model import BINARY, Model
from lfen.oracles import grid_search_lmfm
from lfen.solvers.bnb import solve_milp, solve_spatial
from lfen.solvers.lp import LinearProgram, simplex, solve_lp, solve_lp_arrays
from lfen.solvers.relax import relax
from lfen.solvers.result import (GAP_CAP, INFEASIBLE, NODE_LIMIT, OPTIMAL, TIME_LIMIT,
                                 SolveConfig, compute_gaps)


# LP core ---------------------------------------------------------------------
def test_lp_simple():
    m = Model()
    m.add_variable("x1", 0, math.inf)
    m.add_variable("x2", 0, math.inf)
    m.add_constraint([(1, "x1"), (1, "x2")], "<=", 1)
    m.set_objective([(1, "x1"), (1, "x2")])
    res = solve_lp(m)
    assert res.status == OPTIMAL and res.objective == pytest.approx(1.0)


def test_lp_infeasible():
    m = Model()
    m.add_variable("x", 0, math.inf)
    m.add_constraint([(1, "x")], "<=", -1)
    m.set_objective([(1, "x")])
    assert solve_lp(m).status == INFEASIBLE


def test_lp_degenerate_redundant_equalities():
    # vertices of the simplex are e1, e2, e3 with values 1, 2, 3
    A_eq = np.array([[1, 1, 1], [1, 1, 1], [2, 2, 2]], dtype=float)
    lp = LinearProgram(-np.array([1.0, 2.0, 3.0]), A_eq=A_eq, b_eq=np.array([1.0, 1.0, 2.0]))
    res = simplex(lp)
    assert res.status == OPTIMAL
    assert -res.objective == pytest.approx(3.0)
    np.testing.assert_allclose(res.x, [0, 0, 1], atol=1e-12)


def _vertex_optimum(c, A, b):
    """Best objective over all basic feasible points of {A x <= b, 0 <= x <= 1}."""
    n = len(c)
    rows = np.vstack([A, np.eye(n), -np.eye(n)])
    rhs = np.concatenate([b, np.ones(n), np.zeros(n)])
    best = -math.inf
    for active in itertools.combinations(range(len(rows)), n):
        M = rows[list(active)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, rhs[list(active)])
        if np.all(rows @ x <= rhs + 1e-9):
            best = max(best, float(c @ x))
    return best


@pytest.mark.parametrize("seed", range(100))
def test_simplex_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, k = 5, 5
    c = rng.normal(size=n)
    A = rng.normal(size=(k, n))
    b = rng.uniform(0.2, 2.0, k)       # x = 0 is feasible
    res = simplex(LinearProgram(-c, A, b, lo=np.zeros(n), hi=np.ones(n)))
    assert res.status == OPTIMAL
    assert -res.objective == pytest.approx(_vertex_optimum(c, A, b), abs=1e-9)


def test_highs_and_simplex_agree():
    rng = np.random.default_rng(7)
    for _ in range(10):
        c = rng.normal(size=4)
        A = rng.normal(size=(3, 4))
        lp = LinearProgram(c, A, rng.uniform(0.5, 1, 3), lo=np.zeros(4), hi=np.ones(4))
        a, b = simplex(lp), solve_lp_arrays(lp, "highs")
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_solve_lp_rejects_nonlinear():
    m = Model()
    m.add_variable("x")
    m.set_objective([(1, ("x", "x"))])
    with pytest.raises(ModelError):
        solve_lp(m)


# gaps ------------------------------------------------------------------------
def test_gap_examples():
    assert compute_gaps(100, 130) == (pytest.approx(30.0), pytest.approx(30.0))
    assert compute_gaps(0, 50) == (GAP_CAP, 50)
    assert compute_gaps(42, 42) == (0.0, 0.0)


def test_gap_inconsistent():
    with pytest.raises(InconsistentBoundsError):
        compute_gaps(10, 9)


def test_gap_clamp_for_small_lb():
    assert compute_gaps(1e-6, 10)[0] == GAP_CAP
    assert compute_gaps(-5, 10)[0] == GAP_CAP


# MILP ------------------------------------------------------------------------
def test_milp_binary_below_threshold():
    m = Model()
    m.add_variable("y", kind=BINARY)
    m.add_constraint([(1, "y")], "<=", 0.7)
    m.set_objective([(1, "y")])
    res = solve_milp(m)
    assert res.status == OPTIMAL and res.objective == 0.0


def test_milp_knapsack():
    m = Model()
    m.add_variable("a", kind=BINARY)
    m.add_variable("b", kind=BINARY)
    m.add_constraint([(1, "a"), (1, "b")], "<=", 1)
    m.set_objective([(3, "a"), (2, "b")])
    res = solve_milp(m)
    assert res.objective == pytest.approx(3.0)
    np.testing.assert_array_equal(res.x, [1, 0])


def test_milp_pm_oracle(mp):
    model = fm.build(mp, "oracle_pm", delta=[0.2, 0.8])
    res = solve_milp(model, SolveConfig(rel_gap_tol=1e-9))
    assert res.objective == pytest.approx(0.4, abs=1e-9)


def test_milp_rejects_continuous_products():
    m = Model()
    m.add_variable("x")
    m.add_variable("y")
    m.add_constraint([(1, ("x", "y"))], "<=", 0.5)
    m.set_objective([(1, "x")])
    with pytest.raises(ModelError):
        solve_milp(m)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_milp_spatial_agree_on_pure_leader_pm(seed):
    inst = generate_instance("pm", 3, 3, seed)
    model = fm.build(inst, "opm_lpfm3")
    cfg = SolveConfig(rel_gap_tol=1e-9)
    a, b = solve_milp(model, cfg), solve_spatial(model, cfg)
    assert a.objective == pytest.approx(b.objective, abs=1e-7)


# relaxation ------------------------------------------------------------------
def _xy(rlt):
    m = Model()
    m.add_variable("x")
    m.add_variable("y")
    m.add_constraint([(1, "x"), (1, "y")], "=", 1)
    m.set_objective([(1, ("x", "y"))])
    return m


def test_mccormick_root_bound():
    m = _xy(False)
    rel = relax(m, rlt=False)
    flo, fhi = rel.extend_bounds(m.lower, m.upper)
    res = solve_lp_arrays(rel.linear_program(flo, fhi))
    assert -res.objective == pytest.approx(0.5)


def test_envelope_exact_at_binary():
    m = Model()
    m.add_variable("d", kind=BINARY)
    m.add_variable("r")
    m.add_variable("w")
    m.add_constraint([(1, "w"), (-1, ("d", "r"))], "=", 0)
    m.set_objective([(1, "w")])
    rel = relax(m, rlt=False)
    for d in (0.0, 1.0):
        lo, hi = np.array([d, 0.0, 0.0]), np.array([d, 1.0, 1.0])
        flo, fhi = rel.extend_bounds(lo, hi)
        G, h = rel.mccormick(flo, fhi)
        for r in np.linspace(0, 1, 5):
            x = rel.lift(np.array([d, r, d * r]))
            assert np.all(G @ x <= h + 1e-12)
            x_bad = x.copy()
            x_bad[rel.products[0].column] += 0.1
            assert np.any(G @ x_bad > h + 1e-12)
            assert rel.violations(x)[0] == 0.0


def test_triple_product_chain():
    m = Model()
    for v in ("d", "p", "q"):
        m.add_variable(v)
    m.set_objective([(1, ("d", "p", "q"))])
    rel = relax(m)
    assert rel.num_products == 2
    assert rel.products[1].level == 2


def test_unbounded_variable_rejected():
    m = Model()
    m.add_variable("x", 0, math.inf)
    m.set_objective([(1, ("x", "x"))])
    with pytest.raises(ModelError):
        relax(m)


# spatial B&B -----------------------------------------------------------------
def test_spatial_xy():
    res = solve_spatial(_xy(True))
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(0.25, abs=1e-6)
    assert res.nodes <= 50


def test_spatial_onf3_coord(coord):
    model = fm.build(coord, "onf3")
    res = solve_model(model, coord)
    assert res.status == OPTIMAL and res.objective == pytest.approx(10.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(1, 6))
def test_onf1_onf3_agree_and_beat_grid(seed):
    inst = generate_instance("nf", 3, 3, seed)
    a = solve_formulation(inst, "onf1")
    b = solve_formulation(inst, "onf3")
    assert a.value == pytest.approx(b.value, abs=1e-6)
    grid = grid_search_lmfm(inst, step=0.1)
    assert grid.value <= b.upper_bound + 1e-9
    assert b.value - grid.value <= 0.2 * (1 + abs(b.value))


@pytest.mark.parametrize("kind, fid", [("nf", "onf3"), ("pm", "opm3"), ("nf", "onf2")])
def test_bounds_monotone_and_incumbents_feasible(kind, fid):
    inst = generate_instance(kind, 3, 3, 4)
    model = fm.build(inst, fid)
    trace = []
    cfg = SolveConfig(node_log=lambda node, depth, lb, ub, gap, br: trace.append((lb, ub)))
    res = solve_model(model, inst, cfg)
    lbs = [t[0] for t in trace if math.isfinite(t[0])]
    ubs = [t[1] for t in trace]
    assert all(b >= a - 1e-12 for a, b in zip(lbs, lbs[1:]))
    assert all(b <= a + 1e-12 for a, b in zip(ubs, ubs[1:]))
    assert all(lb <= ub + 1e-9 for lb, ub in trace)
    assert model.evaluate(res.x).max_violation <= 1e-7
    assert fm.extract_solution(model, res.x, inst).max_regret <= 1e-6


def test_limits_keep_valid_bounds():
    inst = generate_instance("nf", 3, 4, 2)
    model = fm.build(inst, "onf1")
    res = solve_model(model, inst, SolveConfig(node_limit=3))
    assert res.status in (NODE_LIMIT, OPTIMAL)
    assert res.lower_bound <= res.upper_bound + 1e-9
    exact = solve_formulation(inst, "onf3")
    assert res.upper_bound >= exact.value - 1e-6
    res = solve_model(model, inst, SolveConfig(time_limit=0.0))
    assert res.status == TIME_LIMIT


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(rel_gap_tol=0)
    with pytest.raises(ValueError):
        SolveConfig(branching="random")


def test_pseudo_cost_branching_same_optimum():
    inst = generate_instance("nf", 3, 2, 8)
    a = solve_formulation(inst, "onf3")
    b = solve_formulation(inst, "onf3", SolveConfig(branching="pseudo-cost"))
    assert a.value == pytest.approx(b.value, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(1, 5000))
def test_spatial_bilinear_box_optimum(seed):
    # max c1 x + c2 y + c3 x y on the unit box: optimum at a vertex (multilinear)
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    m = Model()
    m.add_variable("x")
    m.add_variable("y")
    m.set_objective([(c[0], "x"), (c[1], "y"), (c[2], ("x", "y"))])
    res = solve_spatial(m, SolveConfig(rel_gap_tol=1e-9, abs_gap_tol=1e-9))
    best = max(c[0] * x + c[1] * y + c[2] * x * y for x in (0, 1) for y in (0, 1))
    assert res.objective == pytest.approx(best, abs=1e-7)
