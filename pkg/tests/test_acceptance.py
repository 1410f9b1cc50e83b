"""Acceptance suite: one test per criterion, each listed as PASS/FAIL in the summary.

Criterion 1 solves the shared workload once; criteria 2, 5 and 7 reuse it.
"""
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from lfen import catalog, export as ex, formulations as fm
from lfen.api import oracle_value, solve_formulation
from lfen.exceptions import InconsistentBoundsError
from lfen.games import is_epsilon_ne
from lfen.instances import generate_instance
from lfen.meta import BlackBoxConfig, blackbox_lfen, exhaustive_pure_leader, implicit_enumeration
from lfen.oracles import enumerate_pure_pure, grid_search_lmfm, lmfp_via_lps
from lfen.solvers.bnb import solve_milp
from lfen.solvers.result import OPTIMAL, SolveConfig, compute_gaps

pytestmark = pytest.mark.slow

SEEDS = range(1, 11)
EXACT = SolveConfig(rel_gap_tol=1e-9)
FIDS = {"nf": ("onf1", "onf2", "onf3"), "pm": ("opm1", "opm2", "opm3")}
MS = {"nf": (2, 3, 4), "pm": (2, 3, 4, 5)}


@pytest.fixture(scope="module")
def workload():
    """Optima of every NF and PM formulation on the criterion-1 instances."""
    start = time.perf_counter()
    out = {}
    for kind in ("nf", "pm"):
        for m in MS[kind]:
            for seed in SEEDS:
                inst = generate_instance(kind, 3, m, seed)
                out[kind, m, seed] = (inst, {f: solve_formulation(inst, f, EXACT)
                                             for f in FIDS[kind]})
    return out, time.perf_counter() - start


def best_value(sols: dict) -> float:
    return max(s.value for s in sols.values())


@pytest.mark.criterion(1)
def test_formulation_equivalence(workload, record_property):
    results, elapsed = workload
    bad, worst = [], 0.0
    for key, (_, sols) in results.items():
        if any(s.status != OPTIMAL for s in sols.values()):
            bad.append((key, {f: s.status for f, s in sols.items()}))
        for a, b in itertools.combinations(sols.values(), 2):
            diff = abs(a.value - b.value)
            worst = max(worst, diff)
            if diff > 1e-6:
                bad.append((key, a.method, b.method, diff))
    record_property("detail", f"{len(results)} instances, max pairwise diff {worst:.2e}, "
                              f"{elapsed:.0f} s")
    assert not bad, bad
    assert elapsed <= 600


@pytest.mark.criterion(2)
def test_oracle_certification(workload, record_property):
    results, _ = workload
    bad, compared_pure = [], 0
    for (kind, m, seed), (inst, sols) in results.items():
        for s in sols.values():
            if not is_epsilon_ne(inst, s.delta, s.rhos, 1e-6).ok:
                bad.append(("not NE", kind, m, seed, s.method))
        if m > 3:
            continue
        grid = grid_search_lmfm(inst, step=0.05)
        for s in sols.values():
            if s.value < grid.value - 1e-9 * (1 + abs(grid.value)):
                bad.append(("below grid", kind, m, seed, s.method, s.value, grid.value))
            if np.isin(s.delta, (0.0, 1.0)).all():   # a lattice vertex is optimal
                compared_pure += 1
                if abs(s.value - grid.value) > 1e-2:
                    bad.append(("far from grid", kind, m, seed, s.method))
    blind = 0
    for kind, m, seed in itertools.product(("nf", "pm"), (2, 3), (1, 2, 3)):
        inst = catalog.leader_blind(kind, m, seed)
        s = solve_formulation(inst, FIDS[kind][2], EXACT)
        grid = grid_search_lmfm(inst, step=0.05)
        blind += 1
        if not np.isin(grid.delta, (0.0, 1.0)).all() or abs(s.value - grid.value) > 1e-2:
            bad.append(("leader-blind", kind, m, seed, s.value, grid.value))
        if not is_epsilon_ne(inst, s.delta, s.rhos, 1e-6).ok:
            bad.append(("leader-blind not NE", kind, m, seed))
    record_property("detail", f"{blind} leader-blind games within 1e-2 of the grid, "
                              f"{compared_pure} pure optima compared")
    assert blind >= 5
    assert not bad, bad


@pytest.mark.criterion(3)
def test_implicit_enumeration_exactness(record_property):
    bad, pruned = [], 0
    for kind, m, seed in itertools.product(("nf", "pm"), (2, 3, 4, 5), range(1, 6)):
        inst = generate_instance(kind, 3, m, seed)
        ie, exh = implicit_enumeration(inst), exhaustive_pure_leader(inst)
        if ie.value != exh.value:
            bad.append((kind, m, seed, ie.value, exh.value))
        for i in ie.info["pruned"]:
            pruned += 1
            if ie.info["ub"][i] > ie.value:
                bad.append((kind, m, seed, "unsound prune", i))
    record_property("detail", f"40 instances, {pruned} actions pruned")
    assert not bad, bad


@pytest.mark.criterion(4)
def test_gap_formula(record_property):
    assert compute_gaps(100.0, 130.0) == (30.0, 30.0)
    assert compute_gaps(0.0, 50.0) == (1e5, 50.0)
    assert compute_gaps(42.0, 42.0) == (0.0, 0.0)
    assert compute_gaps(1.0, 5000.0)[0] == 1e5
    with pytest.raises(InconsistentBoundsError):
        compute_gaps(10.0, 9.0)
    record_property("detail", "three worked examples, the cap and the UB < LB error")


@pytest.mark.criterion(5)
def test_ordering_chain(workload, record_property):
    results, _ = workload
    tol = 1e-7
    bad, chains = [], 0
    for (kind, m, seed), (inst, sols) in results.items():
        lmfm = best_value(sols)
        lpfm = implicit_enumeration(inst).value
        lmfp = lmfp_via_lps(inst)
        pp = enumerate_pure_pure(inst)
        chain = [("lpfm", lpfm), ("lmfm", lmfm)]
        if lmfp.found:
            chain.insert(0, ("lmfp", lmfp.value))
        if pp.found:
            chain.insert(0, ("pure-pure", pp.value))
        for (na, a), (nb, b) in zip(chain, chain[1:]):
            if a > b + tol:
                bad.append((kind, m, seed, f"{na} {a:.9g} > {nb} {b:.9g}"))
        chains += 1
    links = sorted({"{0} > {3}".format(*b[3].split()) for b in bad})
    record_property("detail", f"{chains} chains, {len(bad)} violations ({', '.join(links) or 'none'})")
    assert not bad, bad


def test_partial_orders(workload):
    """The orderings that hold for every game: a pure follower NE is a mixed one, and a
    pure commitment is a mixed one."""
    results, _ = workload
    tol = 1e-7
    for (kind, m, seed), (inst, sols) in results.items():
        lmfm = best_value(sols)
        lpfm = exhaustive_pure_leader(inst, backend="enumeration").value
        lmfp, pp = lmfp_via_lps(inst), enumerate_pure_pure(inst)
        assert lpfm <= lmfm + tol
        if lmfp.found:
            assert lmfp.value <= lmfm + tol
        if pp.found:
            assert pp.value <= lpfm + tol
            assert lmfp.found and pp.value <= lmfp.value + tol


def test_lmfp_can_beat_lpfm():
    """Why the single chain in criterion 5 cannot hold: a mixed commitment against
    pure followers beats every pure commitment against mixed followers."""
    inst = generate_instance("nf", 3, 2, 3)
    lmfp = lmfp_via_lps(inst)
    rhos = [np.eye(inst.game.m[f])[a] for f, a in zip(inst.followers, lmfp.follower_actions)]
    assert is_epsilon_ne(inst, lmfp.delta, rhos, 1e-9).ok
    lpfm = exhaustive_pure_leader(inst, backend="enumeration")
    assert lmfp.value > lpfm.value + 50


@pytest.mark.criterion(6)
def test_pessimistic_optimistic_sandwich(record_property):
    rng = np.random.default_rng(2024)
    coord = catalog.coordination()
    for _ in range(20):
        # dyadic points sum to exactly 1, so the equality below is exact
        k = int(rng.integers(0, 2 ** 20 + 1))
        d = np.array([k / 2 ** 20, (2 ** 20 - k) / 2 ** 20])
        assert oracle_value(coord, d, "pessimistic").value == 1.0
        assert oracle_value(coord, d, "optimistic").value == 10.0
    bad = []
    for seed in SEEDS:
        kind, m = ("nf" if seed <= 5 else "pm"), 2 + seed % 2
        inst = generate_instance(kind, 3, m, seed)
        for _ in range(20):
            d = rng.dirichlet(np.ones(m))
            lo = oracle_value(inst, d, "pessimistic").value
            hi = oracle_value(inst, d, "optimistic").value
            if lo > hi + 1e-9:
                bad.append((kind, m, seed, d, lo, hi))
    record_property("detail", "G-COORD gives (1, 10) at 20 points; 10 games x 20 points")
    assert not bad, bad


@pytest.mark.criterion(7)
def test_blackbox_quality(workload, record_property):
    results, _ = workload
    start = time.perf_counter()
    ratios = []
    for seed in SEEDS:
        inst, sols = results["pm", 3, seed]
        sol, _ = blackbox_lfen(inst, BlackBoxConfig(eval_budget=50))
        ratios.append(sol.value / best_value(sols))
    elapsed = time.perf_counter() - start
    hits = sum(r >= 0.9 for r in ratios)
    record_property("detail", f"{hits}/10 at >= 90%, lowest ratio {min(ratios):.3f}, "
                              f"{elapsed:.0f} s")
    assert hits >= 8
    assert elapsed <= 300


def _envelope_interval(model, col, x):
    """Exact feasible interval of ``x[col]`` under the envelope rows, others fixed."""
    v = model.variables[col]
    lo, hi = Fraction(v.lower), Fraction(v.upper)
    for con in model.constraints:
        if not con.tag.startswith("envelope") or (col,) not in con.terms:
            continue
        a = Fraction(con.terms[(col,)])
        rest = sum(Fraction(c) * Fraction(x[k[0]]) for k, c in con.terms.items() if k != (col,))
        bound = (Fraction(con.rhs) - rest) / a
        upper = (con.sense == "<=") == (a > 0)
        if con.sense == "=":
            lo, hi = max(lo, bound), min(hi, bound)
        elif upper:
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    return lo, hi


@pytest.mark.criterion(8)
def test_mccormick_exactness(record_property):
    rng = np.random.default_rng(8)
    checked = 0
    for inst, fid in ((catalog.coordination(), "onf_lpfm3"),
                      (generate_instance("pm", 3, 3, 1), "opm_lpfm3")):
        model = fm.build(inst, fid)
        ys = [v for v in model.variables if v.name.startswith("y_")]
        for _ in range(1000):
            x = np.zeros(model.num_vars)
            for i in range(inst.m_leader):
                x[model.var(f"d_{i}")] = float(rng.integers(0, 2))
            for f in range(len(inst.followers)):
                for j in range(inst.game.m[inst.followers[f]]):
                    x[model.var(f"r_{f}_{j}")] = rng.random()
            for y in ys:
                _, f, i, j = y.name.split("_")
                want = Fraction(x[model.var(f"d_{i}")]) * Fraction(x[model.var(f"r_{f}_{j}")])
                assert _envelope_interval(model, y.index, x) == (want, want), y.name
                checked += 1
    record_property("detail", f"2 x 1000 points, {checked} products pinned exactly")


@pytest.mark.criterion(9)
def test_export_round_trip(record_property):
    rng = np.random.default_rng(9)
    models = []
    for kind in ("nf", "pm"):
        for seed in (1, 2):
            inst = generate_instance(kind, 3, 2 + seed, seed)
            uniform = np.full(inst.m_leader, 1.0 / inst.m_leader)
            for fid in FIDS[kind] + (f"o{kind}_lpfm3",):
                models.append(fm.build(inst, fid))
            models.append(fm.build(inst, f"oracle_{kind}", delta=uniform))
    worst, lp_count = 0.0, 0
    for model in models:
        texts = [ex.format_pip(model)]
        if model.constraint_degree <= 1 and model.objective_degree <= 2:
            texts.append(ex.format_lp(model))
            lp_count += 1
        for text in texts:
            back = ex.parse_model(text)
            for _ in range(20):
                x = rng.uniform(model.lower, np.minimum(model.upper, model.lower + 100.0))
                a, b = model.evaluate(x), back.evaluate(x)
                worst = max(worst, abs(a.objective - b.objective),
                            float(np.max(np.abs(a.violations - b.violations), initial=0.0)))
    ids = {m.metadata["formulation"] for m in models}
    record_property("detail", f"{len(models)} models over {len(ids)} ids ({lp_count} also as LP), "
                              f"max disagreement {worst:.1e}")
    assert len(models) == 20 and len(ids) == 10
    assert worst <= 1e-9


@pytest.mark.criterion(10)
def test_milp_path(record_property):
    bad, worst = [], 0.0
    for m, seed in itertools.product((2, 3, 4, 5, 6), (1, 2)):
        inst = generate_instance("pm", 3, m, seed)
        model = fm.build(inst, "opm_lpfm3")
        res = solve_milp(model, EXACT)
        value = fm.extract_solution(model, res.x, inst).leader_value
        ie = implicit_enumeration(inst).value
        worst = max(worst, abs(value - ie))
        if res.status != OPTIMAL or abs(value - ie) > 1e-7:
            bad.append((m, seed, res.status, value, ie))
    record_property("detail", f"10 PM instances, max diff {worst:.1e}")
    assert not bad, bad
