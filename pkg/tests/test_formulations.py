import numpy as np
import pytest

from lfen import catalog
from lfen import formulations as fm
from lfen import games as gc
from lfen.api import solve_formulation, solve_model
from lfen.exceptions import CertificationError, WrongGameClassError
from lfen.formulations import FormulationId
from lfen.games import LeaderFollowerInstance, NormalFormGame, PolymatrixGame
from lfen.instances import generate_instance
from lfen.oracles import equilibria_at
from lfen.solvers.result import OPTIMAL

NF_FIDS = ["onf1", "onf2", "onf3"]
PM_FIDS = ["opm1", "opm2", "opm3"]


def test_formulation_id_properties():
    assert FormulationId.ONF1.game_kind == "nf"
    assert FormulationId.OPM_LPFM3.leader_pure
    assert FormulationId.ORACLE_PM.is_oracle and not FormulationId.ONF3.is_oracle


def test_onf1_census(coord):
    c = fm.build(coord, "onf1").census()
    assert c["continuous"] == 2 + 2 + 2 + 2
    assert c["constraints_by_degree"] == {1: 3, 2: 4, 3: 2}


def test_onf2_census_and_big_m(coord):
    inst = generate_instance("nf", 3, 3, 4)
    model = fm.build(inst, "onf2")
    assert model.census()["binary"] == 6
    for f in inst.followers:
        for j in range(3):
            con = next(c for c in model.constraints if c.tag == f"regret deactivation f={f} j={j}")
            coef = con.terms[(model.var(f"s_{f}_{j}"),)]
            assert -coef == pytest.approx(gc.big_m(inst, f))


def test_onf3_census():
    inst = generate_instance("nf", 3, 3, 2)
    base = fm.build(inst, "onf2").census()
    c = fm.build(inst, "onf3").census()
    ml, m1, m2 = 3, 3, 3
    assert c["continuous"] - base["continuous"] == ml * (m1 + m2) + ml * m1 * m2
    assert c["objective_degree"] == 1
    assert c["constraints_by_degree"][2] == ml * (m1 + m2) + ml * m1 * m2


def test_opm2_has_no_nonlinear_rows(mp):
    model = fm.build(mp, "opm2")
    assert model.nonlinear_tags() == [] and model.objective_degree == 2


def test_wrong_class(coord, mp):
    for fid in NF_FIDS + ["onf_lpfm3"]:
        with pytest.raises(WrongGameClassError):
            fm.build(mp, fid)
    for fid in PM_FIDS + ["opm_lpfm3"]:
        with pytest.raises(WrongGameClassError):
            fm.build(coord, fid)


def test_pessimistic_only_for_oracles(coord):
    with pytest.raises(ValueError):
        fm.build(coord, "onf3", mode="pessimistic")


@pytest.mark.parametrize("fid", NF_FIDS + ["onf_lpfm3"])
def test_coord_optimum_is_ten(coord, fid):
    sol = solve_formulation(coord, fid)
    assert sol.status == OPTIMAL and sol.certified
    assert sol.value == pytest.approx(10.0, abs=1e-6)


def test_onf2_support_binaries_on_coord(coord):
    model = fm.build(coord, "onf2")
    res = solve_model(model, coord)
    x = dict(zip(model.names, res.x))
    assert x["s_0_0"] == 0 and x["s_0_1"] == 1 and x["s_1_0"] == 0 and x["s_1_1"] == 1


@pytest.mark.parametrize("fid", NF_FIDS)
def test_mp_embedded_as_nf(mp_nf, fid):
    sol = solve_formulation(mp_nf, fid)
    assert sol.value == pytest.approx(2.0, abs=1e-6)
    np.testing.assert_allclose(sol.delta, [1.0, 0.0], atol=1e-6)


@pytest.mark.parametrize("fid", PM_FIDS + ["opm_lpfm3"])
def test_mp_pm_optimum_is_two(mp, fid):
    assert solve_formulation(mp, fid).value == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("fid", NF_FIDS)
def test_constant_game(fid):
    assert solve_formulation(catalog.constant(value=4.5), fid).value == pytest.approx(4.5, abs=1e-6)


def test_constant_follower_payoffs_give_leader_max():
    rng = np.random.default_rng(3)
    leader = rng.uniform(0, 10, (2, 2, 2))
    f = np.full((2, 2, 2), 2.0)
    inst = LeaderFollowerInstance(NormalFormGame([f, f.copy(), leader]))
    sol = solve_formulation(inst, "onf2")
    assert sol.value == pytest.approx(leader.max(), abs=1e-6)


@pytest.mark.parametrize("fid", PM_FIDS)
def test_pm_constant_leader_payoff(fid):
    c = 3.0
    rng = np.random.default_rng(5)
    pw = {(i, j): rng.uniform(0, 5, (2, 2)) for i in range(3) for j in range(3) if i != j}
    pw[(2, 0)] = np.full((2, 2), c)
    pw[(2, 1)] = np.full((2, 2), c)
    inst = LeaderFollowerInstance(PolymatrixGame([2, 2, 2], pw))
    assert solve_formulation(inst, fid).value == pytest.approx(2 * c, abs=1e-6)


def test_y_sums_and_products_on_lift(coord):
    model = fm.build(coord, "onf3")
    x = fm.lift(model, coord, [1.0, 0.0], [[0.5, 0.5], [1.0, 0.0]])
    vals = dict(zip(model.names, x))
    y1 = np.array([[vals[f"y_0_{i}_{j}"] for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(y1, [[0.5, 0.5], [0.0, 0.0]])
    for f in (0, 1):
        assert sum(vals[f"y_{f}_{i}_{j}"] for i in range(2) for j in range(2)) == pytest.approx(1.0)


@pytest.mark.parametrize("kind, fids", [("nf", NF_FIDS + ["onf_lpfm3"]), ("pm", PM_FIDS + ["opm_lpfm3"])])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_completeness_every_ne_is_feasible(kind, fids, seed):
    inst = generate_instance(kind, 3, 3, seed)
    rng = np.random.default_rng(seed)
    for fid in fids:
        model = fm.build(inst, fid)
        pure = model.metadata is not None and FormulationId(fid).leader_pure
        for _ in range(3):
            delta = np.eye(3)[rng.integers(3)] if pure else rng.dirichlet(np.ones(3))
            for rec in equilibria_at(inst, delta):
                ev = model.evaluate(fm.lift(model, inst, delta, rec.rhos))
                assert ev.max_violation <= 1e-7, fid
                assert ev.objective == pytest.approx(rec.leader_value, abs=1e-7)


@pytest.mark.parametrize("kind, fids", [("nf", NF_FIDS), ("pm", PM_FIDS)])
def test_soundness_of_solver_points(kind, fids):
    inst = generate_instance(kind, 3, 2, 11)
    for fid in fids:
        model = fm.build(inst, fid)
        res = solve_model(model, inst)
        sol = fm.extract_solution(model, res.x, inst)
        assert sol.max_regret <= 1e-6
        assert sol.leader_value == pytest.approx(model.evaluate(res.x).objective, abs=1e-6)


def test_extract_renormalizes(coord):
    model = fm.build(coord, "onf3")
    x = fm.lift(model, coord, [0.5, 0.5], [[1.0, 0.0], [1.0, 0.0]])
    x[model.var("r_0_0")] = 1.0 + 1e-10
    sol = fm.extract_solution(model, x, coord)
    assert sol.certified and sol.leader_value == pytest.approx(10.0)
    assert sol.rhos[0].sum() == pytest.approx(1.0, abs=1e-15)


def test_extract_certification_failure(coord):
    model = fm.build(coord, "onf3")
    x = fm.lift(model, coord, [0.5, 0.5], [[0.5, 0.5], [0.65, 0.35]])
    with pytest.raises(CertificationError) as err:
        fm.extract_solution(model, x, coord)
    assert err.value.violation == pytest.approx(0.3)


def test_extract_exact_point_coord(coord):
    model = fm.build(coord, "onf3")
    sol = fm.extract_solution(model, fm.lift(model, coord, [0.2, 0.8], [[1, 0], [1, 0]]), coord)
    assert sol.certified and sol.leader_value == 10.0
    assert "v_0" in sol.auxiliaries


def test_support_binary_implies_zero_probability():
    inst = generate_instance("nf", 3, 3, 6)
    model = fm.build(inst, "onf3")
    sol = solve_formulation(inst, "onf3")
    res = solve_model(model, inst)
    vals = dict(zip(model.names, res.x))
    for f in inst.followers:
        for j in range(3):
            if vals[f"s_{f}_{j}"] > 0.5:
                assert vals[f"r_{f}_{j}"] <= 1e-9
    assert sol.certified


@pytest.mark.parametrize("i, rho", [(0, 0.7), (1, 0.0), (0, 0.0), (1, 1.0)])
def test_mccormick_envelope_pins_products(coord, i, rho):
    model = fm.build(coord, "onf_lpfm3")
    delta = np.eye(2)[i]
    x = fm.lift(model, coord, delta, [[rho, 1 - rho], [0.5, 0.5]])
    col = model.var(f"y_0_{i}_0")
    assert x[col] == pytest.approx(rho)
    rows = [k for k, c in enumerate(model.constraints) if c.tag.startswith("envelope")]
    for wrong in (x[col] + 0.05, max(x[col] - 0.05, -0.05)):
        y = x.copy()
        y[col] = wrong
        viol = model.evaluate(y).violations[rows]
        assert viol.max() > 0


def test_oracle_models(coord, mp):
    for mode in ("optimistic", "pessimistic"):
        model = fm.build(coord, "oracle_nf", delta=[0.3, 0.7], mode=mode)
        assert model.metadata["mode"] == mode
        assert model.direction == ("max" if mode == "optimistic" else "min")
    pm = fm.build(mp, "oracle_pm", delta=[0.2, 0.8])
    assert pm.degree == 1 and pm.binaries
    nf = fm.build(coord, "oracle_nf", delta=[0.2, 0.8])
    assert nf.constraint_degree == 2 and nf.objective_degree == 1
