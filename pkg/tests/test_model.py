import numpy as np
import pytest

from lfen import catalog
from lfen import formulations as fm
from lfen.exceptions import ModelError
from lfen.model import BINARY, Model


def xy_model():
    m = Model("xy")
    m.add_variable("x", 0, 1)
    m.add_variable("y", 0, 1)
    m.add_constraint([(1, "x"), (1, "y")], "=", 1, "sum")
    m.set_objective([(1, ("x", "y"))], "max")
    return m


def test_linear_model_degree():
    m = Model()
    m.add_variable("x", 0, 1)
    m.add_constraint([(1, "x")], "<=", 0.5, "cap")
    m.set_objective([(1, "x")])
    assert m.degree == 1


def test_square_degree():
    m = Model()
    m.add_variable("x", 0, 1)
    m.set_objective([(1, ("x", "x"))])
    assert m.degree == 2


def test_undeclared_reference_names_variable():
    m = Model()
    m.add_variable("x")
    with pytest.raises(ModelError, match="'q'"):
        m.add_constraint([(1, "q")], "<=", 1)


def test_duplicate_name():
    m = Model()
    m.add_variable("x")
    with pytest.raises(ModelError, match="duplicate"):
        m.add_variable("x")


def test_bad_bounds_and_kinds():
    m = Model()
    with pytest.raises(ModelError):
        m.add_variable("x", 2, 1)
    with pytest.raises(ModelError):
        m.add_variable("y", kind="integer")
    i = m.add_variable("s", -3, 7, BINARY)
    assert (m.variables[i].lower, m.variables[i].upper) == (0.0, 1.0)


def test_evaluate_examples():
    m = xy_model()
    ev = m.evaluate({"x": 0.5, "y": 0.5})
    assert ev.objective == 0.25 and ev.max_violation == 0.0
    ev = m.evaluate({"x": 1.0, "y": 1.0})
    assert ev.violations[0] == 1.0


def test_integrality_violation_reported():
    m = Model()
    m.add_variable("s", kind=BINARY)
    m.set_objective([(1, "s")])
    ev = m.evaluate([0.3])
    assert ev.integrality["s"] == pytest.approx(0.3)
    assert ev.max_violation == pytest.approx(0.3)


def test_missing_assignment_entry():
    with pytest.raises(ModelError, match="y"):
        xy_model().evaluate({"x": 1.0})


def test_canonical_merge_and_drop():
    m = Model()
    m.add_variable("x")
    m.add_variable("y")
    m.add_constraint([(1, ("y", "x")), (2, ("x", "y")), (1e-17, "x"), (1, "y")], "<=", 1)
    assert m.constraints[0].terms == {(1,): 1.0, (0, 1): 3.0}


def test_frozen_model_rejects_changes():
    m = xy_model().freeze()
    with pytest.raises(ModelError):
        m.add_variable("z")


def test_exact_integer_evaluation():
    m = Model()
    for v in "abc":
        m.add_variable(v, -10, 10)
    m.add_constraint([(3, ("a", "b", "c")), (-7, ("a", "a")), (5, "c")], "<=", 0)
    m.set_objective([(2, ("a", "b")), (1, "c")])
    x = np.array([0.5, 0.25, -1.5])
    ev = m.evaluate(x)
    # hand computation at dyadic points is exact in binary floating point
    assert ev.objective == 2 * 0.5 * 0.25 - 1.5
    assert m.constraint_lhs(x)[0] == 3 * 0.5 * 0.25 * -1.5 - 7 * 0.25 + 5 * -1.5


@pytest.mark.parametrize("fid, objective, constraints", [
    ("onf1", 3, 3), ("onf2", 3, 2), ("onf3", 1, 2), ("onf_lpfm3", 1, 2),
])
def test_nf_degrees(coord, fid, objective, constraints):
    model = fm.build(coord, fid)
    assert model.objective_degree == objective
    assert model.constraint_degree == constraints


@pytest.mark.parametrize("fid, degree", [("opm1", 2), ("opm2", 2), ("opm3", 2), ("opm_lpfm3", 1)])
def test_pm_degrees(mp, fid, degree):
    assert fm.build(mp, fid).degree == degree


def test_onf3_overall_degree_two(coord):
    assert fm.build(coord, "onf3").degree == 2
