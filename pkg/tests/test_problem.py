import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppi.dispatch import build_edpoz, bundled_instances
from ppi.problem import (
    CallbackProblem,
    EqConstraint,
    IneqConstraint,
    NlpdfrProblem,
    ProblemError,
    QuadraticObjective,
    VariableSpec,
    dumps,
    evaluate,
    load,
    loads,
    problem_to_dict,
    save,
    validate,
)


def two_var(Q=((0.1, 0.0), (0.0, 0.05)), zones=((10.0, 20.0), (30.0, 50.0))):
    return NlpdfrProblem(
        variables=(VariableSpec("p", zones=zones), VariableSpec("x", bounds=(10.0, 60.0))),
        objective=QuadraticObjective(0.0, (2.0, 3.0), Q),
        eq_constraints=(EqConstraint((1.0, 1.0), 60.0),),
        ineq_constraints=(IneqConstraint((1.0, 0.0), 45.0),),
    )


class TestValidate:
    def test_well_formed(self):
        assert validate(two_var()) == []

    def test_touching_zones(self):
        problems = validate(two_var(zones=((10.0, 20.0), (20.0, 50.0))))
        assert len(problems) == 1
        assert "zones" in problems[0] and "upper_1 < lower_2" in problems[0]

    def test_asymmetric_quadratic(self):
        problems = validate(two_var(Q=((0.1, 1e-3), (0.0, 0.05))))
        assert len(problems) == 1
        assert "objective.Q" in problems[0] and "symmetric" in problems[0]

    def test_dimension_and_name_errors(self):
        bad = NlpdfrProblem(
            variables=(VariableSpec("a", bounds=(0, 1)), VariableSpec("a", bounds=(2, 1))),
            objective=QuadraticObjective(0.0, (1.0,), ((0.0, 0.0), (0.0, 0.0))),
            eq_constraints=(EqConstraint((1.0,), 0.0),),
        )
        problems = validate(bad)
        assert any("duplicate" in p for p in problems)
        assert any("lower exceeds upper" in p for p in problems)
        assert any("objective.c" in p for p in problems)
        assert any("eq_constraints[0].a" in p for p in problems)

    def test_bounds_and_zones_together(self):
        p = NlpdfrProblem(
            variables=(VariableSpec("a", bounds=(0, 5), zones=((0, 1), (2, 3))),),
            objective=QuadraticObjective(0.0, (0.0,), ((0.0,),)),
        )
        assert any("not both" in v for v in validate(p))

    def test_build_edpoz_always_valid(self):
        for system in bundled_instances().values():
            assert validate(build_edpoz(system)) == []


class TestEvaluate:
    def test_objective_at_twenty(self):
        p = NlpdfrProblem(
            variables=(VariableSpec("p", bounds=(0, 100)),),
            objective=QuadraticObjective(0.0, (2.0,), ((0.1,),)),
        )
        assert evaluate(p, {"p": 20.0}).objective == pytest.approx(80.0, abs=1e-12)

    def test_origin(self):
        ev = evaluate(two_var(), {"p": 0.0, "x": 0.0})
        assert ev.objective == 0.0
        assert ev.eq_residuals == [-60.0]
        assert ev.ineq_slacks == [45.0]

    def test_zone_feasibility(self):
        assert not evaluate(two_var(), {"p": 25.0, "x": 35.0}).zone_feasible
        assert evaluate(two_var(), {"p": 20.0, "x": 40.0}).zone_feasible

    def test_missing_and_extra_variables(self):
        with pytest.raises(KeyError, match="missing"):
            evaluate(two_var(), {"p": 0.0})
        with pytest.raises(KeyError, match="unknown"):
            evaluate(two_var(), {"p": 0.0, "x": 0.0, "y": 1.0})

    def test_quadratic_equality(self):
        p = NlpdfrProblem(
            variables=(VariableSpec("a"), VariableSpec("b")),
            objective=QuadraticObjective(0.0, (0.0, 0.0), ((0.0, 0.0), (0.0, 0.0))),
            eq_constraints=(EqConstraint((1.0, 1.0), 3.0, ((1.0, 0.5), (0.5, 0.0))),),
        )
        # 1 + 2 + (1 + 2*0.5*1*2) - 3
        assert evaluate(p, {"a": 1.0, "b": 2.0}).eq_residuals == [pytest.approx(3.0)]

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=2), st.floats(-4, 4))
    def test_linear_residuals_scale(self, z, t):
        lin = NlpdfrProblem(
            variables=(VariableSpec("p"), VariableSpec("x")),
            objective=QuadraticObjective(0.0, (1.0, -2.0), ((0.0, 0.0), (0.0, 0.0))),
            eq_constraints=(EqConstraint((1.0, 3.0), 0.0),),
            ineq_constraints=(IneqConstraint((2.0, -1.0), 0.0),),
        )
        a = evaluate(lin, dict(zip(("p", "x"), z)))
        b = evaluate(lin, dict(zip(("p", "x"), [t * v for v in z])))
        assert b.eq_residuals[0] == pytest.approx(t * a.eq_residuals[0], abs=1e-9)
        assert b.ineq_slacks[0] == pytest.approx(t * a.ineq_slacks[0], abs=1e-9)
        assert b.objective == pytest.approx(t * a.objective, abs=1e-9)

    def test_callback_problem(self):
        cb = CallbackProblem(
            variables=(VariableSpec("u", bounds=(-5, 5)),),
            objective=lambda z: float(np.cos(z[0])),
            objective_gradient=lambda z: np.array([-np.sin(z[0])]),
            ineq=lambda z: np.array([z[0] ** 2 - 4.0]),
            ineq_jac=lambda z: np.array([[2 * z[0]]]),
        )
        ev = evaluate(cb, {"u": 1.0})
        assert ev.objective == pytest.approx(math.cos(1.0))
        assert ev.eq_residuals == []
        assert ev.ineq_slacks == [pytest.approx(3.0)]


class TestFiles:
    def test_round_trip_edpoz(self, tmp_path):
        problem = build_edpoz(bundled_instances()["ed2"])
        path = tmp_path / "ed2.json"
        save(problem, path)
        assert load(path) == problem

    def test_round_trip_with_infinite_bounds(self):
        p = NlpdfrProblem(
            variables=(VariableSpec("a", bounds=(-math.inf, 2.0)), VariableSpec("b")),
            objective=QuadraticObjective(1.5, (0.1, 0.2), ((1.0, 0.0), (0.0, 1.0))),
        )
        assert loads(dumps(p)) == p
        assert problem_to_dict(p)["variables"][0]["bounds"] == [None, 2.0]

    @given(st.lists(st.floats(-1e6, 1e6, allow_subnormal=False), min_size=3, max_size=3))
    def test_round_trip_is_exact(self, vals):
        c0, c1, q = vals
        p = NlpdfrProblem(
            variables=(VariableSpec("a", zones=((0.0, 1.0), (2.0, 3.0 + abs(q)))),),
            objective=QuadraticObjective(c0, (c1,), ((q,),)),
        )
        assert loads(dumps(p)) == p

    def test_negative_zone_width_rejected(self):
        doc = problem_to_dict(two_var())
        doc["variables"][0]["zones"] = [[10.0, 5.0], [30.0, 50.0]]
        with pytest.raises(ProblemError) as err:
            loads(json.dumps(doc))
        assert any("width must be positive" in v for v in err.value.violations)

    def test_unknown_field_rejected(self):
        doc = problem_to_dict(two_var())
        doc["objective"]["scale"] = 2.0
        with pytest.raises(ProblemError) as err:
            loads(json.dumps(doc))
        assert any("objective.scale" in v for v in err.value.violations)

    def test_parse_error_has_position(self):
        with pytest.raises(ProblemError, match="line 2, column"):
            loads('{"variables": [],\n  "objective": }', source="broken.json")

    def test_save_refuses_invalid(self, tmp_path):
        with pytest.raises(ProblemError):
            save(two_var(Q=((0.1, 1.0), (0.0, 0.05))), tmp_path / "x.json")

    def test_boxing_replaces_zones(self):
        boxed = two_var().with_zones_boxed({"p": 2})
        assert boxed.variables[0] == VariableSpec("p", bounds=(30.0, 50.0))
        assert boxed.variables[1] == two_var().variables[1]
