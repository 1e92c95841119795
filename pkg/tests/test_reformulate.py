import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppi.core import ppi_eval
from ppi.dispatch import build_edpoz, bundled_instances
from ppi.gradcheck import central_difference, relative_error
from ppi.problem import (
    EqConstraint,
    NlpdfrProblem,
    ProblemError,
    QuadraticObjective,
    VariableSpec,
)
from ppi.reformulate import (
    ZoneMatchError,
    build_equivalent,
    eval_extended,
    extract_solution,
    lift,
)


def small():
    return NlpdfrProblem(
        variables=(VariableSpec("p", zones=((0.0, 1.0), (2.0, 3.0))),
                   VariableSpec("x", bounds=(-1.0, 4.0))),
        objective=QuadraticObjective(0.5, (1.0, -1.0), ((1.0, 0.25), (0.25, 2.0))),
        eq_constraints=(EqConstraint((1.0, 1.0), 3.0, ((0.0, 0.1), (0.1, 0.0))),),
    )


class TestBuild:
    def test_counts_one_zoned(self):
        eq = build_equivalent(small())
        assert eq.extended_dim == 4
        assert len(eq.ppi_constraints) == 1
        assert eq.alpha_layout == {"p": slice(2, 4)}

    def test_no_zoned_variables(self):
        base = NlpdfrProblem(
            variables=(VariableSpec("x", bounds=(0, 1)),),
            objective=QuadraticObjective(0.0, (1.0,), ((0.0,),)),
        )
        eq = build_equivalent(base)
        assert eq.extended_dim == 1
        assert eq.ppi_constraints == ()
        assert eq.n_alpha == 0

    def test_three_units_two_bands(self):
        eq = build_equivalent(build_edpoz(bundled_instances()["ed3poz2"]))
        assert eq.n_alpha == 9
        assert len(eq.ppi_constraints) == 3
        covered = sorted(i for row in eq.ppi_constraints for i in range(*row.alpha.indices(99)))
        assert covered == list(range(3, 12))

    def test_invalid_problem_rejected(self):
        bad = NlpdfrProblem(
            variables=(VariableSpec("p", zones=((0.0, 1.0), (1.0, 3.0))),),
            objective=QuadraticObjective(0.0, (0.0,), ((0.0,),)),
        )
        with pytest.raises(ProblemError):
            build_equivalent(bad)

    def test_box(self):
        eq = build_equivalent(small())
        np.testing.assert_array_equal(eq.lower_bounds(), [0.0, -1.0, 0.0, 0.0])
        np.testing.assert_array_equal(eq.upper_bounds(), [3.0, 4.0, 1.0, 1.0])


class TestEvalExtended:
    def test_ppi_row_normalized_at_first_image(self):
        eq = build_equivalent(small())
        ev = eval_extended(eq, [0.3, 1.0, 0.3, 0.7])
        assert abs(ev.ppi_values[0]) <= 1e-15
        assert abs(ev.ppi_jac[0, 0]) == pytest.approx(1.0, abs=1e-12)
        assert ev.ppi_jac[0, 1] == 0.0

    def test_objective_ignores_alpha(self):
        eq = build_equivalent(small())
        ev = eval_extended(eq, [2.5, 1.0, 0.1, 0.9])
        np.testing.assert_array_equal(ev.objective_grad[2:], [0.0, 0.0])
        np.testing.assert_array_equal(ev.eq_jac[:, 2:], [[0.0, 0.0]])

    @given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
    def test_finite_differences(self, u):
        eq = build_equivalent(small())
        w = np.array([0.0 + 3.0 * u[0], -1.0 + 5.0 * u[1], 0.02 + 0.96 * u[2], 0.02 + 0.96 * u[3]])
        d = [w[2], 2.0 + w[3]]
        if min(abs(w[0] - di) for di in d) < 1e-3:
            return
        ev = eval_extended(eq, w)

        def rows(y):
            e = eval_extended(eq, y)
            return np.concatenate([[e.objective], e.eq_values, e.ppi_values])

        analytic = np.vstack([ev.objective_grad, ev.eq_jac, ev.ppi_jac])
        assert relative_error(analytic, central_difference(rows, w)) <= 1e-5

    def test_rejects_bad_points(self):
        eq = build_equivalent(small())
        with pytest.raises(ValueError, match="coordinates"):
            eval_extended(eq, [0.0, 0.0, 0.5])
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            eval_extended(eq, [0.0, 0.0, 0.5, 1.2])


class TestLiftExtract:
    def test_extract_zone_two(self):
        eq = build_equivalent(small())
        ex = extract_solution(eq, [2.4, 1.0, 0.5, 0.4])
        assert ex.zones["p"].zone_index == 2
        assert ex.zones["p"].alpha == pytest.approx(0.4)
        assert ex.assignment == {"p": 2.4, "x": 1.0}

    def test_extract_prohibited(self):
        eq = build_equivalent(small())
        with pytest.raises(ZoneMatchError):
            extract_solution(eq, [1.5, 1.0, 0.5, 0.5])

    def test_unzoned_passes_through(self):
        eq = build_equivalent(small())
        assert extract_solution(eq, [0.5, -0.75, 0.5, 0.5]).assignment["x"] == -0.75

    @given(st.floats(0.0, 1.0), st.booleans(), st.floats(-1.0, 4.0))
    def test_lift_transfer(self, t, upper, x):
        eq = build_equivalent(small())
        p = (2.0 + t) if upper else t
        point = {"p": p, "x": x}
        w = lift(eq, point)
        base = eq.base
        ev = eval_extended(eq, w)
        assert abs(ev.ppi_values[0]) <= 1e-12
        assert ev.objective == base.objective_value(base.to_vector(point))
        np.testing.assert_array_equal(ev.eq_values, base.eq_values(base.to_vector(point)))

    @given(st.floats(1.0, 2.0), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2))
    def test_feasibility_transfer(self, p, alpha):
        eq = build_equivalent(small())
        if abs(ppi_eval(eq.ppi_constraints[0].zone, p, alpha).value) <= 1e-9:
            ex = extract_solution(eq, [p, 0.0, *alpha], tol=1e-7)
            assert ex.zones["p"].zone_index in (1, 2)

    def test_objective_invariance(self):
        eq = build_equivalent(small())
        w = np.array([2.25, 0.5, 0.3, 0.25])
        ex = extract_solution(eq, w)
        assert eval_extended(eq, w).objective == eq.base.objective_value(
            eq.base.to_vector(ex.assignment))
