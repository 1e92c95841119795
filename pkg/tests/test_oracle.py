import numpy as np
import pytest

from ppi.core import ppi_eval, recover_alpha
from ppi.dispatch import SystemSpec, build_edpoz, bundled_instances
from ppi.oracle import (
    EnumerationCapError,
    NoFeasibleCombination,
    enumerate_combinations,
    oracle_best,
    solve_combination,
)
from ppi.problem import NlpdfrProblem, QuadraticObjective, VariableSpec


def ed2():
    return build_edpoz(bundled_instances()["ed2"])


def zoned_problem(n_vars, n_zones):
    zones = tuple((3.0 * i, 3.0 * i + 1.0) for i in range(n_zones))
    return NlpdfrProblem(
        variables=tuple(VariableSpec(f"v{k:02d}", zones=zones) for k in range(n_vars)),
        objective=QuadraticObjective(0.0, (0.0,) * n_vars,
                                     tuple(tuple(0.0 for _ in range(n_vars)) for _ in range(n_vars))),
    )


class TestEnumerate:
    def test_three_by_three(self):
        combos = enumerate_combinations(build_edpoz(bundled_instances()["ed3poz2"]))
        assert len(combos) == 27
        assert combos[0] == {"g1": 1, "g2": 1, "g3": 1}
        assert combos[1] == {"g1": 1, "g2": 1, "g3": 2}
        assert combos[-1] == {"g1": 3, "g2": 3, "g3": 3}

    def test_lexicographic_by_name(self):
        p = NlpdfrProblem(
            variables=(VariableSpec("b", zones=((0, 1), (2, 3))), VariableSpec("a", zones=((0, 1), (2, 3)))),
            objective=QuadraticObjective(0.0, (0.0, 0.0), ((0.0, 0.0), (0.0, 0.0))),
        )
        assert [tuple(c.items()) for c in enumerate_combinations(p)] == [
            (("a", 1), ("b", 1)), (("a", 1), ("b", 2)), (("a", 2), ("b", 1)), (("a", 2), ("b", 2)),
        ]

    def test_no_zoned_variables(self):
        p = NlpdfrProblem(variables=(VariableSpec("x", bounds=(0, 1)),),
                          objective=QuadraticObjective(0.0, (1.0,), ((0.0,),)))
        assert enumerate_combinations(p) == [{}]

    def test_cap(self):
        with pytest.raises(EnumerationCapError):
            enumerate_combinations(zoned_problem(17, 3))


class TestSolveCombination:
    def test_zone_one(self):
        r = solve_combination(ed2(), {"g1": 1})
        assert r.feasible
        assert r.point["g1"] == pytest.approx(20.0, abs=1e-5)
        assert r.point["g2"] == pytest.approx(40.0, abs=1e-5)
        assert r.objective == pytest.approx(280.0, abs=1e-3)

    def test_zone_two(self):
        r = solve_combination(ed2(), {"g1": 2})
        assert r.feasible
        assert r.point["g1"] == pytest.approx(30.0, abs=1e-5)
        assert r.objective == pytest.approx(285.0, abs=1e-3)

    def test_demand_above_capacity(self):
        base = bundled_instances()["ed2"]
        r = solve_combination(build_edpoz(SystemSpec(base.units, 200.0)), {"g1": 2})
        assert not r.feasible


class TestBest:
    def test_two_unit(self):
        best = oracle_best(ed2())
        assert best.combo == {"g1": 1}
        assert best.objective == pytest.approx(280.0, abs=1e-3)
        assert [r.index for r in best.table] == [0, 1]

    def test_single_combination_equals_solve_combination(self):
        p = NlpdfrProblem(variables=(VariableSpec("x", bounds=(1, 4)),),
                          objective=QuadraticObjective(0.0, (-2.0,), ((0.5,),)))
        best = oracle_best(p)
        direct = solve_combination(p, {})
        assert best.objective == direct.objective and best.point == direct.point

    def test_all_infeasible(self):
        base = bundled_instances()["ed2"]
        with pytest.raises(NoFeasibleCombination):
            oracle_best(build_edpoz(SystemSpec(base.units, 1e6)))

    @pytest.mark.parametrize("name", ["ed2", "ed3poz2", "ed3loss"])
    def test_winner_lifts_to_ppi_zero(self, name):
        problem = build_edpoz(bundled_instances()[name])
        best = oracle_best(problem)
        for v in problem.variables:
            if v.zoned:
                zone = v.zone_set()
                p = best.point[v.name]
                assert abs(ppi_eval(zone, p, recover_alpha(zone, p)).value) <= 1e-12

    def test_threads_do_not_change_table(self, monkeypatch):
        problem = build_edpoz(bundled_instances()["ed3poz2"])
        monkeypatch.setenv("PPI_THREADS", "1")
        a = oracle_best(problem)
        monkeypatch.setenv("PPI_THREADS", "3")
        b = oracle_best(problem)
        assert a == b

    def test_ties_go_to_lowest_index(self):
        # symmetric zones around the unconstrained optimum 0: both combos tie
        p = NlpdfrProblem(
            variables=(VariableSpec("u", zones=((-2.0, -1.0), (1.0, 2.0))),),
            objective=QuadraticObjective(0.0, (0.0,), ((1.0,),)),
        )
        best = oracle_best(p)
        assert best.table[0].objective == best.table[1].objective
        assert best.best_index == 0 and best.combo == {"u": 1}
        assert np.isclose(best.point["u"], -1.0)
