import random

import pytest

from ormind.errors import MissingAssignmentError
from ormind.model import (
    LinExpr,
    ModelIR,
    Objective,
    ObjSense,
    Sense,
    VariableDef,
    VarKind,
    evaluate,
)
from ormind.parsing import parse_constraint, parse_linear_expr
from ormind.solver import (
    SolveStatus,
    SolverOptions,
    check_feasibility,
    solve_milp,
)

from helpers import enumerate_feasible_values, enumerate_oracle, random_integer_model


def _fishery_model():
    names = frozenset({"dog_trips", "truck_trips"})
    return ModelIR(
        (VariableDef("dog_trips", VarKind.INTEGER, 0.0),
         VariableDef("truck_trips", VarKind.INTEGER, 0.0)),
        (parse_constraint("50*dog_trips + 100*truck_trips <= 1000", names, name="budget"),
         parse_constraint("dog_trips <= truck_trips - 1", names, name="fewer_dog_trips")),
        Objective(ObjSense.MAX, parse_linear_expr("100*dog_trips + 300*truck_trips", names)),
    )


class TestSolveMilp:
    def test_pharmacy_exact_optimum(self, pharmacy_model):
        res = solve_milp(pharmacy_model)
        assert res.status is SolveStatus.OPTIMAL
        assert res.objective == pytest.approx(735.0, abs=1e-6)
        assert res.assignment == {"painkillers": 50.0, "sleeping_pills": 117.0}

    def test_fishery_strict_inequality_encoding(self):
        res = solve_milp(_fishery_model())
        assert res.status is SolveStatus.OPTIMAL
        assert res.objective == pytest.approx(3000.0, abs=1e-6)

    def test_infeasible_bounds_via_constraints(self):
        names = frozenset({"x"})
        model = ModelIR(
            (VariableDef("x", VarKind.INTEGER, 0.0),),
            (parse_constraint("x >= 1", names, name="a"),
             parse_constraint("x <= 0", names, name="b")),
            Objective(ObjSense.MIN, LinExpr({"x": 1.0})),
        )
        assert solve_milp(model).status is SolveStatus.INFEASIBLE

    def test_unbounded_integer_model(self):
        model = ModelIR(
            (VariableDef("x", VarKind.INTEGER, 0.0),),
            (),
            Objective(ObjSense.MAX, LinExpr({"x": 5.0})),
        )
        assert solve_milp(model).status is SolveStatus.UNBOUNDED

    def test_no_integer_point_between_bounds(self):
        # 2x = 1 has a feasible relaxation but no integer solution
        names = frozenset({"x"})
        model = ModelIR(
            (VariableDef("x", VarKind.INTEGER, 0.0, 5.0),),
            (parse_constraint("2*x = 1", names, name="odd"),),
            Objective(ObjSense.MIN, LinExpr({"x": 1.0})),
        )
        assert solve_milp(model).status is SolveStatus.INFEASIBLE

    def test_continuous_only_model_is_plain_lp(self):
        names = frozenset({"a", "b"})
        model = ModelIR(
            (VariableDef("a", VarKind.CONTINUOUS, 0.0), VariableDef("b", VarKind.CONTINUOUS, 0.0)),
            (parse_constraint("a + 2*b >= 8", names, name="c1"),
             parse_constraint("3*a + b >= 9", names, name="c2")),
            Objective(ObjSense.MIN, parse_linear_expr("2*a + 3*b", names)),
        )
        res = solve_milp(model)
        assert res.objective == pytest.approx(13.0)
        assert res.stats.nodes == 1

    def test_integer_assignment_is_snapped_exactly(self, pharmacy_model):
        res = solve_milp(pharmacy_model)
        assert res.assignment["sleeping_pills"] == 117.0
        assert res.assignment["sleeping_pills"].is_integer()

    def test_objective_equals_evaluation(self, pharmacy_model):
        res = solve_milp(pharmacy_model)
        assert res.objective == pytest.approx(
            evaluate(pharmacy_model.objective.expr, res.assignment), rel=1e-9
        )

    def test_node_limit_error(self, pharmacy_model):
        res = solve_milp(pharmacy_model, SolverOptions(node_limit=1))
        assert res.status is SolveStatus.ERROR
        assert "node limit" in res.message

    def test_determinism_including_stats(self, pharmacy_model):
        a = solve_milp(pharmacy_model)
        b = solve_milp(pharmacy_model)
        assert a.status == b.status
        assert a.objective == b.objective
        assert a.assignment == b.assignment
        assert (a.stats.pivots, a.stats.nodes) == (b.stats.pivots, b.stats.nodes)

    def test_optimal_solution_passes_feasibility_check(self, pharmacy_model):
        res = solve_milp(pharmacy_model)
        assert check_feasibility(pharmacy_model, res.assignment, 1e-2) == []


class TestCheckFeasibility:
    def test_pharmacy_partial_solution_violates_ratio_only(self, pharmacy_model):
        violations = check_feasibility(
            pharmacy_model, {"painkillers": 50, "sleeping_pills": 0}, 1e-2
        )
        assert len(violations) == 1
        v = violations[0]
        assert v.name == "ratio"
        assert v.achieved == pytest.approx(-35.0)
        assert v.sense is Sense.GE

    def test_le_violation_reports_achieved_and_slack(self):
        names = frozenset({"x", "y"})
        model = ModelIR(
            (VariableDef("x", VarKind.CONTINUOUS, 0.0), VariableDef("y", VarKind.CONTINUOUS, 0.0)),
            (parse_constraint("2*x + 3*y <= 100", names, name="c1"),),
            Objective(ObjSense.MIN, LinExpr({"x": 1.0})),
        )
        violations = check_feasibility(model, {"x": 30, "y": 20}, 1e-2)
        assert len(violations) == 1
        assert violations[0].achieved == 120.0
        assert violations[0].required == 100.0
        assert violations[0].slack == pytest.approx(20.0)

    def test_bound_violations(self):
        model = ModelIR(
            (VariableDef("x", VarKind.CONTINUOUS, 0.0, 10.0),),
            (),
            Objective(ObjSense.MIN, LinExpr({"x": 1.0})),
        )
        low = check_feasibility(model, {"x": -1.0}, 1e-2)
        assert [v.name for v in low] == ["x.lb"]
        assert low[0].slack == pytest.approx(1.0)
        high = check_feasibility(model, {"x": 11.0}, 1e-2)
        assert [v.name for v in high] == ["x.ub"]

    def test_integrality_violation(self):
        model = ModelIR(
            (VariableDef("n", VarKind.INTEGER, 0.0, 10.0),),
            (),
            Objective(ObjSense.MIN, LinExpr({"n": 1.0})),
        )
        violations = check_feasibility(model, {"n": 2.5}, 1e-2)
        assert [v.name for v in violations] == ["n.int"]
        assert violations[0].slack == pytest.approx(0.5)
        assert check_feasibility(model, {"n": 2.0005}, 1e-2) == []

    def test_epsilon_tolerates_small_breaches(self):
        names = frozenset({"x"})
        model = ModelIR(
            (VariableDef("x", VarKind.CONTINUOUS, 0.0),),
            (parse_constraint("x <= 5", names, name="cap"),),
            Objective(ObjSense.MIN, LinExpr({"x": 1.0})),
        )
        assert check_feasibility(model, {"x": 5.005}, 1e-2) == []
        assert len(check_feasibility(model, {"x": 5.1}, 1e-2)) == 1

    def test_missing_assignment(self, pharmacy_model):
        with pytest.raises(MissingAssignmentError):
            check_feasibility(pharmacy_model, {"painkillers": 50}, 1e-2)

    def test_eq_violation_two_sided(self):
        names = frozenset({"x"})
        model = ModelIR(
            (VariableDef("x", VarKind.CONTINUOUS, 0.0),),
            (parse_constraint("x = 4", names, name="fix"),),
            Objective(ObjSense.MIN, LinExpr({"x": 1.0})),
        )
        assert len(check_feasibility(model, {"x": 4.2}, 1e-2)) == 1
        assert len(check_feasibility(model, {"x": 3.8}, 1e-2)) == 1
        assert check_feasibility(model, {"x": 4.0}, 1e-2) == []


class TestOracleAgreement:
    """Exhaustive-enumeration cross-check on random small integer programs."""

    def test_sample_against_enumeration(self):
        rng = random.Random(20240613)
        disagreements = []
        for i in range(60):
            model = random_integer_model(rng)
            oracle_status, oracle_obj = enumerate_oracle(model)
            res = solve_milp(model)
            if res.status.value != oracle_status:
                disagreements.append((i, res.status.value, oracle_status))
            elif oracle_status == "Optimal" and abs(res.objective - oracle_obj) > 1e-6:
                disagreements.append((i, res.objective, oracle_obj))
        assert disagreements == []

    def test_weak_duality_on_feasible_points(self):
        rng = random.Random(99)
        checked = 0
        while checked < 10:
            model = random_integer_model(rng)
            values = enumerate_feasible_values(model)
            if values.size == 0:
                continue
            res = solve_milp(model)
            assert res.status is SolveStatus.OPTIMAL
            # no enumerated feasible value beats the reported optimum
            if model.objective.sense is ObjSense.MIN:
                assert (values >= res.objective - 1e-6).all()
            else:
                assert (values <= res.objective + 1e-6).all()
            checked += 1
