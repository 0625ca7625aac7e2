import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ormind.errors import (
    DocumentMalformedError,
    DuplicateNameError,
    ExprSyntaxError,
    MultipleRelationsError,
    UnknownVariableError,
)
from ormind.model import LinExpr, ModelIR, ObjSense, Sense, evaluate
from ormind.parsing import (
    extract_document,
    parse_constraint,
    parse_linear_expr,
    parse_model_document,
    render_expr,
    render_model_document,
)

VARS = frozenset({"painkillers", "sleeping_pills", "x", "y", "z"})


class TestParseLinearExpr:
    def test_plain_terms(self):
        expr = parse_linear_expr("3*painkillers + 5*sleeping_pills", VARS)
        assert expr.terms == {"painkillers": 3.0, "sleeping_pills": 5.0}
        assert expr.constant == 0.0

    def test_zero_expression(self):
        expr = parse_linear_expr("0", VARS)
        assert expr.terms == {}
        assert expr.constant == 0.0

    def test_term_merging_and_constant(self):
        expr = parse_linear_expr("2*x + 3*x - 5", VARS)
        assert expr.terms == {"x": 5.0}
        assert expr.constant == -5.0

    def test_implicit_multiplication(self):
        assert parse_linear_expr("2x", VARS) == parse_linear_expr("2*x", VARS)

    def test_implicit_unit_coefficient(self):
        assert parse_linear_expr("x", VARS).terms == {"x": 1.0}

    def test_leading_minus(self):
        expr = parse_linear_expr("-x + 4", VARS)
        assert expr.terms == {"x": -1.0}
        assert expr.constant == 4.0

    def test_scaled_parenthesized_group(self):
        expr = parse_linear_expr("0.7*(x + y)", VARS)
        assert expr.terms == pytest.approx({"x": 0.7, "y": 0.7})

    def test_nested_groups(self):
        expr = parse_linear_expr("2*(x + 3*(y - 1))", VARS)
        assert expr.terms == {"x": 2.0, "y": 6.0}
        assert expr.constant == -6.0

    def test_cancellation_drops_zero_terms(self):
        expr = parse_linear_expr("x - x", VARS)
        assert expr.terms == {}

    def test_unknown_identifier(self):
        with pytest.raises(UnknownVariableError) as exc:
            parse_linear_expr("3*w", VARS)
        assert exc.value.name == "w"

    def test_syntax_error_position(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_linear_expr("3*x @ 4", VARS)
        assert exc.value.position == 4

    def test_division_rejected(self):
        with pytest.raises(ExprSyntaxError, match="division"):
            parse_linear_expr("x / 200", VARS)

    def test_number_times_number_rejected(self):
        with pytest.raises(ExprSyntaxError):
            parse_linear_expr("3 * 4", VARS)

    def test_trailing_garbage_rejected(self):
        with pytest.raises(ExprSyntaxError):
            parse_linear_expr("x + y for all y", VARS)

    def test_empty_text_rejected(self):
        with pytest.raises(ExprSyntaxError):
            parse_linear_expr("", VARS)

    def test_parameter_substitution(self):
        expr = parse_linear_expr("x + MaxBudget", VARS, {"MaxBudget": 1000.0})
        assert expr.terms == {"x": 1.0}
        assert expr.constant == 1000.0

    def test_scientific_notation(self):
        assert parse_linear_expr("1e2*x", VARS).terms == {"x": 100.0}


class TestParseConstraint:
    def test_simple_lower_bound(self):
        c = parse_constraint("painkillers >= 50", VARS)
        assert c.lhs.terms == {"painkillers": 1.0}
        assert c.sense is Sense.GE
        assert c.rhs == 50.0

    def test_self_comparison_folds_to_zero(self):
        c = parse_constraint("x <= x", VARS)
        assert c.lhs.terms == {}
        assert c.sense is Sense.LE
        assert c.rhs == 0.0

    def test_ratio_normalization(self):
        c = parse_constraint("sleeping_pills >= 0.7*(painkillers + sleeping_pills)", VARS)
        assert c.lhs.terms == pytest.approx({"sleeping_pills": 0.3, "painkillers": -0.7})
        assert c.sense is Sense.GE
        assert c.rhs == 0.0

    def test_constant_folding_into_rhs(self):
        c = parse_constraint("x + 5 <= y - 1", VARS)
        assert c.lhs.terms == {"x": 1.0, "y": -1.0}
        assert c.rhs == -6.0

    def test_equality(self):
        c = parse_constraint("x = 7", VARS)
        assert c.sense is Sense.EQ

    def test_multiple_relations(self):
        with pytest.raises(MultipleRelationsError):
            parse_constraint("1 <= x <= 5", VARS)

    def test_missing_relation(self):
        with pytest.raises(ExprSyntaxError, match="relation"):
            parse_constraint("x + y", VARS)

    def test_strict_inequality_rejected(self):
        with pytest.raises(ExprSyntaxError, match="strict"):
            parse_constraint("x < 5", VARS)


PHARMACY_DOC = json.dumps(
    {
        "variables": [
            {"name": "painkillers", "kind": "integer", "lower": 0, "upper": "inf"},
            {"name": "sleeping_pills", "kind": "integer", "lower": 0, "upper": "inf"},
        ],
        "constraints": [
            {"name": "min_painkillers", "expr": "painkillers >= 50"},
            {"name": "sleeping_ratio", "expr": "sleeping_pills >= 0.7*(painkillers + sleeping_pills)"},
            {"name": "morphine", "expr": "10*painkillers + 6*sleeping_pills <= 3000"},
        ],
        "objective": {"sense": "min", "expr": "3*painkillers + 5*sleeping_pills"},
    }
)


class TestParseModelDocument:
    def test_pharmacy_document(self):
        model = parse_model_document(PHARMACY_DOC)
        assert len(model.variables) == 2
        assert all(v.is_integer for v in model.variables)
        assert len(model.constraints) == 3
        assert model.objective.sense is ObjSense.MIN

    def test_empty_model_is_valid(self):
        doc = json.dumps(
            {"variables": [{"name": "x", "kind": "continuous"}],
             "constraints": [],
             "objective": {"sense": "min", "expr": "0"}}
        )
        model = parse_model_document(doc)
        assert model.constraints == ()

    def test_undeclared_variable_is_located(self):
        broken = json.loads(PHARMACY_DOC)
        del broken["variables"][1]  # drop sleeping_pills
        with pytest.raises(UnknownVariableError) as exc:
            parse_model_document(json.dumps(broken))
        assert exc.value.name == "sleeping_pills"
        assert exc.value.section == "constraints[1]"

    def test_code_fences_stripped(self):
        model = parse_model_document(f"```json\n{PHARMACY_DOC}\n```")
        assert len(model.constraints) == 3

    def test_surrounding_prose_stripped(self):
        model = parse_model_document(f"Sure! Here is the document:\n{PHARMACY_DOC}\nHope that helps.")
        assert len(model.variables) == 2

    def test_duplicate_variable_name(self):
        doc = json.dumps(
            {"variables": [{"name": "x", "kind": "integer"}, {"name": "x", "kind": "integer"}],
             "constraints": [],
             "objective": {"sense": "min", "expr": "x"}}
        )
        with pytest.raises(DuplicateNameError):
            parse_model_document(doc)

    def test_unnamed_constraints_get_positional_names(self):
        doc = json.dumps(
            {"variables": [{"name": "x", "kind": "integer", "lower": 0}],
             "constraints": [{"expr": "x <= 5"}, {"expr": "x >= 1"}],
             "objective": {"sense": "max", "expr": "x"}}
        )
        model = parse_model_document(doc)
        assert [c.name for c in model.constraints] == ["c1", "c2"]

    def test_not_json(self):
        with pytest.raises(DocumentMalformedError):
            parse_model_document("variables: x, y { nope")

    def test_no_braces_at_all(self):
        with pytest.raises(DocumentMalformedError):
            parse_model_document("I could not produce a model.")

    def test_missing_objective(self):
        with pytest.raises(DocumentMalformedError):
            parse_model_document('{"variables": [], "constraints": []}')

    def test_unknown_kind(self):
        doc = json.dumps(
            {"variables": [{"name": "x", "kind": "boolean"}], "constraints": [],
             "objective": {"sense": "min", "expr": "0"}}
        )
        with pytest.raises(DocumentMalformedError) as exc:
            parse_model_document(doc)
        assert exc.value.section == "variables[0]"

    def test_bad_bounds(self):
        doc = json.dumps(
            {"variables": [{"name": "x", "lower": 5, "upper": 1}], "constraints": [],
             "objective": {"sense": "min", "expr": "0"}}
        )
        with pytest.raises(DocumentMalformedError):
            parse_model_document(doc)

    def test_sense_synonyms(self):
        doc = json.dumps(
            {"variables": [{"name": "x", "lower": 0}], "constraints": [],
             "objective": {"sense": "Maximize", "expr": "x"}}
        )
        assert parse_model_document(doc).objective.sense is ObjSense.MAX

    def test_parameter_binding(self):
        doc = json.dumps(
            {"variables": [{"name": "x", "kind": "integer", "lower": 0}],
             "constraints": [{"name": "cap", "expr": "x <= Cap"}],
             "objective": {"sense": "max", "expr": "x"}}
        )
        model = parse_model_document(doc, parameters={"Cap": 7.0})
        assert model.constraints[0].rhs == 7.0

    def test_variables_shadow_parameters(self):
        doc = json.dumps(
            {"variables": [{"name": "Cap", "kind": "continuous", "lower": 0}],
             "constraints": [{"expr": "Cap <= 3"}],
             "objective": {"sense": "max", "expr": "Cap"}}
        )
        model = parse_model_document(doc, parameters={"Cap": 7.0})
        assert model.constraints[0].lhs.terms == {"Cap": 1.0}

    def test_extract_document_outermost_braces(self):
        assert extract_document("x {a {b} c} y") == "{a {b} c}"


class TestRenderRoundTrip:
    def test_pharmacy_round_trip(self):
        model = parse_model_document(PHARMACY_DOC)
        assert parse_model_document(render_model_document(model)) == model

    def test_render_expr_style(self):
        expr = parse_linear_expr("10*x + 6*y", VARS)
        assert render_expr(expr) == "10*x + 6*y"

    def test_render_negative_and_constant(self):
        expr = LinExpr({"x": -1.0, "y": 2.5}, -3.0)
        assert render_expr(expr) == "-x + 2.5*y - 3"


# --- property tests -------------------------------------------------------

names_st = st.sampled_from(sorted(VARS))
int_coef = st.integers(min_value=-50, max_value=50)


@st.composite
def expr_text(draw, max_terms=4):
    """Grammar-conformant expression text with integer data (exact floats)."""
    parts = []
    for i in range(draw(st.integers(1, max_terms))):
        coef = draw(int_coef)
        name = draw(names_st)
        term = f"{coef}*{name}"
        if i == 0:
            parts.append(term)
        else:
            parts.append(draw(st.sampled_from(["+", "-"])) + " " + term)
    if draw(st.booleans()):
        parts.append(f"+ {draw(st.integers(0, 100))}")
    return " ".join(parts)


assignments_st = st.fixed_dictionaries({n: st.integers(-20, 20) for n in sorted(VARS)})


@given(a=expr_text(), b=expr_text(), values=assignments_st)
@settings(max_examples=100, deadline=None)
def test_parse_is_linear_over_concatenation(a, b, values):
    combined = parse_linear_expr(f"{a} + {b}", VARS)
    assert evaluate(combined, values) == evaluate(parse_linear_expr(a, VARS), values) + evaluate(
        parse_linear_expr(b, VARS), values
    )


@given(lhs=expr_text(), rhs=expr_text(),
       sense=st.sampled_from(["<=", ">=", "="]), values=assignments_st)
@settings(max_examples=100, deadline=None)
def test_constraint_normalization_preserves_satisfaction(lhs, rhs, sense, values):
    text = f"{lhs} {sense} {rhs}"
    constraint = parse_constraint(text, VARS)
    left = evaluate(parse_linear_expr(lhs, VARS), values)
    right = evaluate(parse_linear_expr(rhs, VARS), values)
    raw = {"<=": left <= right, ">=": left >= right, "=": left == right}[sense]
    achieved = evaluate(constraint.lhs, values)
    normalized = {
        Sense.LE: achieved <= constraint.rhs,
        Sense.GE: achieved >= constraint.rhs,
        Sense.EQ: achieved == constraint.rhs,
    }[constraint.sense]
    assert raw == normalized


@st.composite
def models_st(draw):
    from ormind.model import Constraint, ModelIR, Objective, VariableDef, VarKind

    n = draw(st.integers(1, 3))
    var_names = [f"v{i}" for i in range(n)]
    variables = []
    for name in var_names:
        lo = draw(st.integers(-10, 10))
        hi = lo + draw(st.integers(0, 20))
        kind = draw(st.sampled_from([VarKind.INTEGER, VarKind.CONTINUOUS]))
        variables.append(VariableDef(name, kind, float(lo), float(hi)))
    constraints = []
    for k in range(draw(st.integers(0, 3))):
        coeffs = {
            nm: float(draw(int_coef)) for nm in var_names if draw(st.booleans())
        }
        constraints.append(
            Constraint(
                f"c{k + 1}",
                LinExpr(coeffs),
                draw(st.sampled_from(list(Sense))),
                float(draw(st.integers(-50, 50))),
            )
        )
    objective = Objective(
        draw(st.sampled_from(list(ObjSense))),
        LinExpr({nm: float(draw(int_coef)) for nm in var_names}, float(draw(st.integers(-9, 9)))),
    )
    return ModelIR(tuple(variables), tuple(constraints), objective)


@given(model=models_st())
@settings(max_examples=60, deadline=None)
def test_document_round_trip_is_structurally_identical(model: ModelIR):
    rendered = render_model_document(model)
    reparsed = parse_model_document(rendered)
    assert reparsed == model
    assert render_model_document(reparsed) == rendered
