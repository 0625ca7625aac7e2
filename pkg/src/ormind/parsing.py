"""Parsing and rendering of expression strings and model-exchange documents.

Expression grammar (whitespace insignificant)::

    expr := ("+"|"-")? term (("+"|"-") term)*
    term := number | ident | number "*"? ident | number "*" "(" expr ")"

Relation symbols in constraint strings are ``<=``, ``>=`` and ``=`` only;
strict inequalities and division are rejected.  An implicit ``*`` between a
number and an identifier is accepted (``2x`` means ``2*x``).

The exchange document is a UTF-8 JSON object::

    {"variables":   [{"name": str, "kind": "integer"|"continuous",
                      "lower": num|"-inf", "upper": num|"inf"}, ...],
     "constraints": [{"name": str?, "expr": str}, ...],
     "objective":   {"sense": "min"|"max", "expr": str}}

Code fences and any prose surrounding the outermost braces are stripped
before JSON parsing.  Identifiers that match a supplied parameter name are
substituted by their numeric value during parsing.
"""

from __future__ import annotations

import json
import re
from typing import Mapping

from .errors import (
    DocumentMalformedError,
    DuplicateNameError,
    ExprSyntaxError,
    ModelError,
    MultipleRelationsError,
    UnknownVariableError,
)
from .model import (
    Constraint,
    LinExpr,
    ModelIR,
    NEG_INF,
    Objective,
    ObjSense,
    POS_INF,
    Sense,
    VariableDef,
    VarKind,
)

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<le><=)
      | (?P<ge>>=)
      | (?P<op>[-+*()=<>/])
    """,
    re.VERBOSE,
)

_RELATIONS = {"<=": Sense.LE, ">=": Sense.GE, "=": Sense.EQ}


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind: str, text: str, pos: int):
        self.kind = kind
        self.text = text
        self.pos = pos

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"Token({self.kind}, {self.text!r}, {self.pos})"


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "ws":
            pos = m.end()
            continue
        kind = m.lastgroup
        tok = m.group()
        if kind == "op":
            if tok == "/":
                raise ExprSyntaxError("division is not supported", pos)
            if tok in ("<", ">"):
                raise ExprSyntaxError(
                    f"strict inequality {tok!r} not supported; use <= or >=", pos
                )
            kind = tok
        elif kind in ("le", "ge"):
            kind = tok
        tokens.append(_Token(kind, tok, pos))
        pos = m.end()
    return tokens


class _ExprParser:
    def __init__(self, tokens: list[_Token], text_len: int,
                 vars: frozenset, parameters: Mapping[str, float]):
        self.tokens = tokens
        self.text_len = text_len
        self.vars = vars
        self.parameters = parameters
        self.i = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of expression", self.text_len)
        self.i += 1
        return tok

    def parse(self) -> tuple[dict[str, float], float]:
        terms, const = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.pos)
        return terms, const

    def expr(self) -> tuple[dict[str, float], float]:
        terms: dict[str, float] = {}
        const = 0.0
        sign = 1.0
        tok = self.peek()
        if tok is not None and tok.kind in ("+", "-"):
            self.take()
            sign = -1.0 if tok.kind == "-" else 1.0
        while True:
            t_terms, t_const = self.term(sign)
            for name, coef in t_terms.items():
                terms[name] = terms.get(name, 0.0) + coef
            const += t_const
            tok = self.peek()
            if tok is None or tok.kind not in ("+", "-"):
                break
            self.take()
            sign = -1.0 if tok.kind == "-" else 1.0
        return terms, const

    def term(self, sign: float) -> tuple[dict[str, float], float]:
        tok = self.take()
        if tok.kind == "num":
            value = float(tok.text)
            nxt = self.peek()
            if nxt is not None and nxt.kind == "*":
                self.take()
                follow = self.take()
                if follow.kind == "ident":
                    return self.symbol_term(follow, sign * value)
                if follow.kind == "(":
                    terms, const = self.expr()
                    closing = self.take()
                    if closing.kind != ")":
                        raise ExprSyntaxError("expected ')'", closing.pos)
                    factor = sign * value
                    return (
                        {n: c * factor for n, c in terms.items()},
                        const * factor,
                    )
                raise ExprSyntaxError(
                    f"expected identifier or '(' after '*', got {follow.text!r}", follow.pos
                )
            if nxt is not None and nxt.kind == "ident":
                self.take()
                return self.symbol_term(nxt, sign * value)
            return {}, sign * value
        if tok.kind == "ident":
            return self.symbol_term(tok, sign)
        raise ExprSyntaxError(f"expected a term, got {tok.text!r}", tok.pos)

    def symbol_term(self, tok: _Token, coef: float) -> tuple[dict[str, float], float]:
        name = tok.text
        if name in self.vars:
            return {name: coef}, 0.0
        if name in self.parameters:
            return {}, coef * float(self.parameters[name])
        raise UnknownVariableError(name, position=tok.pos)


def parse_linear_expr(
    text: str,
    vars: frozenset | set | tuple | list,
    parameters: Mapping[str, float] | None = None,
) -> LinExpr:
    """Parse ``text`` into a normalized LinExpr over the given variable names."""
    tokens = _tokenize(text)
    parser = _ExprParser(tokens, len(text), frozenset(vars), parameters or {})
    terms, const = parser.parse()
    return LinExpr(terms, const)


def parse_constraint(
    text: str,
    vars: frozenset | set | tuple | list,
    parameters: Mapping[str, float] | None = None,
    name: str = "",
) -> Constraint:
    """Parse a constraint string, folding the lhs constant into the rhs."""
    tokens = _tokenize(text)
    rel_positions = [i for i, t in enumerate(tokens) if t.text in _RELATIONS]
    if not rel_positions:
        raise ExprSyntaxError("constraint has no relation symbol (<=, >=, =)", len(text))
    if len(rel_positions) > 1:
        raise MultipleRelationsError(
            f"constraint has {len(rel_positions)} relation symbols, expected exactly one"
        )
    split = rel_positions[0]
    sense = _RELATIONS[tokens[split].text]
    var_set = frozenset(vars)
    params = parameters or {}
    left = _ExprParser(tokens[:split], len(text), var_set, params)
    lhs_terms, lhs_const = left.parse()
    right = _ExprParser(tokens[split + 1:], len(text), var_set, params)
    rhs_terms, rhs_const = right.parse()
    combined = LinExpr(lhs_terms, lhs_const).minus(LinExpr(rhs_terms, rhs_const))
    return Constraint(name, combined.drop_constant(), sense, -combined.constant + 0.0)


def extract_document(text: str) -> str:
    """Strip code fences and surrounding prose down to the outermost JSON braces."""
    stripped = re.sub(r"```[A-Za-z0-9_-]*", "", text)
    start = stripped.find("{")
    end = stripped.rfind("}")
    if start == -1 or end == -1 or end < start:
        raise DocumentMalformedError("no JSON object found in document text")
    return stripped[start : end + 1]


def _parse_bound(raw, default: float, section: str) -> float:
    if raw is None:
        return default
    if isinstance(raw, bool):
        raise DocumentMalformedError(f"invalid bound {raw!r}", section)
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str):
        try:
            return float(raw)
        except ValueError:
            raise DocumentMalformedError(f"invalid bound {raw!r}", section) from None
    raise DocumentMalformedError(f"invalid bound {raw!r}", section)


_SENSE_WORDS = {
    "min": ObjSense.MIN,
    "minimize": ObjSense.MIN,
    "max": ObjSense.MAX,
    "maximize": ObjSense.MAX,
}


def parse_model_document(
    text: str, parameters: Mapping[str, float] | None = None
) -> ModelIR:
    """Parse and validate a model-exchange document into a ModelIR.

    ``parameters`` maps scalar dataset-instance names to values; identifiers
    matching a parameter are substituted numerically wherever they appear in
    an expression.
    """
    payload = extract_document(text)
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise DocumentMalformedError(f"invalid JSON: {exc}", "document") from exc
    if not isinstance(doc, dict):
        raise DocumentMalformedError("document must be a JSON object", "document")
    for field_name in ("variables", "constraints", "objective"):
        if field_name not in doc:
            raise DocumentMalformedError(f"missing {field_name!r} field", "document")
    if not isinstance(doc["variables"], list):
        raise DocumentMalformedError("'variables' must be a list", "variables")
    if not isinstance(doc["constraints"], list):
        raise DocumentMalformedError("'constraints' must be a list", "constraints")

    variables: list[VariableDef] = []
    for i, entry in enumerate(doc["variables"]):
        section = f"variables[{i}]"
        if not isinstance(entry, dict) or "name" not in entry:
            raise DocumentMalformedError("variable entry must have a 'name'", section)
        kind_raw = str(entry.get("kind", "continuous")).lower()
        try:
            kind = VarKind(kind_raw)
        except ValueError:
            raise DocumentMalformedError(f"unknown variable kind {kind_raw!r}", section) from None
        lower = _parse_bound(entry.get("lower"), NEG_INF, section)
        upper = _parse_bound(entry.get("upper"), POS_INF, section)
        try:
            variables.append(VariableDef(str(entry["name"]), kind, lower, upper))
        except ValueError as exc:
            raise DocumentMalformedError(str(exc), section) from exc

    var_names = frozenset(v.name for v in variables)
    params = dict(parameters or {})
    # declared variables shadow identically named parameters
    for name in var_names:
        params.pop(name, None)

    constraints: list[Constraint] = []
    for i, entry in enumerate(doc["constraints"]):
        section = f"constraints[{i}]"
        if not isinstance(entry, dict) or "expr" not in entry or not isinstance(entry["expr"], str):
            raise DocumentMalformedError("constraint entry must have a string 'expr'", section)
        name = entry.get("name") or f"c{i + 1}"
        try:
            constraints.append(parse_constraint(entry["expr"], var_names, params, name=str(name)))
        except ModelError as exc:
            exc.section = section
            raise

    obj_entry = doc["objective"]
    if not isinstance(obj_entry, dict) or "sense" not in obj_entry or "expr" not in obj_entry:
        raise DocumentMalformedError("objective must have 'sense' and 'expr'", "objective")
    sense_raw = str(obj_entry["sense"]).lower()
    if sense_raw not in _SENSE_WORDS:
        raise DocumentMalformedError(f"unknown objective sense {sense_raw!r}", "objective")
    try:
        obj_expr = parse_linear_expr(str(obj_entry["expr"]), var_names, params)
    except ModelError as exc:
        exc.section = "objective"
        raise
    objective = Objective(_SENSE_WORDS[sense_raw], obj_expr)

    try:
        return ModelIR(tuple(variables), tuple(constraints), objective)
    except (DuplicateNameError, UnknownVariableError) as exc:
        exc.section = exc.section or "document"
        raise


def format_number(value: float) -> str:
    """Shortest exact decimal form: integral floats print without a fraction."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def render_expr(expr: LinExpr) -> str:
    """Render a LinExpr in the expression grammar; reparses to the same value."""
    parts: list[str] = []
    for name, coef in expr.terms.items():
        mag = abs(coef)
        body = name if mag == 1.0 else f"{format_number(mag)}*{name}"
        if not parts:
            parts.append(body if coef >= 0 else f"-{body}")
        else:
            parts.append(f"{'+' if coef >= 0 else '-'} {body}")
    if expr.constant != 0.0 or not parts:
        mag = format_number(abs(expr.constant))
        if not parts:
            parts.append(mag if expr.constant >= 0 else f"-{mag}")
        else:
            parts.append(f"{'+' if expr.constant >= 0 else '-'} {mag}")
    return " ".join(parts)


def _render_bound(value: float) -> object:
    if value == NEG_INF:
        return "-inf"
    if value == POS_INF:
        return "inf"
    return int(value) if value == int(value) and abs(value) < 1e15 else value


def render_model_document(model: ModelIR) -> str:
    """Serialize a ModelIR to canonical exchange-document JSON."""
    doc = {
        "variables": [
            {
                "name": v.name,
                "kind": v.kind.value,
                "lower": _render_bound(v.lower),
                "upper": _render_bound(v.upper),
            }
            for v in model.variables
        ],
        "constraints": [
            {
                "name": c.name,
                "expr": f"{render_expr(c.lhs)} {c.sense.value} {format_number(c.rhs)}",
            }
            for c in model.constraints
        ],
        "objective": {
            "sense": model.objective.sense.value,
            "expr": render_expr(model.objective.expr),
        },
    }
    return json.dumps(doc, indent=2)
