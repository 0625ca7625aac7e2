"""Structured optimization-model representation.

A model is a list of bounded variables, a list of normalized linear
constraints, and a linear objective.  All types are immutable values;
every operation over them is pure.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import DuplicateNameError, MissingAssignmentError, UnknownVariableError

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

NEG_INF = float("-inf")
POS_INF = float("inf")


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class ObjSense(str, Enum):
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class VariableDef:
    """A decision variable with kind and (possibly infinite) bounds."""

    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lower: float = NEG_INF
    upper: float = POS_INF

    def __post_init__(self):
        if not self.name or not NAME_RE.match(self.name):
            raise ValueError(f"invalid variable name {self.name!r}")
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError(f"variable {self.name!r} has NaN bound")
        if self.lower > self.upper:
            raise ValueError(
                f"variable {self.name!r} has lower bound {self.lower} > upper bound {self.upper}"
            )

    @property
    def is_integer(self) -> bool:
        return self.kind is VarKind.INTEGER


@dataclass(frozen=True)
class LinExpr:
    """Linear expression: sum of coefficient*variable terms plus a constant.

    Zero-coefficient terms are dropped at construction so two expressions
    that denote the same function compare equal.
    """

    terms: Mapping[str, float] = field(default_factory=dict)
    constant: float = 0.0

    def __post_init__(self):
        cleaned: dict[str, float] = {}
        for name, coef in self.terms.items():
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError(f"non-finite coefficient for {name!r}")
            if coef != 0.0:
                cleaned[name] = coef
        object.__setattr__(self, "terms", cleaned)
        constant = float(self.constant)
        if not math.isfinite(constant):
            raise ValueError("non-finite constant")
        object.__setattr__(self, "constant", constant)

    def names(self) -> Iterable[str]:
        return self.terms.keys()

    def drop_constant(self) -> "LinExpr":
        return LinExpr(dict(self.terms), 0.0)

    def scaled(self, factor: float) -> "LinExpr":
        return LinExpr({n: c * factor for n, c in self.terms.items()}, self.constant * factor)

    def minus(self, other: "LinExpr") -> "LinExpr":
        merged = dict(self.terms)
        for name, coef in other.terms.items():
            merged[name] = merged.get(name, 0.0) + (-coef)
        return LinExpr(merged, self.constant - other.constant)


@dataclass(frozen=True)
class Constraint:
    """Normalized linear constraint: terms SENSE rhs, with no lhs constant."""

    name: str
    lhs: LinExpr
    sense: Sense
    rhs: float

    def __post_init__(self):
        if self.lhs.constant != 0.0:
            raise ValueError("constraint lhs must have its constant folded into rhs")
        if not math.isfinite(self.rhs):
            raise ValueError(f"constraint {self.name!r} has non-finite rhs")


@dataclass(frozen=True)
class Objective:
    sense: ObjSense
    expr: LinExpr


@dataclass(frozen=True)
class ModelIR:
    """A complete model; validates name uniqueness and reference resolution."""

    variables: tuple[VariableDef, ...]
    constraints: tuple[Constraint, ...]
    objective: Objective

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        seen: set[str] = set()
        for v in self.variables:
            if v.name in seen:
                raise DuplicateNameError(v.name)
            seen.add(v.name)
        declared = {v.name for v in self.variables}
        for c in self.constraints:
            if c.name in seen:
                raise DuplicateNameError(c.name)
            seen.add(c.name)
            for name in c.lhs.names():
                if name not in declared:
                    raise UnknownVariableError(name)
        for name in self.objective.expr.names():
            if name not in declared:
                raise UnknownVariableError(name)

    @property
    def var_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def integer_vars(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.is_integer)

    def variable(self, name: str) -> VariableDef:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownVariableError(name)

    def with_bounds(self, overrides: Mapping[str, tuple[float, float]]) -> "ModelIR":
        """New model with per-variable (lower, upper) bounds replaced."""
        variables = tuple(
            dataclasses.replace(v, lower=overrides[v.name][0], upper=overrides[v.name][1])
            if v.name in overrides
            else v
            for v in self.variables
        )
        return ModelIR(variables, self.constraints, self.objective)


def evaluate(expr: LinExpr, assignment: Mapping[str, float]) -> float:
    """Value of ``expr`` under ``assignment``; every referenced name must be present."""
    total = expr.constant
    for name, coef in expr.terms.items():
        if name not in assignment:
            raise MissingAssignmentError(name)
        total += coef * assignment[name]
    return total


def is_integral_expr(expr: LinExpr, tol: float = 1e-9) -> bool:
    """True when every coefficient and the constant is (near-)integral."""
    values = list(expr.terms.values()) + [expr.constant]
    return all(abs(v - round(v)) <= tol for v in values)
