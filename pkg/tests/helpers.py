"""Random model generation and the exhaustive-enumeration oracle."""

from __future__ import annotations

import random

import numpy as np

from ormind.model import (
    Constraint,
    LinExpr,
    ModelIR,
    Objective,
    ObjSense,
    Sense,
    VariableDef,
    VarKind,
)


def random_integer_model(rng: random.Random) -> ModelIR:
    """Small all-integer model with bounds inside [0, 20], coefficients in
    [-9, 9], and right-hand sides anchored near a feasible point so the mix
    of feasible and infeasible instances stays interesting."""
    n = rng.randint(1, 4)
    names = [f"v{i}" for i in range(n)]
    variables = []
    for name in names:
        lo = rng.randint(0, 12)
        hi = min(20, lo + rng.randint(0, 10))
        variables.append(VariableDef(name, VarKind.INTEGER, float(lo), float(hi)))
    anchor = {v.name: rng.randint(int(v.lower), int(v.upper)) for v in variables}

    constraints = []
    for k in range(rng.randint(0, 5)):
        coeffs = {nm: rng.randint(-9, 9) for nm in names}
        coeffs = {nm: float(c) for nm, c in coeffs.items() if c}
        if not coeffs:
            continue
        at_anchor = sum(c * anchor[nm] for nm, c in coeffs.items())
        sense = rng.choice([Sense.LE, Sense.GE, Sense.EQ])
        if sense is Sense.LE:
            rhs = at_anchor + rng.randint(-3, 10)
        elif sense is Sense.GE:
            rhs = at_anchor - rng.randint(-3, 10)
        else:
            rhs = at_anchor + rng.randint(-1, 1)
        constraints.append(Constraint(f"c{k + 1}", LinExpr(coeffs), sense, float(rhs)))

    obj_coeffs = {nm: float(rng.randint(-9, 9)) for nm in names}
    objective = Objective(
        rng.choice([ObjSense.MIN, ObjSense.MAX]),
        LinExpr(obj_coeffs, float(rng.randint(-5, 5))),
    )
    return ModelIR(tuple(variables), tuple(constraints), objective)


def enumerate_feasible_values(model: ModelIR) -> np.ndarray:
    """Objective values of every feasible lattice point of a bounded
    all-integer model.  All data is integral, so the float arithmetic here is
    exact."""
    names = list(model.var_names)
    grids = [
        np.arange(int(v.lower), int(v.upper) + 1, dtype=np.int64) for v in model.variables
    ]
    mesh = np.meshgrid(*grids, indexing="ij") if grids else []
    points = np.stack([m.ravel() for m in mesh], axis=1).astype(float)
    feasible = np.ones(len(points), dtype=bool)
    for c in model.constraints:
        coeffs = np.array([c.lhs.terms.get(nm, 0.0) for nm in names])
        achieved = points @ coeffs
        if c.sense is Sense.LE:
            feasible &= achieved <= c.rhs
        elif c.sense is Sense.GE:
            feasible &= achieved >= c.rhs
        else:
            feasible &= achieved == c.rhs
    obj_coeffs = np.array([model.objective.expr.terms.get(nm, 0.0) for nm in names])
    return points[feasible] @ obj_coeffs + model.objective.expr.constant


def enumerate_oracle(model: ModelIR) -> tuple[str, float | None]:
    """Brute-force optimum over the integer lattice of a bounded all-integer
    model."""
    values = enumerate_feasible_values(model)
    if values.size == 0:
        return "Infeasible", None
    best = values.max() if model.objective.sense is ObjSense.MAX else values.min()
    return "Optimal", float(best)


def random_mixed_model(rng: random.Random) -> ModelIR:
    """Model with mixed kinds and occasional open bounds, for feasibility and
    counterfactual cross-checks."""
    n = rng.randint(1, 4)
    names = [f"x{i}" for i in range(n)]
    variables = []
    for name in names:
        kind = rng.choice([VarKind.INTEGER, VarKind.CONTINUOUS])
        lo = float(rng.randint(-5, 8)) if rng.random() < 0.8 else float("-inf")
        hi_candidate = (lo if lo != float("-inf") else 0.0) + rng.randint(1, 12)
        hi = float(hi_candidate) if rng.random() < 0.8 else float("inf")
        variables.append(VariableDef(name, kind, lo, hi))
    constraints = []
    for k in range(rng.randint(1, 5)):
        coeffs = {nm: float(rng.randint(-6, 6)) for nm in names}
        coeffs = {nm: c for nm, c in coeffs.items() if c}
        if not coeffs:
            coeffs = {names[0]: 1.0}
        sense = rng.choice([Sense.LE, Sense.GE, Sense.EQ])
        constraints.append(
            Constraint(f"c{k + 1}", LinExpr(coeffs), sense, float(rng.randint(-20, 30)))
        )
    objective = Objective(
        rng.choice([ObjSense.MIN, ObjSense.MAX]),
        LinExpr({nm: float(rng.randint(-5, 5)) for nm in names}, float(rng.randint(0, 3))),
    )
    return ModelIR(tuple(variables), tuple(constraints), objective)


def random_assignment(rng: random.Random, model: ModelIR) -> dict[str, float]:
    assignment = {}
    for v in model.variables:
        lo = v.lower if v.lower != float("-inf") else -5.0
        hi = v.upper if v.upper != float("inf") else 25.0
        value = rng.uniform(lo - 3.0, hi + 3.0)
        if rng.random() < 0.4:
            value = float(round(value))
        assignment[v.name] = value
    return assignment
