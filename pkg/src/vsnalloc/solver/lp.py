from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import MilpModel
from .simplex import Basis, BoundedSimplex, LpStatus


@dataclass
class LpResult:
    status: LpStatus
    values: dict[str, float]
    objective: float
    iterations: int
    x: np.ndarray | None = field(default=None, repr=False)
    basis: Basis | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def engine_for(model: MilpModel) -> BoundedSimplex:
    dense = model.dense
    return BoundedSimplex(dense.A, dense.senses, dense.rhs, dense.cost, model.lower, model.upper)


def solve_lp(model: MilpModel, warm: Basis | None = None, deadline: float | None = None) -> LpResult:
    """Solve a continuous model with the in-house simplex.

    ``warm`` is a basis from an earlier solve of a model with the same rows
    and columns (bounds may differ); the dual simplex then repairs it.
    """
    if any(v.integral for v in model.variables):
        raise ValueError("solve_lp expects a relaxed model; call relax() first")
    res = engine_for(model).solve(warm=warm, deadline=deadline)
    values = {}
    if res.x is not None:
        values = {v.name: float(val) for v, val in zip(model.variables, res.x)}
    return LpResult(res.status, values, res.objective, res.iterations, res.x, res.basis)
