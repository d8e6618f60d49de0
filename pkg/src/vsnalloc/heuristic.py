"""Iterative LP-relaxation rounding over the static-routing model.

Each round solves the relaxation with all decisions so far pinned, then
either drops an application the LP has already switched off, or tries to
commit the most valuable undecided one by pinning its deployment and
rounding its sensor choice per test point.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field

from .model import (MilpModel, Routing, Solution, Status, VarKind, build_model, fix_variables,
                    relax, validate_solution, var_name)
from .scenario import Scenario
from .solver.lp import engine_for
from .solver.simplex import Basis, EngineResult, LpStatus

ZERO_TOL = 1e-6


class HeuristicError(RuntimeError):
    def __init__(self, message: str, trace: list["TraceRecord"]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    lp_objective: float | None
    action: str  # forced_zero | committed | dismissed
    app_id: int
    fixes: dict[str, float]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class HeuristicState:
    scenario: Scenario
    problem1: MilpModel
    seed: int
    rng: random.Random
    committed: set[int] = field(default_factory=set)
    dismissed: set[int] = field(default_factory=set)
    trace: list[TraceRecord] = field(default_factory=list)
    lp_solves: int = 0
    solution: Solution | None = None

    @property
    def undecided(self) -> list[int]:
        return [a.id for a in self.scenario.applications if a.id not in self.committed | self.dismissed]


class _Lp:
    """One simplex engine reused across all bound changes of a run."""

    def __init__(self, state: HeuristicState):
        self.state = state
        self.engine = engine_for(state.problem1)
        self.basis: Basis | None = None

    def solve(self, model: MilpModel) -> EngineResult:
        self.state.lp_solves += 1
        self.engine.set_bounds(model.lower, model.upper)
        res = self.engine.solve(warm=self.basis)
        if res.status is LpStatus.OPTIMAL:
            self.basis = res.basis
        return res


def run_heuristic(scenario: Scenario, seed: int = 0) -> Solution:
    return heuristic_state(scenario, seed).solution


def heuristic_state(scenario: Scenario, seed: int = 0) -> HeuristicState:
    """Run the rounding loop and keep everything it decided."""
    base = relax(build_model(scenario, Routing.STATIC))
    state = HeuristicState(scenario, base, seed, random.Random(seed))
    lp = _Lp(state)
    idx = base.index
    apps = {a.id: a for a in scenario.applications}

    def z_of(res, j):
        return res.x[idx[var_name(VarKind.Z, (j,))]]

    def integral(res) -> bool:
        for v in base.variables:
            if v.kind in (VarKind.Z, VarKind.H, VarKind.Y):
                val = res.x[v.index]
                if min(abs(val), abs(val - 1.0)) > ZERO_TOL:
                    return False
        return True

    def record(action, j, objective, fixes):
        state.trace.append(TraceRecord(len(state.trace), objective, action, j, dict(fixes)))

    def dismiss(j, action, objective):
        name = var_name(VarKind.Z, (j,))
        state.problem1 = fix_variables(state.problem1, {name: 0.0})
        state.dismissed.add(j)
        record(action, j, objective, {name: 0.0})

    res = lp.solve(state.problem1)
    if res.status is not LpStatus.OPTIMAL:
        state.solution = Solution.empty(scenario, Routing.STATIC.value)
        return state
    while True:
        if res.status is not LpStatus.OPTIMAL:
            raise HeuristicError("relaxation with committed decisions became infeasible", state.trace)
        if integral(res) or not state.undecided:
            break
        # drop applications the relaxation already switched off, one random pick at a time
        zeros = [j for j in state.undecided if z_of(res, j) <= ZERO_TOL]
        if zeros:
            dismiss(state.rng.choice(zeros), "forced_zero", res.objective)
            res = lp.solve(state.problem1)
            continue
        # try to commit the most valuable undecided application
        j = max(state.undecided, key=lambda a: (apps[a].preference * z_of(res, a), -a))
        z_name = var_name(VarKind.Z, (j,))
        problem2 = fix_variables(state.problem1, {z_name: 1.0})
        res2 = lp.solve(problem2)
        if res2.status is not LpStatus.OPTIMAL:
            dismiss(j, "dismissed", res.objective)
            res = lp.solve(state.problem1)
            continue
        fixes = {}
        cover = scenario.topology.coverage
        for tp in apps[j].test_points:
            nodes = cover[j, tp.id]
            best = max(nodes, key=lambda i: (res2.x[idx[var_name(VarKind.Y, (i, j, tp.id))]], -i))
            fixes[var_name(VarKind.Y, (best, j, tp.id))] = 1.0
        res3 = lp.solve(fix_variables(problem2, fixes))
        if res3.status is not LpStatus.OPTIMAL:
            dismiss(j, "dismissed", res.objective)
            res = lp.solve(state.problem1)
            continue
        fixes = {z_name: 1.0, **fixes}
        state.problem1 = fix_variables(state.problem1, fixes)
        state.committed.add(j)
        record("committed", j, res3.objective, fixes)
        res = res3  # problem1 now equals problem2 plus the rounding fixes

    # whatever is still undecided is settled by its (integral) LP value
    for j in state.undecided:
        z_name = var_name(VarKind.Z, (j,))
        if z_of(res, j) > 0.5:
            fixes = {z_name: 1.0}
            for v in base.variables:
                if v.kind is VarKind.Y and v.key[1] == j and res.x[v.index] > 0.5:
                    fixes[v.name] = 1.0
            state.committed.add(j)
            record("committed", j, res.objective, fixes)
        else:
            state.dismissed.add(j)
            record("dismissed", j, res.objective, {z_name: 0.0})
    state.solution = _finalize(scenario, base, res)
    violations = validate_solution(scenario, base.mode, state.solution)
    if violations:
        raise HeuristicError(f"final solution violates {', '.join(map(str, violations[:5]))}", state.trace)
    return state


def _finalize(scenario: Scenario, model: MilpModel, res: EngineResult) -> Solution:
    """Round the last LP and recompute tree flows from the rounded sensor choices."""
    values: dict[str, float] = {}
    for v in model.variables:
        if v.kind in (VarKind.Z, VarKind.H, VarKind.Y):
            values[v.name] = float(round(res.x[v.index]))
    parent = model.mode.dodag.parent
    sinks = set(scenario.sinks)
    carried = {n.id: 0.0 for n in scenario.nodes}
    flows: dict[tuple[int, int], float] = {}
    for v in model.variables:
        if v.kind is VarKind.Y and values[v.name] == 1.0:
            i, j, _ = v.key
            rate = scenario.app(j).rate_bps
            carried[i] += rate
            while i not in sinks:
                h = parent[i]
                flows[i, h] = flows.get((i, h), 0.0) + rate
                carried[h] += rate
                i = h
    for v in model.variables:
        if v.kind is VarKind.F:
            values[v.name] = flows.get(v.key, 0.0)
        elif v.kind is VarKind.X:
            values[v.name] = 1.0 if res.x[v.index] > ZERO_TOL or carried[v.key[0]] > 0 else 0.0
    objective = model.objective_value(values)
    return Solution(values, objective, Status.FEASIBLE, Routing.STATIC.value)


def heuristic_trace(state: HeuristicState) -> list[TraceRecord]:
    return list(state.trace)


def trace_to_jsonl(trace: list[TraceRecord]) -> str:
    return "".join(rec.to_json() + "\n" for rec in trace)


def replay(scenario: Scenario, trace: list[TraceRecord]) -> Solution:
    """Apply a trace's fixes to a fresh relaxation and finalize it the same way."""
    base = relax(build_model(scenario, Routing.STATIC))
    fixes: dict[str, float] = {}
    for rec in trace:
        fixes.update(rec.fixes)
    res = engine_for(fix_variables(base, fixes)).solve()
    if res.status is not LpStatus.OPTIMAL:
        return Solution.empty(scenario, Routing.STATIC.value)
    return _finalize(scenario, base, res)
