"""LP-based branch-and-bound for the deployment MILP."""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from ..model import MilpModel, Solution, Status, solution_from_vector
from .lp import engine_for
from .simplex import CURRENT, EngineResult, LpStatus, LpTimeout


class Branching(str, Enum):
    MOST_FRACTIONAL = "most_fractional"
    PSEUDO_COST = "pseudo_cost"


class Search(str, Enum):
    BEST_FIRST = "best_first"
    DEPTH_FIRST = "depth_first"


@dataclass
class BnbConfig:
    integrality_tol: float = 1e-6
    gap_tol: float = 1e-6
    node_limit: int = 200_000
    time_limit: float | None = None
    branching: Branching = Branching.MOST_FRACTIONAL
    search: Search = Search.BEST_FIRST
    lp_backend: str = "simplex"  # or "highs" (scipy) for instances beyond desk scale
    probing: bool = True  # fix binaries whose up-branch LP is infeasible before branching

    def __post_init__(self):
        if not (self.integrality_tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")
        self.branching = Branching(self.branching)
        self.search = Search(self.search)
        if self.lp_backend not in ("simplex", "highs"):
            raise ValueError(f"unknown LP backend {self.lp_backend!r}")


@dataclass
class SolverStats:
    lp_iterations: int = 0
    bnb_nodes: int = 0
    incumbent: float | None = None
    bound: float | None = None
    gap: float | None = None
    wall_time_s: float = 0.0
    bound_trace: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("bound_trace")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _HighsEngine:
    """Cold-start scipy/HiGHS LP behind the simplex engine's interface."""

    def __init__(self, model: MilpModel):
        dense = model.dense
        self.A, self.senses, self.rhs, self.cost = dense.A, dense.senses, dense.rhs, dense.cost
        self.lb, self.ub = model.lower, model.upper

    def set_bounds(self, lb, ub):
        self.lb, self.ub = np.asarray(lb, float), np.asarray(ub, float)

    def solve(self, warm=None, deadline=None) -> EngineResult:
        from scipy.optimize import linprog

        le, eq, ge = self.senses < 0, self.senses == 0, self.senses > 0
        A_ub = np.vstack([self.A[le], -self.A[ge]])
        b_ub = np.concatenate([self.rhs[le], -self.rhs[ge]])
        options = {}
        if deadline is not None:
            left = deadline - time.monotonic()
            if left <= 0:
                raise LpTimeout("LP time limit reached")
            options["time_limit"] = left
        res = linprog(-self.cost, A_ub=A_ub if len(A_ub) else None, b_ub=b_ub if len(b_ub) else None,
                      A_eq=self.A[eq] if eq.any() else None, b_eq=self.rhs[eq] if eq.any() else None,
                      bounds=np.column_stack([self.lb, self.ub]), method="highs", options=options)
        iters = int(getattr(res, "nit", 0) or 0)
        if res.status == 0:
            x = np.clip(res.x, self.lb, self.ub)
            return EngineResult(LpStatus.OPTIMAL, x, float(self.cost @ x), iters, None)
        if res.status == 2:
            return EngineResult(LpStatus.INFEASIBLE, None, -np.inf, iters, None)
        if res.status == 3:
            return EngineResult(LpStatus.UNBOUNDED, None, np.inf, iters, None)
        if res.status == 1:
            raise LpTimeout("LP time limit reached")
        raise RuntimeError(f"HiGHS failed: {res.message}")


@dataclass(order=True)
class _Node:
    key: tuple
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    bound: float = field(compare=False)
    depth: int = field(compare=False)
    basis: object = field(compare=False, default=None)
    branch: tuple | None = field(compare=False, default=None)  # (var, direction, fraction)
    done: bool = field(compare=False, default=False)


def solve_milp(model: MilpModel, config: BnbConfig | None = None) -> tuple[Solution, SolverStats]:
    """Maximise ``model`` exactly (to ``gap_tol``) by best-first LP branch-and-bound."""
    cfg = config or BnbConfig()
    start = time.monotonic()
    deadline = None if cfg.time_limit is None else start + cfg.time_limit
    stats = SolverStats()
    engine = _HighsEngine(model) if cfg.lp_backend == "highs" else engine_for(model)
    integral = model.integral
    int_idx = np.flatnonzero(integral)
    routing = model.mode.name if model.mode else None
    priced = (model.dense.cost != 0).astype(float)

    incumbent_x: np.ndarray | None = None
    incumbent = -math.inf
    pc_sum = np.zeros((len(model.variables), 2))
    pc_cnt = np.zeros((len(model.variables), 2))
    seq = 0
    open_nodes: list[_Node] = []
    stack: list[_Node] = []  # LIFO view of the same nodes, searched until the first incumbent

    def push(node_lb, node_ub, bound, depth, basis, branch, prefer=0):
        nonlocal seq
        seq += 1
        if cfg.search is Search.BEST_FIRST:
            key = (-bound, seq)
        else:
            key = (-depth, prefer, seq)
        node = _Node(key, node_lb, node_ub, bound, depth, basis, branch)
        heapq.heappush(open_nodes, node)
        stack.append(node)

    def next_node() -> tuple[_Node | None, bool]:
        """The node to evaluate and whether it came off the heap top."""
        nonlocal dive
        if dive is not None:
            node, dive = dive, None
            return node, False
        while incumbent_x is None and stack:
            node = stack.pop()
            if not node.done:
                node.done = True
                return node, False
        while open_nodes:
            node = heapq.heappop(open_nodes)
            if not node.done:
                node.done = True
                return node, True
        return None, False

    def put_back(node: _Node, from_heap: bool) -> None:
        if node.done and not node.key:  # a dive child never entered the heap
            node.key = (-node.bound, seq + 1)
            heapq.heappush(open_nodes, node)
        elif from_heap:
            heapq.heappush(open_nodes, node)
        node.done = False

    def lp(node_lb, node_ub, basis) -> EngineResult:
        engine.set_bounds(node_lb, node_ub)
        res = engine.solve(warm=basis, deadline=deadline)
        stats.lp_iterations += res.iterations
        return res

    def gap_abs() -> float:
        return cfg.gap_tol * max(1.0, abs(incumbent)) if math.isfinite(incumbent) else 0.0

    def choose(x: np.ndarray, frac_idx: np.ndarray) -> int:
        f = x[frac_idx] - np.floor(x[frac_idx])
        if cfg.branching is Branching.PSEUDO_COST:
            known = (pc_cnt[frac_idx] > 0).all(axis=1)
            if known.any():
                avg = np.where(pc_cnt > 0, pc_sum / np.maximum(pc_cnt, 1), np.nan)
                fill = np.nanmean(avg, axis=0) if np.isfinite(avg).any() else np.ones(2)
                est = np.where(pc_cnt[frac_idx] > 0, avg[frac_idx], fill)
                score = np.maximum(est[:, 0] * f, 1e-6) * np.maximum(est[:, 1] * (1 - f), 1e-6)
                return int(frac_idx[np.argmax(score)])
        # variables that move the objective come first; among them the most fractional
        score = np.minimum(f, 1 - f) + priced[frac_idx] - 1e-9 * np.arange(len(f))
        return int(frac_idx[np.argmax(score)])

    limit_hit = False
    try:
        root_lb, root_ub = model.lower, model.upper
        if cfg.probing:
            root_ub = _probe(model, root_lb, root_ub, lp)
        push(root_lb, root_ub, math.inf, 0, None, None)
        dive: _Node | None = None
        while True:
            node, from_heap = next_node()
            if node is None:
                break
            if node.bound <= incumbent + gap_abs():
                continue
            if stats.bnb_nodes >= cfg.node_limit:
                put_back(node, from_heap)
                limit_hit = True
                break
            if from_heap and cfg.search is Search.BEST_FIRST:
                stats.bound_trace.append(node.bound)
            stats.bnb_nodes += 1
            res = lp(node.lb, node.ub, node.basis)
            if res.status is LpStatus.UNBOUNDED:
                raise RuntimeError("LP relaxation is unbounded; the deployment model is always bounded")
            if res.status is not LpStatus.OPTIMAL:
                continue
            if node.branch is not None:
                var, direction, frac = node.branch
                change = frac if direction == 0 else 1.0 - frac
                if change > 0:
                    pc_sum[var, direction] += max(node.bound - res.objective, 0.0) / change
                    pc_cnt[var, direction] += 1
            if res.objective <= incumbent + gap_abs():
                continue
            x = res.x
            dist = np.abs(x[int_idx] - np.round(x[int_idx]))
            frac_idx = int_idx[dist > cfg.integrality_tol]
            if len(frac_idx) == 0:
                # polish: pin the integers and re-solve for clean continuous values
                lo, hi = node.lb.copy(), node.ub.copy()
                lo[int_idx] = hi[int_idx] = np.round(x[int_idx])
                pol = lp(lo, hi, res.basis)
                if pol.status is LpStatus.OPTIMAL and pol.objective > incumbent:
                    incumbent, incumbent_x = pol.objective, pol.x
                continue
            j = choose(x, frac_idx)
            fj = x[j] - math.floor(x[j])
            down_ub = node.ub.copy()
            down_ub[j] = math.floor(x[j])
            up_lb = node.lb.copy()
            up_lb[j] = math.ceil(x[j])
            down = (node.lb, down_ub, res.objective, node.depth + 1, res.basis, (j, 0, fj))
            up = (up_lb, node.ub, res.objective, node.depth + 1, res.basis, (j, 1, fj))
            if cfg.search is Search.BEST_FIRST:
                # plunge: raising a binary only ever activates something, which keeps the
                # dive feasible; the sibling waits in the heap
                push(*down)
                dive = _Node((), *up, done=True)
            else:
                push(*down, prefer=1)
                push(*up, prefer=0)
    except LpTimeout:
        limit_hit = True

    stats.wall_time_s = time.monotonic() - start
    open_bound = max((n.bound for n in open_nodes if not n.done), default=-math.inf)
    if limit_hit:
        bound = max(open_bound, incumbent)
        if stats.bnb_nodes == 0 or math.isinf(bound):
            bound = math.inf if not open_nodes and incumbent_x is None else bound
    else:
        bound = incumbent
    stats.bound = bound if math.isfinite(bound) else None
    if incumbent_x is None:
        status = Status.NO_SOLUTION if limit_hit else Status.INFEASIBLE
        stats.incumbent = None
        solution = Solution({}, -math.inf, status, routing)
    else:
        status = Status.FEASIBLE if limit_hit else Status.OPTIMAL
        solution = solution_from_vector(model, incumbent_x, status)
        stats.incumbent = solution.objective
        if stats.bound is not None:
            stats.gap = max(0.0, stats.bound - solution.objective) / max(1e-9, abs(solution.objective))
    solution.stats = stats.to_dict()
    return solution, stats


def _probe(model: MilpModel, lb: np.ndarray, ub: np.ndarray, lp) -> np.ndarray:
    """Root probing: a free binary whose LP with it set to 1 is infeasible must be 0."""
    root = lp(lb, ub, None)
    ub = ub.copy()
    if root.status is not LpStatus.OPTIMAL:
        return ub
    free = np.flatnonzero(model.integral & (lb == 0) & (ub == 1) & (root.x < 1 - 1e-9))
    for j in free:
        trial = lb.copy()
        trial[j] = 1.0
        res = lp(trial, ub, CURRENT)
        if res.status is LpStatus.INFEASIBLE:
            ub[j] = 0.0
    return ub

