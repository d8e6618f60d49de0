"""MILP formulation of multi-application deployment on a shared sensor network.

Variables (symbolic names double as solution keys):

``z[j]``      application ``j`` deployed
``x[i]``      node ``i`` active
``h[j,k]``    test point ``k`` of application ``j`` covered
``y[i,j,k]``  node ``i`` senses test point ``k`` for application ``j``
``f[i,h]``    flow on link ``i -> h`` in bits/s
``g[i,h]``    link ``i -> h`` chosen as the single route out of ``i``

Constraint tags name the equation family and its index, e.g. ``Eq2[j,k]``
(coverage), ``Eq4[j]`` (deployment needs every test point), ``Eq15[i,h]``
(airtime of a link and everything interfering with it).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scenario import DodagRouting, KindOfApp, Scenario, build_dodag

INT_TOL = 1e-6
FEAS_TOL = 1e-6


class Routing(str, Enum):
    MULTIPATH = "multipath"
    SINGLEPATH = "singlepath"
    STATIC = "static"


@dataclass(frozen=True)
class RoutingMode:
    kind: Routing
    dodag: DodagRouting | None = None

    @classmethod
    def multipath(cls) -> "RoutingMode":
        return cls(Routing.MULTIPATH)

    @classmethod
    def singlepath(cls) -> "RoutingMode":
        return cls(Routing.SINGLEPATH)

    @classmethod
    def static(cls, dodag: DodagRouting) -> "RoutingMode":
        return cls(Routing.STATIC, dodag)

    @property
    def name(self) -> str:
        return self.kind.value


def as_mode(mode: "RoutingMode | Routing | str", scenario: Scenario) -> RoutingMode:
    """Normalise a routing mode; static mode without a tree gets the min-hop DODAG."""
    if isinstance(mode, RoutingMode):
        if mode.kind is Routing.STATIC and mode.dodag is None:
            return RoutingMode.static(build_dodag(scenario))
        return mode
    kind = Routing(mode)
    if kind is Routing.STATIC:
        return RoutingMode.static(build_dodag(scenario))
    return RoutingMode(kind)


class VarKind(str, Enum):
    Z = "z"
    X = "x"
    Y = "y"
    H = "h"
    F = "f"
    G = "g"


@dataclass(frozen=True)
class VariableHandle:
    index: int
    kind: VarKind
    key: tuple[int, ...]
    lower: float = 0.0
    upper: float = 1.0
    integral: bool = True

    @property
    def name(self) -> str:
        return var_name(self.kind, self.key)


def var_name(kind: VarKind | str, key: Sequence[int]) -> str:
    return f"{VarKind(kind).value}[{','.join(str(int(k)) for k in key)}]"


_NAME_RE = re.compile(r"^([zxyhfg])\[(-?\d+(?:,-?\d+)*)\]$")


def parse_var_name(name: str) -> tuple[VarKind, tuple[int, ...]]:
    m = _NAME_RE.match(name)
    if not m:
        raise ValueError(f"not a variable name: {name!r}")
    return VarKind(m.group(1)), tuple(int(t) for t in m.group(2).split(","))


class Sense(str, Enum):
    LE = "<="
    EQ = "=="
    GE = ">="


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, float], ...]
    sense: Sense
    rhs: float
    tag: str


class ModelIndex:
    """Bidirectional map between symbolic names and variable handles."""

    def __init__(self, variables: Sequence[VariableHandle]):
        self._by_name = {v.name: v.index for v in variables}

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> int:
        return self._by_name[name]

    def get(self, name: str, default=None):
        return self._by_name.get(name, default)

    def names(self) -> list[str]:
        return list(self._by_name)


@dataclass(frozen=True)
class DenseForm:
    """Constraint matrix of a model; shared between a model and its fixed/relaxed copies."""

    A: np.ndarray
    senses: np.ndarray  # -1 LE, 0 EQ, +1 GE
    rhs: np.ndarray
    cost: np.ndarray  # maximisation objective


class MilpModel:
    def __init__(self, variables: Sequence[VariableHandle], constraints: Sequence[LinearConstraint],
                 objective: Sequence[tuple[int, float]], mode: RoutingMode | None = None,
                 index: ModelIndex | None = None, dense: DenseForm | None = None):
        self.variables = tuple(variables)
        self.constraints = tuple(constraints)
        self.objective = tuple(objective)
        self.mode = mode
        self.index = index or ModelIndex(self.variables)
        if dense is not None:
            self.__dict__["dense"] = dense

    def __repr__(self) -> str:
        n_int = sum(v.integral for v in self.variables)
        return (f"MilpModel({len(self.variables)} vars, {n_int} integral, "
                f"{len(self.constraints)} rows, mode={self.mode.name if self.mode else None})")

    def handle(self, name: str) -> VariableHandle:
        return self.variables[self.index[name]]

    @cached_property
    def dense(self) -> DenseForm:
        n, m = len(self.variables), len(self.constraints)
        A = np.zeros((m, n))
        senses = np.zeros(m, dtype=int)
        rhs = np.zeros(m)
        code = {Sense.LE: -1, Sense.EQ: 0, Sense.GE: 1}
        for r, con in enumerate(self.constraints):
            for idx, coef in con.terms:
                A[r, idx] += coef
            senses[r] = code[con.sense]
            rhs[r] = con.rhs
        cost = np.zeros(n)
        for idx, coef in self.objective:
            cost[idx] += coef
        return DenseForm(A, senses, rhs, cost)

    @property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    @property
    def integral(self) -> np.ndarray:
        return np.array([v.integral for v in self.variables], dtype=bool)

    def with_variables(self, variables: Sequence[VariableHandle]) -> "MilpModel":
        return MilpModel(variables, self.constraints, self.objective, self.mode, self.index, self.dense)

    def objective_value(self, values: Mapping[str, float]) -> float:
        return float(sum(coef * values.get(self.variables[idx].name, 0.0) for idx, coef in self.objective))


# ---------------------------------------------------------------------------
# building


class _Builder:
    def __init__(self):
        self.variables: list[VariableHandle] = []
        self.constraints: list[LinearConstraint] = []
        self.ids: dict[tuple, int] = {}

    def var(self, kind: VarKind, key: tuple[int, ...], upper: float = 1.0, integral: bool = True) -> int:
        idx = len(self.variables)
        self.variables.append(VariableHandle(idx, kind, key, 0.0, upper, integral))
        self.ids[kind, key] = idx
        return idx

    def add(self, terms: Iterable[tuple[int, float]], sense: Sense, rhs: float, tag: str) -> None:
        merged: dict[int, float] = {}
        for idx, coef in terms:
            merged[idx] = merged.get(idx, 0.0) + coef
        merged = {k: c for k, c in merged.items() if c != 0.0}
        if not merged:
            return
        if sense is Sense.LE:
            # drop rows no assignment within bounds can violate
            worst = sum(c * (self.variables[k].upper if c > 0 else self.variables[k].lower)
                        for k, c in merged.items())
            if worst <= rhs:
                return
        self.constraints.append(LinearConstraint(tuple(sorted(merged.items())), sense, float(rhs), tag))


def _tag(family: str, *key: int) -> str:
    return f"{family}[{','.join(str(k) for k in key)}]"


def build_model(scenario: Scenario, mode: RoutingMode | Routing | str = Routing.MULTIPATH,
                tighten: bool = False) -> MilpModel:
    """The deployment MILP under ``mode``.

    ``tighten`` adds valid inequalities (tag ``Valid``) that cut off
    fractional points only: an application covers each of its test points
    exactly when it is active, at most one item needing over half of a node
    budget fits there, a sensing node is active, and a non-sink sensing node
    has an active next hop (in static mode, every tree ancestor is active).
    They leave the integer optimum unchanged and mainly help
    branch-and-bound.
    """
    mode = as_mode(mode, scenario)
    topo = scenario.topology
    K = scenario.big_m_bps
    radio = scenario.radio
    sinks = set(scenario.sinks)
    b = _Builder()

    z = {a.id: b.var(VarKind.Z, (a.id,)) for a in scenario.applications}
    x = {n.id: b.var(VarKind.X, (n.id,)) for n in scenario.nodes}
    hv, yv = {}, {}
    for a in scenario.applications:
        for tp in a.test_points:
            hv[a.id, tp.id] = b.var(VarKind.H, (a.id, tp.id))
            for i in topo.coverage[a.id, tp.id]:
                yv[i, a.id, tp.id] = b.var(VarKind.Y, (i, a.id, tp.id))

    if mode.kind is Routing.STATIC:
        flow_links = sorted(mode.dodag.parent.items())
    else:
        # sinks never transmit: the delivery balance forces their outflow to zero
        flow_links = [(i, h) for i, h in topo.links if i not in sinks]
    f = {l: b.var(VarKind.F, l, upper=K, integral=False) for l in flow_links}
    g = {}
    if mode.kind is Routing.SINGLEPATH:
        g = {l: b.var(VarKind.G, l) for l in flow_links}

    out_links: dict[int, list[tuple[int, int]]] = {i: [] for i in topo.ids}
    in_links: dict[int, list[tuple[int, int]]] = {i: [] for i in topo.ids}
    for (i, h) in flow_links:
        out_links[i].append((i, h))
        in_links[h].append((i, h))
    y_at: dict[int, list[tuple[int, int, int]]] = {i: [] for i in topo.ids}
    for key in yv:
        y_at[key[0]].append(key)
    apps = {a.id: a for a in scenario.applications}

    # coverage
    for a in scenario.applications:
        for tp in a.test_points:
            terms = [(yv[i, a.id, tp.id], 1.0) for i in topo.coverage[a.id, tp.id]]
            b.add(terms + [(hv[a.id, tp.id], -1.0)], Sense.EQ, 0.0, _tag("Eq2", a.id, tp.id))
        for i in topo.ids:
            keys = [k for k in y_at[i] if k[1] == a.id]
            if len(keys) > a.per_node_cap:
                b.add([(yv[k], 1.0) for k in keys], Sense.LE, a.per_node_cap, _tag("Eq4N", i, a.id))
        b.add([(z[a.id], float(len(a.test_points)))] + [(hv[a.id, tp.id], -1.0) for tp in a.test_points],
              Sense.EQ, 0.0, _tag("Eq4", a.id))

    # node budgets
    for n in scenario.nodes:
        i = n.id
        b.add([(yv[k], apps[k[1]].memory_bits) for k in y_at[i]], Sense.LE, n.profile.memory_bits, _tag("Eq5", i))
        if math.isfinite(n.profile.mips):
            b.add([(yv[k], apps[k[1]].mips) for k in y_at[i]], Sense.LE, n.profile.mips, _tag("Eq6", i))

    # flow conservation, delivery, activation
    def generated(i):
        return [(yv[k], apps[k[1]].rate_bps) for k in y_at[i]]

    for i in topo.ids:
        inflow = [(f[l], 1.0) for l in in_links[i]]
        if i not in sinks:
            outflow = [(f[l], -1.0) for l in out_links[i]]
            b.add(inflow + outflow + generated(i), Sense.EQ, 0.0, _tag("Eq7", i))
        b.add(inflow + generated(i) + [(x[i], -K)], Sense.LE, 0.0, _tag("Eq9", i))
    delivered = [(z[a.id], len(a.test_points) * a.rate_bps) for a in scenario.applications]
    for s in sorted(sinks):
        delivered += [(f[l], -1.0) for l in in_links[s]]
        delivered += [(idx, -c) for idx, c in generated(s)]
    b.add(delivered, Sense.EQ, 0.0, "Eq8")

    # single route out of each node
    if g:
        for i in topo.ids:
            if len(out_links[i]) > 1:
                b.add([(g[l], 1.0) for l in out_links[i]], Sense.LE, 1.0, _tag("Eq12", i))
        for l in flow_links:
            b.add([(f[l], 1.0), (g[l], -K)], Sense.LE, 0.0, _tag("Eq13", *l))

    # airtime: a link plus everything interfering with it fits in one time unit
    cap = {n.id: n.profile.bandwidth_bps for n in scenario.nodes}
    rows = []
    for (i, h) in topo.links:
        members = [l for l in sorted(topo.interfering(i, h) | {(i, h)}) if l in f]
        if members:
            rows.append(((i, h), frozenset(members)))
    for (i, h), members in _undominated(rows):
        terms = [(f[l], 1.0 / min(cap[l[0]], cap[l[1]])) for l in sorted(members)]
        b.add(terms, Sense.LE, 1.0, _tag("Eq15", i, h))

    # energy: radio plus processing within the lifetime budget
    for n in scenario.nodes:
        i = n.id
        terms = [(f[l], radio.tx_energy_per_bit(topo.d(*l))) for l in out_links[i]]
        terms += [(f[l], radio.rx_energy) for l in in_links[i]]
        terms += [(yv[k], apps[k[1]].cpu_watts) for k in y_at[i]]
        b.add(terms, Sense.LE, n.profile.energy_j / scenario.lifetime_s, _tag("Eq18", i))

    if tighten:
        # an active application covers every test point, an inactive one none
        for (j, k), idx in hv.items():
            b.add([(idx, 1.0), (z[j], -1.0)], Sense.EQ, 0.0, _tag("Valid", j, k))
        # budget cliques: at most one item that needs more than half of a node's budget
        for n in scenario.nodes:
            i = n.id
            budgets = [("m", lambda a: a.memory_bits, n.profile.memory_bits), ("c", lambda a: a.mips, n.profile.mips),
                       ("e", lambda a: a.cpu_watts, n.profile.energy_j / scenario.lifetime_s)]
            for code, need, cap_i in budgets:
                heavy = [yv[k] for k in y_at[i] if need(apps[k[1]]) > cap_i / 2]
                if len(heavy) > 1:
                    b.add([(idx, 1.0) for idx in heavy], Sense.LE, 1.0, _tag("Valid", i, -1 - "mce".index(code)))
        for (i, j, k), idx in yv.items():
            b.add([(idx, 1.0), (x[i], -1.0)], Sense.LE, 0.0, _tag("Valid", i, j, k))
            if i in sinks:
                continue
            if mode.kind is Routing.STATIC:
                for hop in mode.dodag.path_to_sink(i)[1:]:
                    b.add([(idx, 1.0), (x[hop], -1.0)], Sense.LE, 0.0, _tag("Valid", i, j, k, hop))
            else:
                nxt = sorted({h for _, h in out_links[i]})
                b.add([(idx, 1.0)] + [(x[h], -1.0) for h in nxt], Sense.LE, 0.0, _tag("Valid", i, j, k, -1))

    objective = [(z[a.id], a.preference) for a in scenario.applications]
    objective += [(x[n.id], -n.activation_cost) for n in scenario.nodes if n.activation_cost]
    return MilpModel(b.variables, b.constraints, objective, mode)


def _undominated(rows):
    """Drop airtime rows whose link set is contained in another row's (same coefficients per link)."""
    if not rows:
        return []
    universe = sorted({l for _, s in rows for l in s})
    col = {l: c for c, l in enumerate(universe)}
    order = sorted(range(len(rows)), key=lambda r: (-len(rows[r][1]), rows[r][0]))
    kept: list[int] = []
    mat = np.zeros((len(rows), len(universe)), dtype=bool)
    for r in order:
        cols = [col[l] for l in rows[r][1]]
        if kept and mat[kept][:, cols].all(axis=1).any():
            continue
        mat[r, cols] = True
        kept.append(r)
    return [rows[r] for r in sorted(kept, key=lambda r: rows[r][0])]


def relax(model: MilpModel) -> MilpModel:
    return model.with_variables([replace(v, integral=False) for v in model.variables])


def fix_variable(model: MilpModel, handle: VariableHandle | str | int, value: float) -> MilpModel:
    """Copy of ``model`` with one variable pinned to ``value``."""
    if isinstance(handle, str):
        idx = model.index[handle]
    elif isinstance(handle, VariableHandle):
        idx = handle.index
    else:
        idx = int(handle)
    v = model.variables[idx]
    if not (v.lower - 1e-12 <= value <= v.upper + 1e-12):
        raise ValueError(f"{v.name}: value {value} outside bounds [{v.lower}, {v.upper}]")
    variables = list(model.variables)
    variables[idx] = replace(v, lower=float(value), upper=float(value))
    return model.with_variables(variables)


def fix_variables(model: MilpModel, fixes: Mapping[str, float] | Iterable[tuple[str, float]]) -> MilpModel:
    items = fixes.items() if isinstance(fixes, Mapping) else fixes
    variables = list(model.variables)
    for name, value in items:
        v = variables[model.index[name]]
        if not (v.lower - 1e-12 <= value <= v.upper + 1e-12):
            raise ValueError(f"{v.name}: value {value} outside bounds [{v.lower}, {v.upper}]")
        variables[v.index] = replace(v, lower=float(value), upper=float(value))
    return model.with_variables(variables)


def _lp_name(name: str) -> str:
    return re.sub(r"[\[\],]", "_", name).rstrip("_")


def write_lp(model: MilpModel) -> str:
    """CPLEX-LP text of the model; constraint tags become row names."""

    def expr(terms):
        parts = []
        for idx, coef in terms:
            sign = "-" if coef < 0 else "+"
            parts.append(f"{sign} {abs(coef):.12g} {_lp_name(model.variables[idx].name)}")
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else text

    lines = ["\\ multi-application deployment model", "Maximize", f" obj: {expr(model.objective) or '0'}",
             "Subject To"]
    for con in model.constraints:
        op = {Sense.LE: "<=", Sense.EQ: "=", Sense.GE: ">="}[con.sense]
        lines.append(f" {_lp_name(con.tag)}: {expr(con.terms)} {op} {con.rhs:.12g}")
    lines.append("Bounds")
    for v in model.variables:
        upper = "+inf" if math.isinf(v.upper) else f"{v.upper:.12g}"
        lines.append(f" {v.lower:.12g} <= {_lp_name(v.name)} <= {upper}")
    generals = [_lp_name(v.name) for v in model.variables if v.integral]
    if generals:
        lines.append("General")
        lines.extend(f" {g}" for g in generals)
    lines.append("End")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# solutions


class Status(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"  # incumbent, optimality not proven (limit hit)
    INFEASIBLE = "infeasible"
    NO_SOLUTION = "no_solution"  # limit hit before any incumbent was found


@dataclass
class Solution:
    values: dict[str, float]
    objective: float
    status: Status
    routing: str | None = None
    stats: dict = field(default_factory=dict)

    def value(self, name: str) -> float:
        return self.values.get(name, 0.0)

    def to_dict(self) -> dict:
        data = {
            "status": self.status.value,
            "objective": self.objective if math.isfinite(self.objective) else None,
            "routing": self.routing,
            "values": {k: self.values[k] for k in sorted(self.values, key=_name_sort_key)},
        }
        if self.stats:
            data["stats"] = self.stats
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Solution":
        unknown = set(data) - {"status", "objective", "routing", "values", "stats"}
        if unknown:
            raise ValueError(f"solution: unknown key(s) {sorted(unknown)}")
        values = {}
        for name, v in data["values"].items():
            parse_var_name(name)
            values[name] = float(v)
        objective = data["objective"]
        objective = -math.inf if objective is None else float(objective)
        return cls(values, objective, Status(data["status"]), data.get("routing"),
                   dict(data.get("stats") or {}))

    @classmethod
    def empty(cls, scenario: Scenario, routing: str | None = None, status: Status = Status.FEASIBLE) -> "Solution":
        values = {var_name("z", (a.id,)): 0.0 for a in scenario.applications}
        values.update({var_name("x", (n.id,)): 0.0 for n in scenario.nodes})
        return cls(values, 0.0, status, routing)


def _name_sort_key(name: str):
    kind, key = parse_var_name(name)
    return ("zxhyfg".index(kind.value), key)


def solution_from_vector(model: MilpModel, vec: Sequence[float], status: Status,
                         round_integral: bool = True) -> Solution:
    values = {}
    for v, val in zip(model.variables, vec):
        val = float(val)
        if round_integral and v.integral:
            val = float(round(val))
        elif abs(val) < 1e-9:
            val = 0.0
        values[v.name] = val
    objective = model.objective_value(values)
    return Solution(values, objective, status, model.mode.name if model.mode else None)


# ---------------------------------------------------------------------------
# independent validation


@dataclass(frozen=True)
class Violation:
    tag: str
    residual: float

    def __str__(self) -> str:
        return f"{self.tag}: residual {self.residual:.3g}"


def validate_solution(scenario: Scenario, mode: RoutingMode | Routing | str, solution: Solution | Mapping[str, float],
                      tol: float = FEAS_TOL) -> list[Violation]:
    """Re-check every equation family directly from the scenario.

    Does not look at any :class:`MilpModel`; variables absent from the
    solution count as zero.  Binaries are checked with an absolute
    tolerance, rows with ``tol`` relative to the row's magnitude.
    """
    mode = as_mode(mode, scenario)
    values = solution.values if isinstance(solution, Solution) else dict(solution)
    topo = scenario.topology
    K = scenario.big_m_bps
    radio = scenario.radio
    node_ids = set(topo.ids)
    sinks = set(scenario.sinks)
    apps = {a.id: a for a in scenario.applications}
    out: list[Violation] = []

    z, x, h, y, f, g = {}, {}, {}, {}, {}, {}
    store = {VarKind.Z: z, VarKind.X: x, VarKind.H: h, VarKind.Y: y, VarKind.F: f, VarKind.G: g}
    for name, val in values.items():
        try:
            kind, key = parse_var_name(name)
        except ValueError:
            out.append(Violation(f"Name[{name}]", math.nan))
            continue
        store[kind][key if len(key) > 1 else key[0]] = float(val)
        if kind is not VarKind.F:
            if min(abs(val), abs(val - 1.0)) > INT_TOL:
                out.append(Violation(f"Binary[{name}]", min(abs(val), abs(val - 1.0))))
        elif val < -tol:
            out.append(Violation(f"Bound[{name}]", -val))

    def check(tag, lhs, sense, rhs, magnitude):
        scale = max(1.0, abs(rhs), magnitude)
        if sense == "<=":
            res = lhs - rhs
        elif sense == ">=":
            res = rhs - lhs
        else:
            res = abs(lhs - rhs)
        if res > tol * scale:
            out.append(Violation(tag, res))

    # structural zeros
    for (i, j, k), val in y.items():
        if abs(val) > INT_TOL and (j not in apps or (j, k) not in topo.coverage or i not in topo.coverage[j, k]):
            out.append(Violation(_tag("Eq3", i, j, k), val))
    for (i, hh), val in f.items():
        if abs(val) <= tol:
            continue
        if i not in node_ids or hh not in node_ids or i == hh or topo.d(i, hh) > topo.r_tx:
            out.append(Violation(_tag("Eq10", i, hh), val))
        elif mode.kind is Routing.STATIC and mode.dodag.parent.get(i) != hh:
            out.append(Violation(_tag("Static", i, hh), val))

    # coverage and deployment
    for a in scenario.applications:
        covered = 0.0  # test points actually sensed, which is what h stands for
        for tp in a.test_points:
            s = sum(y.get((i, a.id, tp.id), 0.0) for i in topo.coverage[a.id, tp.id])
            check(_tag("Eq2", a.id, tp.id), s, "==", h.get((a.id, tp.id), 0.0), 1.0)
            covered += s
        total_h = sum(h.get((a.id, tp.id), 0.0) for tp in a.test_points)
        n_tp = len(a.test_points)
        worst = max(abs(n_tp * z.get(a.id, 0.0) - total_h), abs(n_tp * z.get(a.id, 0.0) - covered))
        check(_tag("Eq4", a.id), worst, "==", 0.0, n_tp)
        per_node: dict[int, float] = {}
        for (i, j, k), val in y.items():
            if j == a.id:
                per_node[i] = per_node.get(i, 0.0) + val
        for i, s in per_node.items():
            check(_tag("Eq4N", i, a.id), s, "<=", a.per_node_cap, 1.0)

    sensed = {i: [] for i in node_ids}
    for (i, j, k), val in y.items():
        if i in sensed and j in apps:
            sensed[i].append((apps[j], val))

    inflow = {i: 0.0 for i in node_ids}
    outflow = {i: 0.0 for i in node_ids}
    for (i, hh), val in f.items():
        if i in node_ids and hh in node_ids:
            outflow[i] += val
            inflow[hh] += val

    for n in scenario.nodes:
        i = n.id
        mem = sum(a.memory_bits * v for a, v in sensed[i])
        check(_tag("Eq5", i), mem, "<=", n.profile.memory_bits, mem)
        mips = sum(a.mips * v for a, v in sensed[i])
        check(_tag("Eq6", i), mips, "<=", n.profile.mips, mips)
        gen = sum(a.rate_bps * v for a, v in sensed[i])
        if i not in sinks:
            check(_tag("Eq7", i), inflow[i] + gen, "==", outflow[i], inflow[i] + gen + outflow[i])
        check(_tag("Eq9", i), inflow[i] + gen, "<=", K * x.get(i, 0.0), inflow[i] + gen)

    produced = sum(len(a.test_points) * a.rate_bps * z.get(a.id, 0.0) for a in scenario.applications)
    received = sum(inflow[s] + sum(a.rate_bps * v for a, v in sensed[s]) for s in sinks)
    check("Eq8", produced, "==", received, produced + received)

    if mode.kind is Routing.SINGLEPATH:
        chosen: dict[int, float] = {}
        for (i, hh), val in g.items():
            chosen[i] = chosen.get(i, 0.0) + val
            if val > INT_TOL and (i not in node_ids or hh not in node_ids or topo.d(i, hh) > topo.r_tx):
                out.append(Violation(_tag("Eq11", i, hh), val))
        for i, s in chosen.items():
            check(_tag("Eq12", i), s, "<=", 1.0, 1.0)
        for (i, hh), val in f.items():
            check(_tag("Eq13", i, hh), val, "<=", K * g.get((i, hh), 0.0), val)

    cap = {n.id: n.profile.bandwidth_bps for n in scenario.nodes}
    r_if = topo.r_if
    active = [(l, v) for l, v in f.items() if v > 0 and l[0] in node_ids and l[1] in node_ids and l[0] != l[1]]
    for (i, hh) in topo.links:
        used = 0.0
        for (gg, t), v in active:
            conflict = (
                (gg, t) == (i, hh)
                or gg in (i, hh) or t in (i, hh)
                or topo.d(i, t) < r_if
                or topo.d(gg, hh) < r_if
            )
            if conflict:
                used += v / min(cap[gg], cap[t])
        check(_tag("Eq15", i, hh), used, "<=", 1.0, used)

    for n in scenario.nodes:
        i = n.id
        power = sum(radio.tx_energy_per_bit(topo.d(i, hh)) * v for (gi, hh), v in active if gi == i)
        power += radio.rx_energy * inflow[i]
        power += sum(a.cpu_watts * v for a, v in sensed[i])
        budget = n.profile.energy_j / scenario.lifetime_s
        check(_tag("Eq18", i), power, "<=", budget, power)

    if isinstance(solution, Solution) and solution.status in (Status.OPTIMAL, Status.FEASIBLE):
        obj = sum(a.preference * z.get(a.id, 0.0) for a in scenario.applications)
        obj -= sum(n.activation_cost * x.get(n.id, 0.0) for n in scenario.nodes)
        check("Obj", solution.objective, "==", obj, abs(obj))
    return out


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class DeploymentMetrics:
    objective: float
    active_apps: dict[str, int]
    active_nodes: dict[str, int]
    sink_inflow_bps: float

    @property
    def total_apps(self) -> int:
        return sum(self.active_apps.values())

    @property
    def total_nodes(self) -> int:
        return sum(self.active_nodes.values())


def metrics(scenario: Scenario, solution: Solution) -> DeploymentMetrics:
    apps = {k.value: 0 for k in KindOfApp if k is not KindOfApp.CUSTOM}
    for a in scenario.applications:
        if solution.value(var_name("z", (a.id,))) >= 0.5:
            apps[a.kind.value] = apps.get(a.kind.value, 0) + 1
    profiles = sorted({n.profile.name for n in scenario.nodes} | {"TelosB", "BeagleBone"})
    nodes = {p: 0 for p in profiles}
    for n in scenario.nodes:
        if solution.value(var_name("x", (n.id,))) >= 0.5:
            nodes[n.profile.name] += 1
    sinks = set(scenario.sinks)
    inflow = 0.0
    for name, val in solution.values.items():
        kind, key = parse_var_name(name)
        if kind is VarKind.F and key[1] in sinks:
            inflow += val
        elif kind is VarKind.Y and key[0] in sinks:
            inflow += scenario.app(key[1]).rate_bps * val
    return DeploymentMetrics(solution.objective, apps, nodes, inflow)
