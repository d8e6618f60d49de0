"""Exhaustive reference solver for tiny instances.

Shares nothing with the MILP path except the scenario: deployments and
sensor assignments are enumerated explicitly, tree routes are followed hop
by hop, and only multipath flow splitting is delegated to an LP feasibility
check (scipy's HiGHS).  Used as an oracle for :func:`solve_milp`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..model import Routing, RoutingMode, Solution, Status, as_mode, var_name
from ..scenario import Scenario

MAX_ASSIGNMENTS = 2 ** 24
VISIT_BUDGET = 2_000_000
_EPS = 1e-9


class InstanceTooLarge(RuntimeError):
    pass


@dataclass
class _Best:
    objective: float
    values: dict[str, float]


def enumerate_exact(scenario: Scenario, mode: RoutingMode | Routing | str = Routing.MULTIPATH,
                    budget: int = VISIT_BUDGET) -> Solution:
    """Optimal deployment by exhaustive search; refuses instances that are too large."""
    return _Search(scenario, as_mode(mode, scenario), budget).run()


class _Search:
    def __init__(self, scenario: Scenario, mode: RoutingMode, budget: int):
        self.sc = scenario
        self.mode = mode
        self.topo = scenario.topology
        self.budget = budget
        self.visits = 0
        self.apps = list(scenario.applications)
        self.nodes = {n.id: n for n in scenario.nodes}
        self.sinks = set(scenario.sinks)
        self.K = scenario.big_m_bps
        self.cost = {n.id: n.activation_cost for n in scenario.nodes}
        self.cap = {n.id: n.profile.bandwidth_bps for n in scenario.nodes}
        self.energy = {n.id: n.profile.energy_j / scenario.lifetime_s for n in scenario.nodes}
        ids = sorted(self.nodes)
        r_tx = self.topo.r_tx
        self.links = [(i, h) for i in ids for h in ids if i != h and self.topo.d(i, h) <= r_tx]
        self.out = {i: [h for (g, h) in self.links if g == i] for i in ids}

        size = 1
        for a in self.apps:
            ways = 1
            for tp in a.test_points:
                ways *= len(self._cover(a, tp))
            size *= 1 + ways
        if size > MAX_ASSIGNMENTS:
            raise InstanceTooLarge(f"{size} deployment/assignment combinations exceed {MAX_ASSIGNMENTS}")

    def _cover(self, app, tp) -> list[int]:
        return sorted(n.id for n in self.sc.nodes
                      if app.can_run_on(n.profile) and n.position.distance(tp.position) <= n.sensing_range)

    def _tick(self) -> None:
        self.visits += 1
        if self.visits > self.budget:
            raise InstanceTooLarge(f"search exceeded {self.budget} visits")

    # -- deployment / assignment enumeration --------------------------------

    def run(self) -> Solution:
        self.best = _Best(0.0, {})  # deploying nothing is always feasible
        remaining = [sum(a.preference for a in self.apps[j:]) for j in range(len(self.apps) + 1)]
        self._remaining = remaining
        self._apps_dfs(0, 0.0, {}, {}, set())
        values = {var_name("z", (a.id,)): 0.0 for a in self.apps}
        values.update({var_name("x", (i,)): 0.0 for i in self.nodes})
        values.update(self.best.values)
        sol = Solution(values, 0.0, Status.OPTIMAL, self.mode.name)
        obj = sum(a.preference * values[var_name("z", (a.id,))] for a in self.apps)
        obj -= sum(self.cost[i] * values[var_name("x", (i,))] for i in self.nodes)
        sol.objective = float(obj)
        sol.stats = {"visits": self.visits}
        return sol

    def _apps_dfs(self, j: int, gained: float, assign: dict, load: dict, sensing: set) -> None:
        self._tick()
        floor = sum(self.cost[i] for i in sensing)
        if gained + self._remaining[j] - floor <= self.best.objective + _EPS:
            return
        if j == len(self.apps):
            self._route(gained, assign, load, sensing)
            return
        app = self.apps[j]
        self._tps_dfs(j, app, 0, gained, assign, load, sensing, {})
        self._apps_dfs(j + 1, gained, assign, load, sensing)

    def _tps_dfs(self, j, app, k, gained, assign, load, sensing, used) -> None:
        if k == len(app.test_points):
            self._apps_dfs(j + 1, gained + app.preference, assign, load, sensing)
            return
        tp = app.test_points[k]
        for i in self._cover(app, tp):
            if used.get(i, 0) >= app.per_node_cap:
                continue
            mem, mips, watts, rate = load.get(i, (0.0, 0.0, 0.0, 0.0))
            node = self.nodes[i]
            mem += app.memory_bits
            mips += app.mips
            watts += app.cpu_watts
            if mem > node.profile.memory_bits * (1 + 1e-9) or mips > node.profile.mips * (1 + 1e-9):
                continue
            if watts > self.energy[i] * (1 + 1e-9):
                continue
            new_load = dict(load)
            new_load[i] = (mem, mips, watts, rate + app.rate_bps)
            new_used = dict(used)
            new_used[i] = used.get(i, 0) + 1
            new_assign = dict(assign)
            new_assign[app.id, tp.id] = i
            self._tps_dfs(j, app, k + 1, gained, new_assign, new_load, sensing | {i}, new_used)

    # -- routing ------------------------------------------------------------

    def _route(self, gained: float, assign: dict, load: dict, sensing: set) -> None:
        if not assign:
            return
        gen = {i: load[i][3] for i in load}
        cpu = {i: load[i][2] for i in load}
        if self.mode.kind is Routing.STATIC:
            parent = {}
            loaded = set(sensing)
            for i in sensing:
                path = self.mode.dodag.path_to_sink(i)
                if not path:
                    return
                loaded.update(path)
                for a, b in zip(path, path[1:]):
                    parent[a] = b
            objective = gained - sum(self.cost[i] for i in loaded)
            if objective <= self.best.objective + _EPS:
                return
            flows = self._tree_flows(parent, gen)
            if flows is not None and self._feasible(flows, gen, cpu):
                self._accept(objective, assign, loaded, flows, None)
        elif self.mode.kind is Routing.SINGLEPATH:
            self._parents_dfs(gained, assign, gen, cpu, set(sensing), {})
        else:
            self._multipath(gained, assign, gen, cpu, sensing)

    def _parents_dfs(self, gained, assign, gen, cpu, loaded: set, parent: dict) -> None:
        self._tick()
        objective = gained - sum(self.cost[i] for i in loaded)
        if objective <= self.best.objective + _EPS:
            return
        pending = sorted(i for i in loaded if i not in self.sinks and i not in parent)
        if not pending:
            flows = self._tree_flows(parent, gen)
            if flows is not None and self._feasible(flows, gen, cpu):
                self._accept(objective, assign, loaded, flows, parent)
            return
        i = pending[0]
        for h in self.out[i]:
            # reject h if following h's parents leads back to i
            v, cycle = h, False
            while v in parent:
                v = parent[v]
                if v == i:
                    cycle = True
                    break
            if cycle or h == i:
                continue
            parent[i] = h
            self._parents_dfs(gained, assign, gen, cpu, loaded | {h}, parent)
            del parent[i]

    def _tree_flows(self, parent: dict, gen: dict) -> dict | None:
        flows: dict[tuple[int, int], float] = {}
        for i, rate in gen.items():
            v = i
            seen = set()
            while v not in self.sinks:
                if v in seen or v not in parent:
                    return None
                seen.add(v)
                link = (v, parent[v])
                flows[link] = flows.get(link, 0.0) + rate
                v = parent[v]
        return flows

    def _conflict(self, a: tuple[int, int], b: tuple[int, int]) -> bool:
        (i, h), (g, t) = a, b
        r_if = self.topo.r_if
        return (a == b or g in (i, h) or t in (i, h)
                or self.topo.d(i, t) < r_if or self.topo.d(g, h) < r_if)

    def _feasible(self, flows: dict, gen: dict, cpu: dict) -> bool:
        inflow: dict[int, float] = {}
        for (i, h), v in flows.items():
            inflow[h] = inflow.get(h, 0.0) + v
        for i in set(inflow) | set(gen):
            if inflow.get(i, 0.0) + gen.get(i, 0.0) > self.K * (1 + 1e-9):
                return False
        active = [(l, v) for l, v in flows.items() if v > 0]
        for l in self.links:
            used = sum(v / min(self.cap[g], self.cap[t]) for (g, t), v in active if self._conflict(l, (g, t)))
            if used > 1 + 1e-9:
                return False
        radio = self.sc.radio
        for i in self.nodes:
            power = cpu.get(i, 0.0) + radio.rx_energy * inflow.get(i, 0.0)
            power += sum(radio.tx_energy_per_bit(self.topo.d(g, t)) * v for (g, t), v in active if g == i)
            if power > self.energy[i] * (1 + 1e-9):
                return False
        return True

    def _multipath(self, gained, assign, gen, cpu, sensing) -> None:
        base = set(sensing)
        floor = gained - sum(self.cost[i] for i in base)
        if floor <= self.best.objective + _EPS:
            return
        if self._flow_lp(set(self.nodes), gen, cpu) is None:
            return  # allowing more nodes never hurts feasibility, so nothing smaller works either
        extra = sorted(set(self.nodes) - base)
        subsets = []
        for r in range(len(extra) + 1):
            subsets.extend(itertools.combinations(extra, r))
        subsets.sort(key=lambda s: (sum(self.cost[i] for i in s), len(s), s))
        for s in subsets:
            objective = floor - sum(self.cost[i] for i in s)
            if objective <= self.best.objective + _EPS:
                return
            self._tick()
            allowed = base | set(s)
            flows = self._flow_lp(allowed, gen, cpu)
            if flows is not None:
                loaded = {i for i in allowed if gen.get(i, 0) > 0}
                loaded |= {h for (_, h), v in flows.items() if v > 1e-9}
                self._accept(gained - sum(self.cost[i] for i in loaded), assign, loaded, flows, None)
                return

    def _flow_lp(self, allowed: set, gen: dict, cpu: dict) -> dict | None:
        from scipy.optimize import linprog

        links = [(i, h) for (i, h) in self.links if i in allowed and h in allowed and i not in self.sinks]
        nodes = sorted(self.nodes)
        if not links:
            return {} if all(i in self.sinks for i in gen) else None
        col = {l: c for c, l in enumerate(links)}
        n = len(links)
        A_eq, b_eq, A_ub, b_ub = [], [], [], []
        for i in nodes:
            if i in self.sinks:
                continue
            row = np.zeros(n)
            for (g, h), c in col.items():
                if h == i:
                    row[c] += 1.0
                if g == i:
                    row[c] -= 1.0
            if row.any() or gen.get(i, 0.0):
                A_eq.append(row)
                b_eq.append(-gen.get(i, 0.0))
        radio = self.sc.radio
        for i in nodes:
            inrow = np.zeros(n)
            for (g, h), c in col.items():
                if h == i:
                    inrow[c] = 1.0
            if inrow.any():
                A_ub.append(inrow)
                b_ub.append(self.K - gen.get(i, 0.0))
            erow = np.zeros(n)
            for (g, h), c in col.items():
                if g == i:
                    erow[c] += radio.tx_energy_per_bit(self.topo.d(g, h))
                if h == i:
                    erow[c] += radio.rx_energy
            if erow.any():
                A_ub.append(erow)
                b_ub.append(self.energy[i] - cpu.get(i, 0.0))
        for l in self.links:
            row = np.zeros(n)
            for other, c in col.items():
                if self._conflict(l, other):
                    row[c] = 1.0 / min(self.cap[other[0]], self.cap[other[1]])
            if row.any():
                A_ub.append(row)
                b_ub.append(1.0)
        res = linprog(np.zeros(n), A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                      A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                      bounds=[(0, self.K)] * n, method="highs")
        if res.status != 0:
            return None
        return {l: float(v) for l, v in zip(links, res.x) if v > 1e-9}

    def _accept(self, objective, assign, loaded, flows, parent) -> None:
        if objective <= self.best.objective + _EPS:
            return
        values = {}
        deployed = {j for (j, _) in assign}
        for a in self.apps:
            if a.id in deployed:
                values[var_name("z", (a.id,))] = 1.0
                for tp in a.test_points:
                    values[var_name("h", (a.id, tp.id))] = 1.0
        for (j, k), i in assign.items():
            values[var_name("y", (i, j, k))] = 1.0
        for i in loaded:
            values[var_name("x", (i,))] = 1.0
        for l, v in flows.items():
            values[var_name("f", l)] = v
        if parent is not None:
            for i, h in parent.items():
                values[var_name("g", (i, h))] = 1.0
        self.best = _Best(objective, values)
