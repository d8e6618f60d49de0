from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from vsnalloc.scenario import (BEAGLEBONE, DAY_S, TELOSB, ApplicationSpec, KindOfApp, NodeProfile, Point2D,
                               RadioParams, Scenario, SensorNode, TestPoint, default_application,
                               one_node_scenario, random_scenario)


def make_nodes(coords, sinks=(0,), profile=TELOSB, **kw) -> tuple[SensorNode, ...]:
    return tuple(SensorNode(i, Point2D(float(x), float(y)), profile, is_sink=i in sinks, **kw)
                 for i, (x, y) in enumerate(coords))


def temperature_app(app_id: int, points, preference: float = 1.0) -> ApplicationSpec:
    tps = tuple(TestPoint(k, Point2D(float(x), float(y))) for k, (x, y) in enumerate(points))
    return default_application(KindOfApp.TEMPERATURE, app_id, tps, preference=preference)


def scenario_of(nodes, apps=(), area=(500.0, 500.0), radio=None, lifetime_s=DAY_S) -> Scenario:
    return Scenario(area=area, nodes=tuple(nodes), applications=tuple(apps), radio=radio or RadioParams(),
                    lifetime_s=lifetime_s)


def knapsack_instance(rng: np.random.Generator, n_apps: int, n_nodes: int):
    """Multi-knapsack over memory: every node is a sink covering one shared test point.

    Returns the scenario plus (values, weights, capacities) in integer units.
    """
    unit = 1024.0
    caps = [int(c) for c in rng.integers(4, 16, size=n_nodes)]
    weights = [int(w) for w in rng.integers(1, 10, size=n_apps)]
    values = [int(v) for v in rng.integers(1, 20, size=n_apps)]
    profiles = [NodeProfile(f"K{i}", 250e3, c * unit, 1e6, 1e9) for i, c in enumerate(caps)]
    nodes = tuple(SensorNode(i, Point2D(50.0 + i, 50.0), profiles[i], is_sink=True, activation_cost=0.0)
                  for i in range(n_nodes))
    shared = (TestPoint(0, Point2D(50.0, 55.0)),)
    apps = tuple(ApplicationSpec(j, KindOfApp.CUSTOM, 100.0, weights[j] * unit, 0.0, 0.0, float(values[j]), shared)
                 for j in range(n_apps))
    sc = Scenario(area=(100.0, 100.0), nodes=nodes, applications=apps, lifetime_s=1e6 * DAY_S)
    return sc, values, weights, caps


def knapsack_dp(values, weights, caps) -> int:
    """Each item goes into at most one knapsack; DP over remaining capacity vectors."""
    best = {tuple(caps): 0}
    for v, w in zip(values, weights):
        nxt = dict(best)
        for rem, val in best.items():
            for b in range(len(rem)):
                if rem[b] >= w:
                    key = rem[:b] + (rem[b] - w,) + rem[b + 1:]
                    if nxt.get(key, -1) < val + v:
                        nxt[key] = val + v
        best = nxt
    return max(best.values())


def scipy_objective(model) -> float | None:
    """Reference optimum from HiGHS on the same dense form."""
    d = model.dense
    lo = np.where(d.senses >= 0, d.rhs, -np.inf)
    hi = np.where(d.senses <= 0, d.rhs, np.inf)
    cons = [LinearConstraint(d.A, lo, hi)] if len(d.rhs) else []
    res = milp(-d.cost, constraints=cons, bounds=Bounds(model.lower, model.upper),
               integrality=model.integral.astype(int))
    return -res.fun if res.status == 0 else None


def tiny_random(seed: int, **kw) -> Scenario:
    params = dict(n_scalar=4, n_multimedia=4, area=(70.0, 70.0),
                  apps_per_kind={"temperature": 1, "light": 1, "cta": 1, "atc": 0},
                  test_points_per_app={"temperature": 2, "light": 2, "cta": 1, "atc": 1})
    params.update(kw)
    return random_scenario(seed, **params)
