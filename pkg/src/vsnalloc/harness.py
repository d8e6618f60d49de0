"""Experiment sweeps: generate scenarios, solve, validate, tabulate."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .heuristic import heuristic_state
from .model import Routing, Solution, Status, build_model, metrics, validate_solution
from .scenario import DAY_S, RadioParams, Scenario, random_scenario
from .solver.bnb import BnbConfig, solve_milp

TIME_LIMIT_ENV = "VSNALLOC_TIME_LIMIT"

SWEEP_PARAMS = ("offered_apps_per_kind", "node_mix", "n_sinks", "lifetime_days", "p_max_dbm", "routing_mode")

# generation keys accepted in ExperimentSpec.base; everything except the last four goes to random_scenario
BASE_KEYS = {
    "n_scalar", "n_multimedia", "n_sinks_scalar", "n_sinks_mm", "apps_per_kind", "test_points_per_app",
    "area", "preferences", "sensing_range", "activation_cost",
    "p_max_dbm", "lifetime_days", "routing_mode", "n_sinks",
}

# a dozen nodes on a 100 m square: solve_milp finishes in seconds
DESK_BASE = {"n_scalar": 6, "n_multimedia": 6, "area": [100.0, 100.0], "apps_per_kind": 1}


class Method(str, Enum):
    EXACT = "exact"
    HEURISTIC = "heuristic"
    BOTH = "both"


def default_time_limit() -> float | None:
    raw = os.environ.get(TIME_LIMIT_ENV)
    if not raw:
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{TIME_LIMIT_ENV}={raw!r} is not a number") from None
    return value if value > 0 else None


@dataclass
class ExperimentSpec:
    name: str
    sweep: str
    sweep_values: list
    base: dict = field(default_factory=lambda: dict(DESK_BASE))
    method: Method = Method.BOTH
    replications: int = 1
    base_seed: int = 0
    time_limit: float | None = None
    node_limit: int = 200_000

    def __post_init__(self):
        self.method = Method(self.method)
        if self.sweep not in SWEEP_PARAMS:
            raise ValueError(f"sweep: unknown parameter {self.sweep!r} (expected one of {', '.join(SWEEP_PARAMS)})")
        if not self.sweep_values:
            raise ValueError("sweep_values: must be nonempty")
        if self.replications < 1:
            raise ValueError("replications: must be >= 1")
        self.base = {**DESK_BASE, **self.base}  # unset keys fall back to desk scale
        unknown = set(self.base) - BASE_KEYS
        if unknown:
            raise ValueError(f"base: unknown key(s) {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ValueError("experiment spec: expected a JSON object")
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"experiment spec: unknown key(s) {sorted(unknown)}")
        missing = {"name", "sweep", "sweep_values"} - set(data)
        if missing:
            raise ValueError(f"experiment spec: missing key(s) {sorted(missing)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentSpec":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        return d


@dataclass
class MetricsRow:
    experiment: str
    sweep: str
    sweep_value: Any
    seed: int
    method: str
    routing: str
    status: str
    objective: float | None
    apps_temperature: int
    apps_light: int
    apps_cta: int
    apps_atc: int
    nodes_telosb: int
    nodes_beaglebone: int
    lp_iterations: int
    lp_solves: int
    bnb_nodes: int
    bound: float | None
    gap: float | None
    violations: int
    wall_time_s: float

    @property
    def key(self) -> tuple:
        return (json.dumps(self.sweep_value), self.seed)


CSV_COLUMNS = [f.name for f in fields(MetricsRow)]


# ---------------------------------------------------------------------------
# scenario generation


def _sweep_point(base: dict, sweep: str, value) -> dict:
    params = dict(base)
    if sweep == "offered_apps_per_kind":
        params["apps_per_kind"] = value
    elif sweep == "node_mix":
        params["n_scalar"], params["n_multimedia"] = (int(v) for v in value)
    else:
        params[sweep] = value
    return params


def make_scenario(params: dict, seed: int) -> tuple[Scenario, Routing]:
    """Scenario and routing mode for one sweep point and replication seed."""
    gen = {k: v for k, v in params.items() if k not in ("p_max_dbm", "lifetime_days", "routing_mode", "n_sinks")}
    if "area" in gen:
        gen["area"] = tuple(float(a) for a in gen["area"])
    radio = RadioParams()
    if "p_max_dbm" in params:
        radio = radio.with_p_max_dbm(float(params["p_max_dbm"]))
    lifetime = float(params.get("lifetime_days", 1.0)) * DAY_S
    scenario = random_scenario(seed, radio=radio, lifetime_s=lifetime, **gen)
    if "n_sinks" in params:
        scenario = scenario.with_sinks(nested_sinks(scenario, int(params["n_sinks"]), seed))
    return scenario, Routing(params.get("routing_mode", Routing.MULTIPATH.value))


def nested_sinks(scenario: Scenario, count: int, seed: int) -> list[int]:
    """First ``count`` nodes of a seed-fixed order, so larger counts give sink supersets."""
    ids = sorted(n.id for n in scenario.nodes)
    if not 1 <= count <= len(ids):
        raise ValueError(f"n_sinks must be between 1 and {len(ids)}")
    order = np.random.default_rng([seed, 7]).permutation(ids)
    return sorted(int(i) for i in order[:count])


# ---------------------------------------------------------------------------
# running


def _row(spec_name, sweep, value, seed, method, routing, scenario, solution: Solution, stats: dict,
         elapsed: float) -> MetricsRow:
    found = solution.status in (Status.OPTIMAL, Status.FEASIBLE)
    m = metrics(scenario, solution) if found else None
    violations = len(validate_solution(scenario, routing, solution)) if found else 0
    apps = m.active_apps if m else {}
    nodes = m.active_nodes if m else {}
    return MetricsRow(
        experiment=spec_name, sweep=sweep, sweep_value=value, seed=seed, method=method,
        routing=routing.value, status=solution.status.value,
        objective=round(solution.objective, 9) if found else None,
        apps_temperature=apps.get("Temperature", 0), apps_light=apps.get("Light", 0),
        apps_cta=apps.get("CTA", 0), apps_atc=apps.get("ATC", 0),
        nodes_telosb=nodes.get("TelosB", 0), nodes_beaglebone=nodes.get("BeagleBone", 0),
        lp_iterations=int(stats.get("lp_iterations", 0)), lp_solves=int(stats.get("lp_solves", 0)),
        bnb_nodes=int(stats.get("bnb_nodes", 0)),
        bound=None if stats.get("bound") is None else round(stats["bound"], 9),
        gap=None if stats.get("gap") is None else round(stats["gap"], 9),
        violations=violations, wall_time_s=elapsed,
    )


def run_point(spec: ExperimentSpec, value, replication: int) -> list[MetricsRow]:
    seed = spec.base_seed + replication
    params = _sweep_point(spec.base, spec.sweep, value)
    scenario, routing = make_scenario(params, seed)
    rows = []
    time_limit = spec.time_limit if spec.time_limit is not None else default_time_limit()
    if spec.method in (Method.EXACT, Method.BOTH):
        start = time.perf_counter()
        solution, stats = solve_milp(build_model(scenario, routing, tighten=True),
                                     BnbConfig(time_limit=time_limit, node_limit=spec.node_limit))
        rows.append(_row(spec.name, spec.sweep, value, seed, Method.EXACT.value, routing, scenario, solution,
                         stats.to_dict(), time.perf_counter() - start))
    if spec.method in (Method.HEURISTIC, Method.BOTH):
        start = time.perf_counter()
        state = heuristic_state(scenario, seed)
        rows.append(_row(spec.name, spec.sweep, value, seed, Method.HEURISTIC.value, Routing.STATIC, scenario,
                         state.solution, {"lp_solves": state.lp_solves}, time.perf_counter() - start))
    return rows


def _run_point_args(args):
    return run_point(*args)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[MetricsRow]:
    """All sweep values x replications, in (value, replication, method) order whatever ``jobs`` is."""
    tasks = [(spec, v, r) for v in spec.sweep_values for r in range(spec.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_run_point_args, tasks))
    else:
        chunks = [run_point(*t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def full_scale_attempt(seed: int = 0, time_limit: float = 60.0, routing: Routing | str = Routing.MULTIPATH,
                       lp_backend: str = "highs", **overrides) -> MetricsRow:
    """One 72-node instance solved under a time limit; reports incumbent and proven bound."""
    routing = Routing(routing)
    scenario = random_scenario(seed, **overrides)
    start = time.perf_counter()
    solution, stats = solve_milp(build_model(scenario, routing, tighten=True),
                                 BnbConfig(time_limit=time_limit, lp_backend=lp_backend))
    return _row("full_scale", "none", None, seed, Method.EXACT.value, routing, scenario, solution,
                stats.to_dict(), time.perf_counter() - start)


# ---------------------------------------------------------------------------
# comparison


@dataclass
class PointGap:
    sweep_value: Any
    seed: int
    exact: float
    heuristic: float
    gap: float
    time_ratio: float


@dataclass
class GapSummary:
    points: list[PointGap]
    missing: list[tuple]
    mean_gap: float
    max_gap: float
    min_gap: float
    mean_time_ratio: float
    heuristic_faster: float  # fraction of points


def relative_gap(exact: float, heuristic: float) -> float:
    if abs(exact) < 1e-12:
        return 0.0 if abs(heuristic) < 1e-12 else math.copysign(math.inf, exact - heuristic)
    return (exact - heuristic) / abs(exact)


def compare_methods(rows: Sequence[MetricsRow]) -> GapSummary:
    exact = {r.key: r for r in rows if r.method == Method.EXACT.value}
    heur = {r.key: r for r in rows if r.method == Method.HEURISTIC.value}
    points, missing = [], []
    for key in sorted(set(exact) | set(heur)):
        e, h = exact.get(key), heur.get(key)
        if e is None or h is None or e.objective is None or h.objective is None:
            missing.append(key)
            continue
        ratio = h.wall_time_s / e.wall_time_s if e.wall_time_s > 0 else math.inf
        points.append(PointGap(e.sweep_value, e.seed, e.objective, h.objective,
                               relative_gap(e.objective, h.objective), ratio))
    gaps = [p.gap for p in points]
    ratios = [p.time_ratio for p in points]
    return GapSummary(
        points=points, missing=missing,
        mean_gap=statistics.fmean(gaps) if gaps else math.nan,
        max_gap=max(gaps, default=math.nan), min_gap=min(gaps, default=math.nan),
        mean_time_ratio=statistics.fmean(ratios) if ratios else math.nan,
        heuristic_faster=sum(r < 1 for r in ratios) / len(ratios) if ratios else math.nan,
    )


# ---------------------------------------------------------------------------
# output


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value)
    return str(value)


def rows_to_csv(rows: Sequence[MetricsRow], timing: bool = False) -> str:
    """CSV text; wall times are left blank unless ``timing`` so reruns are byte-identical."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        d = asdict(row)
        if not timing:
            d["wall_time_s"] = None
        writer.writerow([_cell(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: Sequence[MetricsRow], timing: bool = False) -> str:
    out = []
    for row in rows:
        d = asdict(row)
        if not timing:
            d["wall_time_s"] = None
        out.append(d)
    return json.dumps(out, indent=2) + "\n"


def write_results(rows: Sequence[MetricsRow], out_dir: str | os.PathLike, name: str, timing: bool = False) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
        fh.write(rows_to_csv(rows, timing))
    with open(os.path.join(out_dir, f"{name}.json"), "w") as fh:
        fh.write(rows_to_json(rows, timing))
