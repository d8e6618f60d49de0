"""Physical world of a shared sensor network.

Nodes, applications, test points, the radio/interference model, the
processing-energy model of the visual applications, min-hop routing trees
and a seeded instance generator.  Everything here is immutable once built;
derived structures (distances, coverage sets, viable links, interference
sets) are computed lazily and cached on a :class:`Topology`.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario description."""


class KindOfApp(str, Enum):
    TEMPERATURE = "Temperature"
    LIGHT = "Light"
    CTA = "CTA"
    ATC = "ATC"
    CUSTOM = "Custom"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for kind in cls:
                if kind.value.lower() == value.lower() or kind.name.lower() == value.lower():
                    return kind
        return None

    @property
    def is_visual(self) -> bool:
        return self in (KindOfApp.CTA, KindOfApp.ATC)


APP_KINDS = (KindOfApp.TEMPERATURE, KindOfApp.LIGHT, KindOfApp.CTA, KindOfApp.ATC)

DAY_S = 86400.0
KBIT = 1000.0
KBYTE_BITS = 1024 * 8
MBYTE_BITS = 1024 * KBYTE_BITS


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def distance(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class NodeProfile:
    name: str
    bandwidth_bps: float
    memory_bits: float
    mips: float
    energy_j: float

    def __post_init__(self):
        for attr in ("bandwidth_bps", "memory_bits", "mips", "energy_j"):
            if not getattr(self, attr) > 0:
                raise ScenarioError(f"profile {self.name!r}: {attr} must be > 0")


TELOSB = NodeProfile("TelosB", 250 * KBIT, 7 * KBYTE_BITS, 8.0, 32400.0)
BEAGLEBONE = NodeProfile("BeagleBone", 250 * KBIT, 256 * MBYTE_BITS, 720.0, 32400.0)


@dataclass(frozen=True)
class SensorNode:
    id: int
    position: Point2D
    profile: NodeProfile
    is_sink: bool = False
    sensing_range: float = 30.0
    activation_cost: float = 0.01

    def __post_init__(self):
        if not self.sensing_range > 0:
            raise ScenarioError(f"node {self.id}: sensing range must be > 0")
        if self.activation_cost < 0:
            raise ScenarioError(f"node {self.id}: activation cost must be >= 0")


@dataclass(frozen=True)
class TestPoint:
    __test__ = False  # not a pytest class

    id: int
    position: Point2D


@dataclass(frozen=True)
class ApplicationSpec:
    """Requirement vector plus placement constraints of one application.

    ``rate_bps``, ``memory_bits``, ``mips`` and ``cpu_watts`` are charged per
    deployed test point (one ``y`` variable set to one).
    """

    id: int
    kind: KindOfApp
    rate_bps: float
    memory_bits: float
    mips: float
    cpu_watts: float
    preference: float
    test_points: tuple[TestPoint, ...]
    allowed_profiles: frozenset[str] | None = None  # None: any profile
    per_node_cap: int = 1

    def __post_init__(self):
        if not self.rate_bps > 0:
            raise ScenarioError(f"app {self.id}: rate must be > 0")
        if self.memory_bits < 0 or self.mips < 0 or self.cpu_watts < 0:
            raise ScenarioError(f"app {self.id}: negative resource demand")
        if not self.preference > 0:
            raise ScenarioError(f"app {self.id}: preference must be > 0")
        if not self.test_points:
            raise ScenarioError(f"app {self.id}: needs at least one test point")
        if self.per_node_cap < 1:
            raise ScenarioError(f"app {self.id}: per-node cap must be >= 1")
        ids = [tp.id for tp in self.test_points]
        if len(set(ids)) != len(ids):
            raise ScenarioError(f"app {self.id}: duplicate test point ids")

    def can_run_on(self, profile: NodeProfile) -> bool:
        return self.allowed_profiles is None or profile.name in self.allowed_profiles

    def test_point(self, k: int) -> TestPoint:
        for tp in self.test_points:
            if tp.id == k:
                return tp
        raise KeyError(f"app {self.id} has no test point {k}")


@dataclass(frozen=True)
class RadioParams:
    """Protocol interference model with power control.

    Powers and thresholds in milliwatts, energies in joules per bit
    (``tx_energy_dist`` in J/bit/m^gamma).
    """

    p_max_mw: float = 1.0
    rx_threshold_mw: float = dbm_to_mw(-92.0)
    interference_threshold_mw: float = dbm_to_mw(-104.0)
    path_loss_exponent: float = 4.0
    antenna_gain: float = 8.1e-3
    tx_energy_base: float = 50e-9
    tx_energy_dist: float = 0.0013e-12
    rx_energy: float = 50e-9

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ScenarioError(f"radio parameter {name} must be > 0")
        if not self.interference_threshold_mw < self.rx_threshold_mw:
            raise ScenarioError("interference threshold must be below the decode threshold")

    def with_p_max_dbm(self, dbm: float) -> "RadioParams":
        return replace(self, p_max_mw=dbm_to_mw(dbm))

    def tx_energy_per_bit(self, distance: float) -> float:
        return self.tx_energy_base + self.tx_energy_dist * distance ** self.path_loss_exponent


def _range_for(p: float, threshold: float, radio: RadioParams) -> float:
    if not p > 0:
        raise ValueError(f"transmit power must be positive, got {p}")
    return (p * radio.antenna_gain / threshold) ** (1.0 / radio.path_loss_exponent)


def tx_range(p: float, radio: RadioParams) -> float:
    """Largest distance at which ``p * g0 * d**-gamma`` still reaches the decode threshold."""
    return _range_for(p, radio.rx_threshold_mw, radio)


def interference_range(p: float, radio: RadioParams) -> float:
    return _range_for(p, radio.interference_threshold_mw, radio)


# ---------------------------------------------------------------------------
# processing energy of the visual applications

CPU_POWER_W = 2.1
# CPU time per image for compress-then-analyze, keyed by bits per query.
CTA_CPU_TIME_S = {20_000: 24.5e-3}
ATC_OFFSET_S = 1.6e-7 * 640 * 480  # detector initialisation, 1.6e-4 ms/pixel
ATC_DETECT_S = 0.31e-3
ATC_DESCRIBE_S = 0.16e-3


def cpu_time_cta(rate_bits_per_query: float) -> float:
    if rate_bits_per_query <= 0:
        raise ValueError("rate must be positive")
    try:
        return CTA_CPU_TIME_S[int(round(rate_bits_per_query))]
    except KeyError:
        raise ValueError(
            f"no tabulated CTA processing time for {rate_bits_per_query} bits/query"
        ) from None


def cpu_time_atc(rate_bits_per_query: float, features: float) -> float:
    if rate_bits_per_query <= 0:
        raise ValueError("rate must be positive")
    if features < 0:
        raise ValueError("feature count must be non-negative")
    return ATC_OFFSET_S + features * (ATC_DETECT_S + ATC_DESCRIBE_S)


def cpu_energy_cta(rate_bits_per_query: float) -> float:
    """Joules spent processing one image under compress-then-analyze."""
    return CPU_POWER_W * cpu_time_cta(rate_bits_per_query)


def cpu_energy_atc(rate_bits_per_query: float, features: float) -> float:
    """Joules spent processing one image under analyze-then-compress."""
    return CPU_POWER_W * cpu_time_atc(rate_bits_per_query, features)


def processing_load_mips(cpu_time_s: float, queries_per_s: float = 1.0, node_mips: float = 720.0) -> float:
    # fraction of CPU time used, times the processor's capacity
    return cpu_time_s * queries_per_s * node_mips


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class Scenario:
    area: tuple[float, float]
    nodes: tuple[SensorNode, ...]
    applications: tuple[ApplicationSpec, ...]
    radio: RadioParams = field(default_factory=RadioParams)
    lifetime_s: float = DAY_S
    big_m_bps: float | None = None

    def __post_init__(self):
        if not self.lifetime_s > 0:
            raise ScenarioError("lifetime must be > 0")
        if not any(n.is_sink for n in self.nodes):
            raise ScenarioError("scenario needs at least one sink node")
        node_ids = [n.id for n in self.nodes]
        if len(set(node_ids)) != len(node_ids):
            raise ScenarioError("duplicate node ids")
        app_ids = [a.id for a in self.applications]
        if len(set(app_ids)) != len(app_ids):
            raise ScenarioError("duplicate application ids")
        if self.big_m_bps is None:
            object.__setattr__(self, "big_m_bps", 10.0 * max(n.profile.bandwidth_bps for n in self.nodes))
        if not self.big_m_bps > max(n.profile.bandwidth_bps for n in self.nodes):
            raise ScenarioError("big-M must exceed every node's bandwidth")
        w, h = self.area
        points = [n.position for n in self.nodes]
        points += [tp.position for a in self.applications for tp in a.test_points]
        for p in points:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ScenarioError(f"non-finite position {p}")
            if not (0.0 <= p.x <= w and 0.0 <= p.y <= h):
                raise ScenarioError(f"position {p} outside the {w}x{h} area")

    def node(self, i: int) -> SensorNode:
        return self.topology.node_by_id[i]

    def app(self, j: int) -> ApplicationSpec:
        try:
            return self.topology.app_by_id[j]
        except KeyError:
            raise KeyError(f"unknown application {j}") from None

    @property
    def sinks(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_sink]

    @cached_property
    def topology(self) -> "Topology":
        return Topology(self)

    def with_lifetime(self, lifetime_s: float) -> "Scenario":
        return replace(self, lifetime_s=lifetime_s)

    def with_radio(self, radio: RadioParams) -> "Scenario":
        return replace(self, radio=radio)

    def with_sinks(self, sink_ids: Iterable[int]) -> "Scenario":
        sink_ids = set(sink_ids)
        nodes = tuple(replace(n, is_sink=n.id in sink_ids) for n in self.nodes)
        return replace(self, nodes=nodes)


class Topology:
    """Geometry-derived structures of a scenario, all at maximum transmit power."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.node_by_id = {n.id: n for n in scenario.nodes}
        self.app_by_id = {a.id: a for a in scenario.applications}
        self.ids = [n.id for n in scenario.nodes]
        self._pos = {n.id: k for k, n in enumerate(scenario.nodes)}
        xy = np.array([[n.position.x, n.position.y] for n in scenario.nodes], dtype=float)
        self.dist = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2))
        radio = scenario.radio
        self.r_tx = tx_range(radio.p_max_mw, radio)
        self.r_if = interference_range(radio.p_max_mw, radio)
        self._interference: dict[tuple[int, int], frozenset[tuple[int, int]]] = {}

    def d(self, i: int, h: int) -> float:
        return float(self.dist[self._pos[i], self._pos[h]])

    @cached_property
    def links(self) -> list[tuple[int, int]]:
        """Every viable directed link, ordered by (transmitter, receiver)."""
        out = []
        for i in sorted(self.ids):
            for h in sorted(self.ids):
                if i != h and self.d(i, h) <= self.r_tx:
                    out.append((i, h))
        return out

    @cached_property
    def link_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.links)

    @cached_property
    def neighbors(self) -> dict[int, list[int]]:
        nb: dict[int, list[int]] = {i: [] for i in self.ids}
        for i, h in self.links:
            nb[i].append(h)
        return nb

    @cached_property
    def _link_arrays(self):
        src = np.array([self._pos[i] for i, _ in self.links], dtype=int)
        dst = np.array([self._pos[h] for _, h in self.links], dtype=int)
        return src, dst

    def interfering(self, i: int, h: int) -> frozenset[tuple[int, int]]:
        key = (i, h)
        hit = self._interference.get(key)
        if hit is not None:
            return hit
        if key not in self.link_set:
            raise ValueError(f"link {key} is not viable")
        src, dst = self._link_arrays
        pi, ph = self._pos[i], self._pos[h]
        mask = (src == pi) | (dst == pi) | (src == ph) | (dst == ph)
        mask |= self.dist[pi, dst] < self.r_if
        mask |= self.dist[src, ph] < self.r_if
        links = self.links
        result = frozenset(links[k] for k in np.flatnonzero(mask) if links[k] != key)
        self._interference[key] = result
        return result

    @cached_property
    def coverage(self) -> dict[tuple[int, int], tuple[int, ...]]:
        """(app id, test point id) -> ids of nodes that sense it and may host the app."""
        cov = {}
        for app in self.scenario.applications:
            for tp in app.test_points:
                cov[app.id, tp.id] = tuple(
                    n.id
                    for n in self.scenario.nodes
                    if app.can_run_on(n.profile) and n.position.distance(tp.position) <= n.sensing_range
                )
        return cov


def coverage_set(scenario: Scenario, j: int, k: int) -> frozenset[int]:
    app = scenario.app(j)
    app.test_point(k)
    return frozenset(scenario.topology.coverage[j, k])


def _check_pair(scenario: Scenario, i: int, h: int) -> None:
    if i == h:
        raise ValueError("a link needs two distinct nodes")
    scenario.node(i), scenario.node(h)


def link_viable(scenario: Scenario, i: int, h: int) -> bool:
    _check_pair(scenario, i, h)
    topo = scenario.topology
    return topo.d(i, h) <= topo.r_tx


def link_capacity(scenario: Scenario, i: int, h: int) -> float:
    if not link_viable(scenario, i, h):
        raise ValueError(f"link ({i}, {h}) is not viable")
    return min(scenario.node(i).profile.bandwidth_bps, scenario.node(h).profile.bandwidth_bps)


def interfering_links(scenario: Scenario, i: int, h: int) -> frozenset[tuple[int, int]]:
    """Directed links that cannot be active together with ``(i, h)``.

    Union of: links sharing an endpoint with ``(i, h)``, links whose receiver
    lies inside the interference range of ``i`` and links whose transmitter
    has ``h`` inside its interference range (maximum power throughout).
    """
    _check_pair(scenario, i, h)
    return scenario.topology.interfering(i, h)


# ---------------------------------------------------------------------------
# static routing


@dataclass(frozen=True)
class DodagRouting:
    parent: Mapping[int, int]
    hop_count: Mapping[int, int]
    unreachable: frozenset[int] = frozenset()

    def path_to_sink(self, i: int) -> list[int]:
        path = [i]
        while path[-1] in self.parent:
            path.append(self.parent[path[-1]])
        return path


def build_dodag(scenario: Scenario) -> DodagRouting:
    """Min-hop parent tree towards the sink set; ties go to the lowest id."""
    topo = scenario.topology
    hops = {s: 0 for s in scenario.sinks}
    queue = deque(sorted(hops))
    while queue:
        u = queue.popleft()
        # links are symmetric, so neighbours of u can reach u
        for v in topo.neighbors[u]:
            if v not in hops:
                hops[v] = hops[u] + 1
                queue.append(v)
    parent = {}
    for v, hv in hops.items():
        if hv == 0:
            continue
        parent[v] = min(u for u in topo.neighbors[v] if hops.get(u) == hv - 1)
    unreachable = frozenset(i for i in topo.ids if i not in hops)
    return DodagRouting(parent=dict(sorted(parent.items())), hop_count=dict(sorted(hops.items())), unreachable=unreachable)


# ---------------------------------------------------------------------------
# random instances


def default_application(kind: KindOfApp, app_id: int, test_points: tuple[TestPoint, ...],
                        preference: float | None = None) -> ApplicationSpec:
    """Application with the reference requirement vector of its kind."""
    if kind is KindOfApp.TEMPERATURE:
        rate, mem, mips, watts, q = 0.5 * KBIT, 4462 * 8, 0.0, 0.0, 1.0
    elif kind is KindOfApp.LIGHT:
        rate, mem, mips, watts, q = 1.0 * KBIT, 1006 * 8, 0.0, 0.0, 1.0
    elif kind is KindOfApp.CTA:
        rate, mem, watts, q = 20 * KBIT, MBYTE_BITS, 0.05, 12.0
        mips = processing_load_mips(cpu_time_cta(20_000))
    elif kind is KindOfApp.ATC:
        rate, mem, watts, q = 12 * KBIT, MBYTE_BITS, 0.2, 8.0
        mips = processing_load_mips(cpu_time_atc(12_000, 100))
    else:
        raise ValueError(f"no defaults for {kind}")
    allowed = frozenset({BEAGLEBONE.name}) if kind.is_visual else None
    return ApplicationSpec(
        id=app_id, kind=kind, rate_bps=rate, memory_bits=mem, mips=round(mips, 2),
        cpu_watts=watts, preference=q if preference is None else preference,
        test_points=test_points, allowed_profiles=allowed, per_node_cap=1,
    )


DEFAULT_TEST_POINTS = {KindOfApp.TEMPERATURE: 5, KindOfApp.LIGHT: 5, KindOfApp.CTA: 3, KindOfApp.ATC: 3}


def _per_kind(value: int | Mapping, default: Mapping | None = None) -> dict[KindOfApp, int]:
    if isinstance(value, Mapping):
        base = dict(default or {k: 0 for k in APP_KINDS})
        base.update({KindOfApp(k): int(v) for k, v in value.items()})
        return base
    return {k: int(value) for k in APP_KINDS}


def random_scenario(
    seed: int,
    n_scalar: int = 36,
    n_multimedia: int = 36,
    n_sinks_scalar: int = 1,
    n_sinks_mm: int = 1,
    apps_per_kind: int | Mapping = 1,
    test_points_per_app: int | Mapping | None = None,
    area: tuple[float, float] = (200.0, 200.0),
    radio: RadioParams | None = None,
    lifetime_s: float = DAY_S,
    preferences: Mapping | None = None,
    sensing_range: float = 30.0,
    activation_cost: float = 0.01,
) -> Scenario:
    """Uniformly random nodes and test points; deterministic in ``seed``.

    TelosB nodes get ids ``0..n_scalar-1``, BeagleBone nodes follow.  Sinks
    are drawn without replacement within each node type.
    """
    if min(n_scalar, n_multimedia, n_sinks_scalar, n_sinks_mm) < 0:
        raise ScenarioError("counts must be non-negative")
    if n_sinks_scalar > n_scalar or n_sinks_mm > n_multimedia:
        raise ScenarioError("more sinks than nodes of that type")
    if n_sinks_scalar + n_sinks_mm == 0:
        raise ScenarioError("at least one sink is required")
    rng = np.random.default_rng(seed)
    w, h = area

    def place() -> Point2D:
        x, y = rng.uniform(0.0, 1.0, size=2)
        return Point2D(float(x * w), float(y * h))

    profiles = [TELOSB] * n_scalar + [BEAGLEBONE] * n_multimedia
    positions = [place() for _ in profiles]
    sinks = set()
    if n_sinks_scalar:
        sinks |= {int(s) for s in rng.choice(n_scalar, size=n_sinks_scalar, replace=False)}
    if n_sinks_mm:
        sinks |= {n_scalar + int(s) for s in rng.choice(n_multimedia, size=n_sinks_mm, replace=False)}
    nodes = tuple(
        SensorNode(id=i, position=positions[i], profile=profiles[i], is_sink=i in sinks,
                   sensing_range=sensing_range, activation_cost=activation_cost)
        for i in range(len(profiles))
    )

    counts = _per_kind(apps_per_kind)
    tps = _per_kind(test_points_per_app, DEFAULT_TEST_POINTS) if test_points_per_app is not None \
        else dict(DEFAULT_TEST_POINTS)
    prefs = {KindOfApp(k): float(v) for k, v in (preferences or {}).items()}
    apps = []
    for kind in APP_KINDS:
        for _ in range(counts[kind]):
            points = tuple(TestPoint(k, place()) for k in range(tps[kind]))
            apps.append(default_application(kind, len(apps), points, prefs.get(kind)))
    return Scenario(area=(float(w), float(h)), nodes=nodes, applications=tuple(apps),
                    radio=radio or RadioParams(), lifetime_s=lifetime_s)


def one_node_scenario() -> Scenario:
    """A lone TelosB sink covering the single test point of one temperature application."""
    node = SensorNode(0, Point2D(50.0, 50.0), TELOSB, is_sink=True)
    app = default_application(KindOfApp.TEMPERATURE, 0, (TestPoint(0, Point2D(60.0, 50.0)),), preference=1.0)
    return Scenario(area=(100.0, 100.0), nodes=(node,), applications=(app,))


def merge_scenarios(a: Scenario, b: Scenario) -> Scenario:
    """One network out of two: union of nodes, sinks and applications.

    Ids of ``b`` are shifted past those of ``a``; radio, lifetime and area
    come from ``a`` (the two must agree on area).
    """
    if tuple(a.area) != tuple(b.area):
        raise ScenarioError("merged scenarios must share the same area")
    node_shift = max(n.id for n in a.nodes) + 1
    app_shift = max((app.id for app in a.applications), default=-1) + 1
    nodes = a.nodes + tuple(replace(n, id=n.id + node_shift) for n in b.nodes)
    apps = a.applications + tuple(replace(app, id=app.id + app_shift) for app in b.applications)
    return replace(a, nodes=nodes, applications=apps, big_m_bps=max(a.big_m_bps, b.big_m_bps))


# ---------------------------------------------------------------------------
# JSON


_TOP_KEYS = {"area", "radio", "lifetime_s", "big_m_bps", "nodes", "profiles", "applications"}
_RADIO_KEYS = {
    "p_max_mw", "rx_threshold_mw", "interference_threshold_mw", "path_loss_exponent",
    "antenna_gain", "tx_energy_base", "tx_energy_dist", "rx_energy",
}
_NODE_KEYS = {"id", "x", "y", "profile", "is_sink", "sensing_range_m", "activation_cost"}
_PROFILE_KEYS = {"bandwidth_bps", "memory_bits", "mips", "energy_j"}
_APP_KEYS = {
    "id", "kind", "rate_bps", "memory_bits", "mips", "cpu_watts", "preference",
    "allowed_profiles", "per_node_cap", "test_points",
}
_TP_KEYS = {"id", "x", "y"}


def scenario_to_dict(scenario: Scenario) -> dict:
    profiles = {}
    for n in scenario.nodes:
        p = n.profile
        profiles[p.name] = {"bandwidth_bps": float(p.bandwidth_bps), "memory_bits": float(p.memory_bits),
                            "mips": float(p.mips), "energy_j": float(p.energy_j)}
    r = scenario.radio
    return {
        "area": list(scenario.area),
        "radio": {k: float(getattr(r, k)) for k in sorted(_RADIO_KEYS)},
        "lifetime_s": float(scenario.lifetime_s),
        "big_m_bps": float(scenario.big_m_bps),
        "profiles": dict(sorted(profiles.items())),
        "nodes": [
            {"id": n.id, "x": n.position.x, "y": n.position.y, "profile": n.profile.name,
             "is_sink": n.is_sink, "sensing_range_m": n.sensing_range,
             "activation_cost": n.activation_cost}
            for n in scenario.nodes
        ],
        "applications": [
            {"id": a.id, "kind": a.kind.value, "rate_bps": float(a.rate_bps), "memory_bits": float(a.memory_bits),
             "mips": float(a.mips), "cpu_watts": float(a.cpu_watts), "preference": float(a.preference),
             "allowed_profiles": None if a.allowed_profiles is None else sorted(a.allowed_profiles),
             "per_node_cap": a.per_node_cap,
             "test_points": [{"id": tp.id, "x": tp.position.x, "y": tp.position.y} for tp in a.test_points]}
            for a in scenario.applications
        ],
    }


def _expect_keys(obj, allowed: set[str], where: str, required: set[str] | None = None) -> None:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = (allowed if required is None else required) - set(obj)
    if missing:
        raise ScenarioError(f"{where}: missing key(s) {sorted(missing)}")


def scenario_from_dict(data: dict) -> Scenario:
    _expect_keys(data, _TOP_KEYS, "scenario", required=_TOP_KEYS - {"big_m_bps"})
    _expect_keys(data["radio"], _RADIO_KEYS, "radio")
    profiles = {}
    for name, p in data["profiles"].items():
        _expect_keys(p, _PROFILE_KEYS, f"profiles.{name}")
        profiles[name] = NodeProfile(name, float(p["bandwidth_bps"]), float(p["memory_bits"]),
                                     float(p["mips"]), float(p["energy_j"]))
    nodes = []
    for idx, n in enumerate(data["nodes"]):
        where = f"nodes[{idx}]"
        _expect_keys(n, _NODE_KEYS, where, required={"id", "x", "y", "profile"})
        if n["profile"] not in profiles:
            raise ScenarioError(f"{where}.profile: unknown profile {n['profile']!r}")
        nodes.append(SensorNode(
            id=int(n["id"]), position=Point2D(float(n["x"]), float(n["y"])),
            profile=profiles[n["profile"]], is_sink=bool(n.get("is_sink", False)),
            sensing_range=float(n.get("sensing_range_m", 30.0)),
            activation_cost=float(n.get("activation_cost", 0.01)),
        ))
    apps = []
    for idx, a in enumerate(data["applications"]):
        where = f"applications[{idx}]"
        _expect_keys(a, _APP_KEYS, where, required=_APP_KEYS - {"allowed_profiles", "per_node_cap"})
        tps = []
        for t_idx, t in enumerate(a["test_points"]):
            _expect_keys(t, _TP_KEYS, f"{where}.test_points[{t_idx}]")
            tps.append(TestPoint(int(t["id"]), Point2D(float(t["x"]), float(t["y"]))))
        allowed = a.get("allowed_profiles")
        try:
            kind = KindOfApp(a["kind"])
        except ValueError:
            raise ScenarioError(f"{where}.kind: unknown kind {a['kind']!r}") from None
        apps.append(ApplicationSpec(
            id=int(a["id"]), kind=kind, rate_bps=float(a["rate_bps"]),
            memory_bits=float(a["memory_bits"]), mips=float(a["mips"]),
            cpu_watts=float(a["cpu_watts"]), preference=float(a["preference"]),
            test_points=tuple(tps), allowed_profiles=None if allowed is None else frozenset(allowed),
            per_node_cap=int(a.get("per_node_cap", 1)),
        ))
    area = data["area"]
    if not (isinstance(area, list) and len(area) == 2):
        raise ScenarioError("area: expected [width, height]")
    big_m = data.get("big_m_bps")
    return Scenario(
        area=(float(area[0]), float(area[1])), nodes=tuple(nodes), applications=tuple(apps),
        radio=RadioParams(**{k: float(v) for k, v in data["radio"].items()}),
        lifetime_s=float(data["lifetime_s"]), big_m_bps=None if big_m is None else float(big_m),
    )


def dump_scenario(scenario: Scenario, path: str | Path | None = None) -> str:
    text = json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(data)
