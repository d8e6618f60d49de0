from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_nodes, scenario_of, temperature_app
from vsnalloc.scenario import (BEAGLEBONE, DAY_S, TELOSB, KindOfApp, NodeProfile, Point2D, RadioParams, Scenario,
                               ScenarioError, SensorNode, build_dodag, coverage_set, cpu_energy_atc, cpu_energy_cta,
                               cpu_time_atc, cpu_time_cta, dbm_to_mw, dump_scenario, interference_range,
                               interfering_links, link_capacity, link_viable, load_scenario, merge_scenarios,
                               processing_load_mips, random_scenario, scenario_from_dict, scenario_to_dict,
                               tx_range)

RADIO = RadioParams()


def scan_range(p: float, threshold: float, radio: RadioParams = RADIO, step: float = 1e-3) -> float:
    """Farthest grid distance whose received power still clears ``threshold``."""
    d = np.arange(step, 400.0, step)
    received = p * radio.antenna_gain * d ** (-radio.path_loss_exponent)
    return float(d[received >= threshold].max())


# ---------------------------------------------------------------------------
# radio


def test_tx_range_zero_dbm():
    assert tx_range(1.0, RADIO) == pytest.approx(59.86, abs=0.01)


def test_tx_range_minus_ten_dbm():
    assert tx_range(0.1, RADIO) == pytest.approx(33.66, abs=0.01)


def test_unit_distance_identity():
    p = RADIO.rx_threshold_mw / RADIO.antenna_gain
    assert tx_range(p, RADIO) == pytest.approx(1.0, rel=1e-12)


def test_interference_range_zero_dbm():
    assert interference_range(1.0, RADIO) == pytest.approx(119.43, abs=0.01)


@pytest.mark.parametrize("p", [1.0, 0.1, 0.5])
def test_ranges_match_received_power_scan(p):
    assert tx_range(p, RADIO) == pytest.approx(scan_range(p, RADIO.rx_threshold_mw), abs=2e-3)
    assert interference_range(p, RADIO) == pytest.approx(scan_range(p, RADIO.interference_threshold_mw), abs=2e-3)


def test_interference_range_minus_ten_dbm_frozen():
    # scanned received power, frozen: 67.16 m
    assert interference_range(0.1, RADIO) == pytest.approx(67.16, abs=0.01)


def test_equal_thresholds_give_equal_ranges():
    radio = RadioParams(rx_threshold_mw=1e-9, interference_threshold_mw=1e-9 * (1 - 1e-15))
    assert interference_range(1.0, radio) == pytest.approx(tx_range(1.0, radio), rel=1e-12)


@pytest.mark.parametrize("p", [0.0, -1.0])
def test_non_positive_power_rejected(p):
    with pytest.raises(ValueError):
        tx_range(p, RADIO)
    with pytest.raises(ValueError):
        interference_range(p, RADIO)


@given(st.floats(1e-4, 10.0), st.floats(1.0001, 10.0))
def test_ranges_increase_with_power(p, factor):
    assert tx_range(p * factor, RADIO) > tx_range(p, RADIO)
    assert interference_range(p, RADIO) > tx_range(p, RADIO)


def test_dbm_conversion():
    assert dbm_to_mw(0.0) == 1.0
    assert dbm_to_mw(-10.0) == pytest.approx(0.1)


# ---------------------------------------------------------------------------
# processing energy


def test_atc_energy():
    assert cpu_energy_atc(12_000, 100) == pytest.approx(2.1 * (0.049152 + 100 * 0.00047), rel=1e-9)
    assert cpu_energy_atc(12_000, 100) == pytest.approx(0.2019, rel=5e-3)


def test_atc_zero_feature_floor():
    assert cpu_energy_atc(12_000, 0) == pytest.approx(2.1 * 0.049152, rel=1e-9)


def test_cta_energy():
    assert cpu_energy_cta(20_000) == pytest.approx(0.05, rel=0.05)


def test_mips_figures():
    assert processing_load_mips(cpu_time_atc(12_000, 100)) == pytest.approx(69.23, rel=5e-3)
    assert processing_load_mips(cpu_time_cta(20_000)) == pytest.approx(17.64, rel=5e-3)


@pytest.mark.parametrize("call", [lambda: cpu_energy_atc(-1, 10), lambda: cpu_energy_atc(12_000, -1),
                                  lambda: cpu_energy_cta(0), lambda: cpu_energy_cta(7_000)])
def test_energy_domain_errors(call):
    with pytest.raises(ValueError):
        call()


# ---------------------------------------------------------------------------
# coverage and links


def test_coverage_empty_when_far():
    sc = scenario_of(make_nodes([(0, 0)]), [temperature_app(0, [(200, 200)])])
    assert coverage_set(sc, 0, 0) == frozenset()


def test_coverage_boundary_inclusive():
    sc = scenario_of(make_nodes([(100, 100)]), [temperature_app(0, [(130, 100)])])
    assert coverage_set(sc, 0, 0) == {0}


def test_coverage_respects_profile():
    sc = random_scenario(1, 5, 5, apps_per_kind=1, area=(60.0, 60.0))
    for app in sc.applications:
        for tp in app.test_points:
            for i in coverage_set(sc, app.id, tp.id):
                node = sc.node(i)
                assert node.position.distance(tp.position) <= node.sensing_range
                if app.kind.is_visual:
                    assert node.profile is BEAGLEBONE


def test_coverage_unknown_ids():
    sc = scenario_of(make_nodes([(0, 0)]), [temperature_app(0, [(10, 0)])])
    with pytest.raises(KeyError):
        coverage_set(sc, 5, 0)
    with pytest.raises(KeyError):
        coverage_set(sc, 0, 5)


@given(st.integers(0, 10_000), st.floats(5.0, 60.0), st.floats(1.0, 30.0))
@settings(max_examples=25, deadline=None)
def test_coverage_monotone_in_sensing_range(seed, r, extra):
    small = random_scenario(seed, 4, 4, sensing_range=r, area=(100.0, 100.0))
    large = random_scenario(seed, 4, 4, sensing_range=r + extra, area=(100.0, 100.0))
    for key, nodes in small.topology.coverage.items():
        assert set(nodes) <= set(large.topology.coverage[key])


@pytest.mark.parametrize("dist,dbm,viable", [(10, 0, True), (60, 0, False), (40, -10, False), (30, -10, True)])
def test_link_viability(dist, dbm, viable):
    sc = scenario_of(make_nodes([(0, 0), (dist, 0)]), radio=RADIO.with_p_max_dbm(dbm))
    assert link_viable(sc, 0, 1) is viable


def test_link_self_loop_rejected():
    sc = scenario_of(make_nodes([(0, 0), (10, 0)]))
    with pytest.raises(ValueError):
        link_viable(sc, 0, 0)


def test_link_capacity_min_and_symmetric():
    sc = scenario_of((SensorNode(0, Point2D(0, 0), TELOSB, is_sink=True), SensorNode(1, Point2D(20, 0), BEAGLEBONE)))
    assert link_capacity(sc, 0, 1) == link_capacity(sc, 1, 0) == 250_000
    slow = NodeProfile("slow", 100e3, 1e5, 8, 1e4)
    fast = NodeProfile("fast", 300e3, 1e5, 8, 1e4)
    sc = scenario_of((SensorNode(0, Point2D(0, 0), slow, is_sink=True), SensorNode(1, Point2D(20, 0), fast)))
    assert link_capacity(sc, 0, 1) == 100e3


def test_link_capacity_needs_viable_link():
    sc = scenario_of(make_nodes([(0, 0), (100, 0)]))
    with pytest.raises(ValueError):
        link_capacity(sc, 0, 1)


def test_interference_two_nodes():
    sc = scenario_of(make_nodes([(0, 0), (30, 0)]))
    assert interfering_links(sc, 0, 1) == {(1, 0)}


def test_interference_line_of_three():
    sc = scenario_of(make_nodes([(0, 0), (50, 0), (100, 0)]))
    for a, b in [((0, 1), (1, 2)), ((1, 2), (0, 1))]:
        assert b in interfering_links(sc, *a)
    # direct distance check of the (e)/(f) clauses
    r_if = interference_range(1.0, RADIO)
    assert max(sc.topology.d(0, 2), sc.topology.d(1, 2)) < r_if


def test_interference_isolated_clusters():
    sc = scenario_of(make_nodes([(0, 0), (20, 0), (480, 480), (460, 480)], sinks=(0, 2)))
    assert interfering_links(sc, 0, 1) == {(1, 0)}
    assert interfering_links(sc, 2, 3) == {(3, 2)}


def brute_interference(sc: Scenario, i: int, h: int) -> set:
    topo = sc.topology
    out = set()
    for g, t in topo.links:
        if (g, t) == (i, h):
            continue
        if {g, t} & {i, h} or topo.d(i, t) < topo.r_if or topo.d(g, h) < topo.r_if:
            out.add((g, t))
    return out


@pytest.mark.parametrize("seed", range(5))
def test_interference_matches_definition(seed):
    sc = random_scenario(seed, 5, 5, area=(250.0, 250.0))
    for i, h in sc.topology.links:
        assert interfering_links(sc, i, h) == brute_interference(sc, i, h)


# ---------------------------------------------------------------------------
# DODAG


def test_dodag_chain():
    sc = scenario_of(make_nodes([(0, 0), (50, 0), (100, 0)]))
    dag = build_dodag(sc)
    assert dag.parent == {1: 0, 2: 1}
    assert dag.hop_count == {0: 0, 1: 1, 2: 2}


def test_dodag_tie_goes_to_lower_sink():
    sc = scenario_of(make_nodes([(0, 0), (80, 0), (40, 0)], sinks=(0, 1)))
    assert build_dodag(sc).parent[2] == 0


def grid(n: int, spacing: float):
    return [(c * spacing, r * spacing) for r in range(n) for c in range(n)]


def test_dodag_grid_axis_links_only():
    # 30 m spacing at -10 dBm: diagonals (42.4 m) exceed the 33.66 m range
    sc = scenario_of(make_nodes(grid(6, 30.0)), radio=RADIO.with_p_max_dbm(-10))
    assert build_dodag(sc).hop_count[35] == 10


def test_dodag_grid_with_diagonals():
    # 40 m spacing at 0 dBm: diagonals (56.6 m) are viable, so the far corner is 5 hops away
    sc = scenario_of(make_nodes(grid(6, 40.0)))
    assert build_dodag(sc).hop_count[35] == 5


def test_dodag_grid_40m_disconnected_at_minus_ten():
    sc = scenario_of(make_nodes(grid(6, 40.0)), radio=RADIO.with_p_max_dbm(-10))
    dag = build_dodag(sc)
    assert dag.unreachable == frozenset(range(1, 36))
    assert dag.parent == {}


@pytest.mark.parametrize("seed", range(10))
def test_dodag_invariants(seed):
    sc = random_scenario(seed, 8, 8, n_sinks_scalar=2, area=(150.0, 150.0))
    dag = build_dodag(sc)
    for i, parent in dag.parent.items():
        assert link_viable(sc, i, parent)
        path = dag.path_to_sink(i)
        assert len(path) - 1 == dag.hop_count[i]
        assert sc.node(path[-1]).is_sink
        assert len(set(path)) == len(path)
    assert set(dag.hop_count) | dag.unreachable == {n.id for n in sc.nodes}


# ---------------------------------------------------------------------------
# generation and serialisation


def test_random_scenario_defaults():
    sc = random_scenario(0)
    assert len(sc.nodes) == 72
    assert sum(n.is_sink for n in sc.nodes) == 2
    assert sum(n.profile is TELOSB for n in sc.nodes) == 36
    assert TELOSB.memory_bits == 7 * 1024 * 8 and BEAGLEBONE.mips == 720.0
    assert all(n.activation_cost == 0.01 and n.sensing_range == 30.0 for n in sc.nodes)
    by_kind = {a.kind: a for a in sc.applications}
    assert by_kind[KindOfApp.CTA].preference == 12 and by_kind[KindOfApp.ATC].preference == 8
    assert by_kind[KindOfApp.CTA].mips == pytest.approx(17.64)
    assert by_kind[KindOfApp.ATC].mips == pytest.approx(69.23)
    assert by_kind[KindOfApp.TEMPERATURE].memory_bits == 4462 * 8
    assert [len(a.test_points) for a in sc.applications] == [5, 5, 3, 3]
    assert all(a.per_node_cap == 1 for a in sc.applications)


def test_random_scenario_deterministic():
    assert dump_scenario(random_scenario(42, 5, 5)) == dump_scenario(random_scenario(42, 5, 5))
    assert dump_scenario(random_scenario(42, 5, 5)) != dump_scenario(random_scenario(43, 5, 5))


def test_no_scalar_nodes():
    sc = random_scenario(2, 0, 6, n_sinks_scalar=0, area=(60.0, 60.0))
    assert all(n.profile is BEAGLEBONE for n in sc.nodes)
    temp = next(a for a in sc.applications if a.kind is KindOfApp.TEMPERATURE)
    assert temp.can_run_on(BEAGLEBONE)


@pytest.mark.parametrize("kw", [dict(n_sinks_scalar=0, n_sinks_mm=0), dict(n_scalar=-1), dict(n_sinks_scalar=9)])
def test_bad_generation_counts(kw):
    params = dict(n_scalar=4, n_multimedia=4)
    params.update(kw)
    with pytest.raises(ScenarioError):
        random_scenario(0, **params)


def test_lowercase_kind_names_accepted():
    sc = random_scenario(0, 3, 3, apps_per_kind={"cta": 2, "temperature": 0, "light": 0, "atc": 0})
    assert [a.kind for a in sc.applications] == [KindOfApp.CTA, KindOfApp.CTA]


def test_json_round_trip(tmp_path):
    sc = random_scenario(9, 4, 4, radio=RADIO.with_p_max_dbm(-10), lifetime_s=3 * DAY_S)
    path = tmp_path / "s.json"
    text = dump_scenario(sc, path)
    back = load_scenario(path)
    assert dump_scenario(back) == text
    assert back == sc


@pytest.mark.parametrize("where", ["top", "node", "app"])
def test_json_unknown_key(where):
    data = scenario_to_dict(random_scenario(0, 2, 2))
    target = {"top": data, "node": data["nodes"][0], "app": data["applications"][0]}[where]
    target["bogus"] = 1
    with pytest.raises(ScenarioError, match="bogus"):
        scenario_from_dict(data)


def test_json_malformed_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "area": [1, 2],\n  oops\n}\n')
    with pytest.raises(ScenarioError, match="line 3"):
        load_scenario(path)


def test_scenario_needs_sink():
    with pytest.raises(ScenarioError):
        scenario_of(make_nodes([(0, 0)], sinks=()))


def test_positions_inside_area():
    with pytest.raises(ScenarioError):
        scenario_of(make_nodes([(600, 0)]))


def test_merge_shifts_ids():
    a = random_scenario(0, 3, 3, area=(100.0, 100.0))
    b = random_scenario(1, 3, 3, area=(100.0, 100.0))
    m = merge_scenarios(a, b)
    assert [n.id for n in m.nodes] == list(range(12))
    assert [x.id for x in m.applications] == list(range(8))
    assert sorted(m.sinks) == sorted(a.sinks + [s + 6 for s in b.sinks])
    json.loads(dump_scenario(m))


def test_with_sinks_and_lifetime():
    sc = random_scenario(0, 3, 3)
    assert sc.with_sinks([1, 4]).sinks == [1, 4]
    assert sc.with_lifetime(5.0).lifetime_s == 5.0
    assert math.isclose(sc.big_m_bps, 2.5e6)
