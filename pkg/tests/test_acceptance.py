"""Acceptance suite: one PASS/FAIL line per criterion, printed as it runs."""
from __future__ import annotations

import statistics
import time

import numpy as np
import pytest

from helpers import knapsack_dp, knapsack_instance
from vsnalloc.harness import DESK_BASE, make_scenario, relative_gap
from vsnalloc.heuristic import heuristic_state
from vsnalloc.model import Routing, build_model, metrics, validate_solution
from vsnalloc.scenario import (DAY_S, KindOfApp, RadioParams, cpu_energy_atc, cpu_energy_cta, cpu_time_atc,
                               cpu_time_cta, coverage_set, interference_range, merge_scenarios,
                               processing_load_mips, random_scenario, tx_range)
from vsnalloc.solver import enumerate_exact, solve_milp


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def exact(scenario, routing):
    return solve_milp(build_model(scenario, routing, tighten=True))[0]


def test_criterion_1_radio_ranges(report):
    radio = RadioParams()
    low = radio.with_p_max_dbm(-10.0)
    tx0, if0 = tx_range(radio.p_max_mw, radio), interference_range(radio.p_max_mw, radio)
    tx10 = tx_range(low.p_max_mw, low)
    ok = 58 <= tx0 <= 61 and 117 <= if0 <= 121 and 32 <= tx10 <= 35
    report(1, ok, f"tx(0 dBm)={tx0:.2f} m, interference(0 dBm)={if0:.2f} m, tx(-10 dBm)={tx10:.2f} m")


def test_criterion_2_energy_and_mips(report):
    e_atc, e_cta = cpu_energy_atc(12_000, 100), cpu_energy_cta(20_000)
    mips_atc = processing_load_mips(cpu_time_atc(12_000, 100))
    mips_cta = processing_load_mips(cpu_time_cta(20_000))
    ok = (abs(e_atc / 0.2019 - 1) <= 5e-3 and abs(e_cta / 0.05 - 1) <= 5e-2
          and abs(mips_atc / 69.23 - 1) <= 5e-3 and abs(mips_cta / 17.64 - 1) <= 5e-3)
    report(2, ok, f"ATC {e_atc:.4f} J, CTA {e_cta:.4f} J, MIPS {mips_atc:.2f}/{mips_cta:.2f}")


# mixes of three applications, cycled over the seeds
MIXES = [("temperature", "light", "cta"), ("temperature", "cta", "atc"), ("light", "light", "atc"),
         ("temperature", "light", "temperature")]


def small_instance(seed: int):
    kinds = MIXES[seed % len(MIXES)]
    per_kind = {k: kinds.count(k) for k in ("temperature", "light", "cta", "atc")}
    points = {"temperature": 2, "light": 2, "cta": 1, "atc": 1}
    radio = RadioParams().with_p_max_dbm(-10.0 if seed % 3 == 0 else 0.0)
    days = 1.5 if seed % 3 == 1 else (4.0 if seed % 5 == 0 else 1.0)
    return random_scenario(seed, 5, 4, apps_per_kind=per_kind, test_points_per_app=points, area=(80.0, 80.0),
                           radio=radio, lifetime_s=days * DAY_S)


def test_criterion_3_oracle_equivalence(report):
    start = time.perf_counter()
    checked = mismatches = nonzero = 0
    for seed in range(50):
        sc = small_instance(seed)
        for routing in Routing:
            oracle = enumerate_exact(sc, routing)
            sol = exact(sc, routing)
            checked += 1
            nonzero += oracle.objective > 0
            if abs(oracle.objective - sol.objective) > 1e-6 or validate_solution(sc, routing, sol):
                mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 300
    report(3, ok, f"{checked} solves, {mismatches} mismatches, {nonzero} nonzero optima, {elapsed:.0f} s")


def test_criterion_4_knapsack(report):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(30):
        sc, values, weights, caps = knapsack_instance(rng, int(rng.integers(3, 8)), int(rng.integers(1, 4)))
        sol, _ = solve_milp(build_model(sc))
        mismatches += abs(sol.objective - knapsack_dp(values, weights, caps)) > 1e-9
    report(4, mismatches == 0, f"30 instances, {mismatches} mismatches")


def test_criterion_5_lifetime_thresholds(report):
    problems = []
    for seed in range(3):
        for days in (1.0, 1.875, 2.0, 7.5, 8.0):
            sc, _ = make_scenario({"n_scalar": 12, "n_multimedia": 12, "area": [100.0, 100.0],
                                   "apps_per_kind": 1, "lifetime_days": days}, seed)
            counts = metrics(sc, exact(sc, Routing.MULTIPATH)).active_apps
            if days >= 1.875 and counts["ATC"]:
                problems.append(f"ATC active at L={days} seed {seed}")
            if days >= 7.5 and counts["CTA"]:
                problems.append(f"CTA active at L={days} seed {seed}")
            if days == 1.0:
                for kind in (KindOfApp.ATC, KindOfApp.CTA):
                    app = next(a for a in sc.applications if a.kind is kind)
                    covered = all(coverage_set(sc, app.id, tp.id) for tp in app.test_points)
                    if covered and not counts[kind.value]:
                        problems.append(f"{kind.value} inactive at L=1 seed {seed} despite coverage")
    report(5, not problems, "; ".join(problems) or "15 solves, thresholds respected, both kinds active at L=1")


def test_criterion_6_routing_ordering(report):
    violations = 0
    for seed in range(30):
        sc, _ = make_scenario(dict(DESK_BASE), seed)
        mp, sp, st = (exact(sc, r).objective for r in Routing)
        violations += not (mp >= sp - 1e-6 and sp >= st - 1e-6)
    means = {r: [] for r in Routing}
    for seed in range(30):
        sc, _ = make_scenario({**DESK_BASE, "p_max_dbm": -10.0}, seed)
        for r in Routing:
            means[r].append(exact(sc, r).objective)
    mp, sp, st = (statistics.fmean(means[r]) for r in Routing)
    close = sp >= 0.9 * mp and st >= 0.9 * mp
    report(6, violations == 0 and close,
           f"{violations}/30 ordering violations; -10 dBm means {mp:.3f}/{sp:.3f}/{st:.3f}")


def test_criterion_7_heuristic_quality(report):
    gaps, invalid, faster = [], 0, 0
    for seed in range(30):
        sc = random_scenario(seed, 6, 6, apps_per_kind=2, area=(100.0, 100.0))
        t0 = time.perf_counter()
        heur = heuristic_state(sc, seed).solution
        t1 = time.perf_counter()
        ex = exact(sc, Routing.STATIC)
        t2 = time.perf_counter()
        gaps.append(relative_gap(ex.objective, heur.objective))
        invalid += bool(validate_solution(sc, Routing.STATIC, heur))
        faster += t1 - t0 < t2 - t1
    mean_gap = statistics.fmean(gaps)
    ok = 0 <= mean_gap <= 0.15 and min(gaps) >= -1e-9 and invalid == 0 and faster >= 27
    report(7, ok, f"mean gap {mean_gap:.4f}, max {max(gaps):.4f}, {invalid} invalid, faster on {faster}/30")


def uncovered_fraction(seed: int) -> float:
    sc = random_scenario(seed, 36, 0, n_sinks_mm=0, apps_per_kind={"temperature": 1, "light": 1})
    points = [(a.id, tp.id) for a in sc.applications for tp in a.test_points]
    return sum(not coverage_set(sc, j, k) for j, k in points) / len(points)


def test_criterion_8_virtualization_benefit(report):
    worse = strict = 0
    for s in range(20):
        a = random_scenario(2 * s, 3, 3, apps_per_kind=1, area=(100.0, 100.0))
        b = random_scenario(2 * s + 1, 3, 3, apps_per_kind=1, area=(100.0, 100.0))
        oa, ob = exact(a, Routing.MULTIPATH).objective, exact(b, Routing.MULTIPATH).objective
        om = exact(merge_scenarios(a, b), Routing.MULTIPATH).objective
        worse += om < oa + ob - 1e-6
        strict += om > oa + ob + 1e-6
    freq = statistics.fmean(uncovered_fraction(seed) for seed in range(1000))
    ok = worse == 0 and strict >= 1 and 0.10 <= freq <= 0.20
    report(8, ok, f"merged below isolated on {worse}/20, strictly better on {strict}/20, "
                  f"uncovered frequency {freq:.4f}")
