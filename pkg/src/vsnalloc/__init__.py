"""Deploying several sensing applications on one shared wireless sensor network."""

from .heuristic import run_heuristic
from .model import Routing, Solution, Status, build_model, metrics, relax, validate_solution
from .scenario import Scenario, load_scenario, random_scenario
from .solver import BnbConfig, enumerate_exact, solve_lp, solve_milp

__all__ = [
    "BnbConfig", "Routing", "Scenario", "Solution", "Status", "build_model", "enumerate_exact",
    "load_scenario", "metrics", "random_scenario", "relax", "run_heuristic", "solve_lp", "solve_milp",
    "validate_solution",
]
