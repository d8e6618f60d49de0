"""LP simplex, branch-and-bound and the brute-force oracle."""

from .bnb import BnbConfig, Branching, Search, SolverStats, solve_milp
from .enumerate import InstanceTooLarge, enumerate_exact
from .lp import LpResult, solve_lp
from .simplex import LpStatus, NumericalError

__all__ = [
    "BnbConfig", "Branching", "InstanceTooLarge", "LpResult", "LpStatus", "NumericalError",
    "Search", "SolverStats", "enumerate_exact", "solve_lp", "solve_milp",
]
