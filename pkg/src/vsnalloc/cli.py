"""``vsnalloc`` command line: gen, solve, sweep, validate."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .harness import ExperimentSpec, default_time_limit, run_experiment, write_results
from .heuristic import heuristic_state
from .model import Routing, Solution, Status, build_model, validate_solution
from .scenario import DAY_S, RadioParams, ScenarioError, dump_scenario, load_scenario, random_scenario
from .solver.bnb import BnbConfig, solve_milp

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

FIXTURES = {"one-node": "one_node.json"}


class UsageError(Exception):
    pass


def fixture_text(name: str) -> str:
    return resources.files("vsnalloc").joinpath("data", FIXTURES[name]).read_text()


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_scenario(path: str):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    except (ScenarioError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_gen(args) -> int:
    if args.fixture:
        _write(fixture_text(args.fixture), args.out)
        return EXIT_OK
    radio = RadioParams().with_p_max_dbm(args.p_max_dbm)
    try:
        scenario = random_scenario(
            args.seed, n_scalar=args.n_scalar, n_multimedia=args.n_multimedia,
            n_sinks_scalar=args.sinks_scalar, n_sinks_mm=args.sinks_mm, apps_per_kind=args.apps_per_kind,
            area=tuple(args.area), radio=radio, lifetime_s=args.lifetime_days * DAY_S)
    except ScenarioError as exc:
        raise UsageError(str(exc)) from None
    _write(dump_scenario(scenario), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.method == "heuristic":
        if args.routing != Routing.STATIC.value:
            print("note: the heuristic always uses static routing", file=sys.stderr)
        solution = heuristic_state(scenario, args.seed).solution
    else:
        time_limit = args.time_limit if args.time_limit is not None else default_time_limit()
        config = BnbConfig(time_limit=time_limit, node_limit=args.node_limit, lp_backend=args.lp_backend)
        solution, _ = solve_milp(build_model(scenario, args.routing, tighten=True), config)
    _write(solution.to_json(), args.out)
    return EXIT_OK if solution.status in (Status.OPTIMAL, Status.FEASIBLE) else EXIT_FAIL


def cmd_validate(args) -> int:
    scenario = _load_scenario(args.scenario)
    try:
        data = json.loads(Path(args.solution).read_text())
        solution = Solution.from_dict(data)
    except FileNotFoundError:
        raise UsageError(f"{args.solution}: no such file") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.solution}: line {exc.lineno}: {exc.msg}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.solution}: {exc}") from None
    routing = args.routing or solution.routing or Routing.MULTIPATH.value
    violations = validate_solution(scenario, routing, solution)
    for v in violations:
        print(v)
    if violations:
        return EXIT_FAIL
    print(f"ok: {routing} solution satisfies every constraint (objective {solution.objective:g})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec = ExperimentSpec.load(args.spec)
    except FileNotFoundError:
        raise UsageError(f"{args.spec}: no such file") from None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{args.spec}: {exc}") from None
    if args.time_limit is not None:
        spec.time_limit = args.time_limit
    rows = run_experiment(spec, jobs=args.jobs)
    write_results(rows, args.out_dir, spec.name, timing=args.timing)
    bad = [r for r in rows if r.violations]
    for r in bad:
        print(f"{r.method} value={r.sweep_value} seed={r.seed}: {r.violations} violations", file=sys.stderr)
    print(f"{len(rows)} rows written to {Path(args.out_dir) / spec.name}.csv")
    return EXIT_FAIL if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsnalloc", description="Multi-application deployment on shared sensor networks")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="emit a scenario as JSON")
    gen.add_argument("--fixture", choices=sorted(FIXTURES), help="emit a bundled scenario instead of a random one")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n-scalar", type=int, default=6)
    gen.add_argument("--n-multimedia", type=int, default=6)
    gen.add_argument("--sinks-scalar", type=int, default=1)
    gen.add_argument("--sinks-mm", type=int, default=1)
    gen.add_argument("--apps-per-kind", type=int, default=1)
    gen.add_argument("--area", type=float, nargs=2, default=[100.0, 100.0], metavar=("W", "H"))
    gen.add_argument("--p-max-dbm", type=float, default=0.0)
    gen.add_argument("--lifetime-days", type=float, default=1.0)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="solve one scenario")
    solve.add_argument("--scenario", required=True)
    solve.add_argument("--routing", choices=[r.value for r in Routing], default=Routing.MULTIPATH.value)
    solve.add_argument("--method", choices=["exact", "heuristic"], default="exact")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--out")
    solve.add_argument("--time-limit", type=float)
    solve.add_argument("--node-limit", type=int, default=200_000)
    solve.add_argument("--lp-backend", choices=["simplex", "highs"], default="simplex")
    solve.set_defaults(func=cmd_solve)

    sweep = sub.add_parser("sweep", help="run an experiment spec")
    sweep.add_argument("--spec", required=True)
    sweep.add_argument("--out-dir", required=True)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--time-limit", type=float)
    sweep.add_argument("--timing", action="store_true", help="record wall times (output no longer byte-stable)")
    sweep.set_defaults(func=cmd_sweep)

    val = sub.add_parser("validate", help="check a solution against a scenario")
    val.add_argument("--scenario", required=True)
    val.add_argument("--solution", required=True)
    val.add_argument("--routing", choices=[r.value for r in Routing])
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
