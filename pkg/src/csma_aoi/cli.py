"""Command-line experiment runner.

Subcommands: ``solve`` (closed-form operating point), ``simulate``
(slot-level Monte Carlo, optional trace and age-path dumps), ``sweep``
(grid experiments from a spec file) and ``capacity`` (saturation limits).

Exit codes: 0 ok, 2 invalid input, 3 infeasible model, 4 I/O failure.
The default simulation seed can be overridden with the environment variable
``CSMA_AOI_SEED``.
"""

from __future__ import annotations

import argparse
import os
import sys

from .analytic import NetworkParams
from .errors import CsmaAoiError, ParameterError
from .simulator import (
    DEFAULT_SEED,
    SimulationConfig,
    record_aoi_path,
    simulate,
    simulate_with_trace,
)
from .solvers import SolverConfig, max_node_count, max_packet_rate, solve_fixed_point
from .sweep import (
    build_spec,
    check_sweep_properties,
    emit,
    parse_spec_file,
    run_sweep,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _env_seed():
    value = os.environ.get("CSMA_AOI_SEED")
    if value is None:
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        raise ParameterError(f"CSMA_AOI_SEED must be an integer, got {value!r}")


def _print_pairs(pairs, stream):
    for key, value in pairs:
        if isinstance(value, float):
            print(f"{key} = {value:.12g}", file=stream)
        else:
            print(f"{key} = {value}", file=stream)


def _cmd_solve(args, stream):
    params = NetworkParams(args.n, args.p, args.w0)
    cfg = SolverConfig(tolerance=args.tol)
    sol = solve_fixed_point(params, cfg)
    _print_pairs([
        ("p_tx", sol.p_tx), ("p_cl", sol.p_cl), ("p_idle", sol.p_idle),
        ("mu", sol.mu), ("beta", sol.beta), ("avg_aoi", sol.avg_aoi),
        ("stable", sol.stable), ("residual", sol.residual),
    ], stream)
    return EXIT_OK


def _cmd_simulate(args, stream):
    params = NetworkParams(args.n, args.p, args.w0)
    seed = args.seed if args.seed is not None else _env_seed()
    cfg = SimulationConfig(params, horizon=args.horizon, warmup=args.warmup,
                           seed=seed, stage_cap=args.stage_cap)
    if args.trace:
        stats, kind, detail, queue = simulate_with_trace(cfg)
        symbols = ("I", "S", "C")
        with open(args.trace, "w", encoding="utf-8") as handle:
            for slot in range(cfg.horizon):
                code = int(kind[slot])
                if code == 0:
                    event = "I"
                else:
                    event = f"{symbols[code]}:{int(detail[slot])}"
                handle.write(f"{slot},{event},{int(queue[slot])}\n")
    else:
        stats = simulate(cfg)
    if args.aoi_path is not None:
        path_rows = record_aoi_path(cfg, args.aoi_path)
        with open(args.aoi_out, "w", encoding="utf-8") as handle:
            handle.write("slot,age\n")
            for slot, age in path_rows:
                handle.write(f"{slot},{age}\n")
    _print_pairs([
        ("backend", stats.backend), ("seed", seed),
        ("empirical_p_tx", stats.empirical_p_tx),
        ("empirical_p_cl", stats.empirical_p_cl),
        ("empirical_p_idle", stats.empirical_p_idle),
        ("empirical_mu", stats.empirical_mu),
        ("mean_aoi", stats.mean_aoi),
        ("mean_aoi_se", stats.mean_aoi_se),
        ("mean_system_time", stats.mean_system_time),
        ("delivered", stats.delivered),
        ("stable", stats.stable),
    ], stream)
    return EXIT_OK


def _cmd_sweep(args, stream):
    values = parse_spec_file(args.spec)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if args.horizon is not None:
        values["horizon"] = str(args.horizon)
    spec = build_spec(values)
    out = args.out or spec.out
    fmt = args.format or spec.fmt
    if out is None:
        raise ParameterError("no output path: pass --out or set 'out' in the spec")
    rows = run_sweep(spec)
    emit(rows, fmt, out)
    for problem in check_sweep_properties(rows):
        print(f"warning: {problem}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {out}", file=stream)
    return EXIT_OK


def _cmd_capacity(args, stream):
    if args.n is not None:
        _print_pairs([("p_max", max_packet_rate(args.n, args.w0))], stream)
    else:
        _print_pairs([("n_max", max_node_count(args.p, args.w0))], stream)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="csma-aoi",
        description="Analyze and simulate the age of information of an "
                    "unsaturated slotted CSMA/CA network.",
        epilog="Environment: CSMA_AOI_SEED sets the default simulation seed. "
               "Exit codes: 0 ok, 2 invalid input, 3 infeasible model, 4 I/O.")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="closed-form operating point")
    solve.add_argument("--n", type=int, required=True, help="number of nodes")
    solve.add_argument("--p", type=float, required=True,
                       help="per-node packet rate per slot")
    solve.add_argument("--w0", type=int, default=8, help="stage-0 window")
    solve.add_argument("--tol", type=float, default=1e-12,
                       help="fixed-point residual tolerance")
    solve.set_defaults(func=_cmd_solve)

    sim = sub.add_parser("simulate", help="slot-level Monte Carlo run")
    sim.add_argument("--n", type=int, required=True, help="number of nodes")
    sim.add_argument("--p", type=float, required=True,
                     help="per-node packet rate per slot")
    sim.add_argument("--w0", type=int, default=8, help="stage-0 window")
    sim.add_argument("--horizon", type=int, required=True,
                     help="slots to simulate")
    sim.add_argument("--warmup", type=int, default=0,
                     help="slots excluded from averages")
    sim.add_argument("--seed", type=int, default=None,
                     help="RNG seed (default: CSMA_AOI_SEED or built-in)")
    sim.add_argument("--stage-cap", type=int, default=24,
                     help="stage beyond which windows stop doubling")
    sim.add_argument("--trace", metavar="PATH",
                     help="write per-slot events: slot,event{I|S:<node>|C:<k>},queue_total")
    sim.add_argument("--aoi-path", type=int, metavar="NODE",
                     help="record one node's age sample path")
    sim.add_argument("--aoi-out", metavar="PATH",
                     help="output CSV for --aoi-path (slot,age)")
    sim.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="run a sweep from a spec file")
    sweep.add_argument("--spec", required=True,
                       help="flat 'key = value' spec file ('#' comments)")
    sweep.add_argument("--out", help="output path (overrides spec)")
    sweep.add_argument("--format", choices=("csv", "json"),
                       help="output format (overrides spec)")
    sweep.add_argument("--seed", type=int, default=None,
                       help="base seed (overrides spec)")
    sweep.add_argument("--horizon", type=int, default=None,
                       help="simulation horizon (overrides spec)")
    sweep.set_defaults(func=_cmd_sweep)

    cap = sub.add_parser("capacity", help="saturation limits p_max / N_max")
    group = cap.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=int, help="node count (prints p_max)")
    group.add_argument("--p", type=float, help="packet rate (prints N_max)")
    cap.add_argument("--w0", type=int, default=8, help="stage-0 window")
    cap.set_defaults(func=_cmd_capacity)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "aoi_path", None) is not None and not args.aoi_out:
        parser.error("--aoi-path requires --aoi-out")
    try:
        return args.func(args, sys.stdout)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CsmaAoiError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
