"""
Default Contagion - Main entry point

This script provides a command-line interface for the default contagion engine.
"""
import argparse
import json
import sys

from default_contagion import __version__
from default_contagion.config import OUTPUT_DIR, OUTPUT_SETTINGS, SOLVER_SETTINGS
from default_contagion.errors import ContagionError
from default_contagion.execution import (
    prepare_scenario, run_compare, run_lln, run_meanfield, run_oracle, run_particles, run_svd,
)
from default_contagion.scenarios import list_scenarios, load_scenario
from default_contagion.utils.logger import log_error, logger

IO_EXIT_CODE = 6


def add_run_arguments(parser):
    parser.add_argument('--scenario', type=str, required=True, help='Scenario file or bundled scenario name')
    parser.add_argument('--trials', type=int, help='Number of Monte Carlo trials')
    parser.add_argument('--seed', type=int, help='Master seed')
    parser.add_argument('--threads', type=int, default=1, help='Worker threads (outputs do not depend on it)')
    parser.add_argument('--out', type=str, help='Output directory')
    parser.add_argument('--bins', type=int, help='Histogram bins for D_T')


def parse_arguments(argv=None):
    """
    Parse command-line arguments

    Returns:
        Parsed arguments
    """
    parser = argparse.ArgumentParser(description='Default Contagion - default clustering in large interacting portfolios')
    subparsers = parser.add_subparsers(dest='command', help='Command to execute')

    svd_parser = subparsers.add_parser('svd', help='Decompose an adjacency matrix')
    svd_parser.add_argument('--matrix', type=str, help='Dense CSV or i,j,omega triple list')
    svd_parser.add_argument('--scenario', type=str, help='Take the matrix and theta from a scenario')
    svd_parser.add_argument('--tol', type=float, help='Rank cutoff relative to the largest singular value')
    svd_parser.add_argument('--theta', type=int, help='Low-rank order')
    svd_parser.add_argument('--group-tol', type=float, help='Type grouping tolerance')
    svd_parser.add_argument('--out', type=str, help='Output directory')

    meanfield_parser = subparsers.add_parser('meanfield', help='Solve the moment hierarchy over many V paths')
    add_run_arguments(meanfield_parser)

    particles_parser = subparsers.add_parser('particles', help='Simulate finite pools')
    add_run_arguments(particles_parser)

    oracle_parser = subparsers.add_parser('oracle', help='Weighted-particle limit along one V path')
    add_run_arguments(oracle_parser)
    oracle_parser.add_argument('--particles', type=int, help='Particles per type')
    oracle_parser.add_argument('--picard', type=int, default=0, help='Picard diagnostic passes')

    lln_parser = subparsers.add_parser('lln', help='Finite pools against the limit for several N')
    add_run_arguments(lln_parser)
    lln_parser.add_argument('--n-list', type=int, nargs='+', help='Pool sizes, ascending')

    compare_parser = subparsers.add_parser('compare', help='Percent error of a low-rank network')
    add_run_arguments(compare_parser)
    compare_parser.add_argument('--reduced', type=str, required=True, help='Scenario of the reduced network')

    info_parser = subparsers.add_parser('info', help='Display configuration information')
    info_parser.add_argument('--scenarios', action='store_true', help='Also list bundled scenarios')

    subparsers.add_parser('list-scenarios', help='List bundled scenarios')

    return parser.parse_args(argv)


def display_info(show_scenarios=False):
    """
    Display configuration information

    Args:
        show_scenarios: Whether to list bundled scenarios
    """
    print(f"\n=== Default Contagion {__version__} ===\n")
    print("Solver Settings:")
    for key in ("t_end", "dt", "moment_cap", "trials", "seed", "closure_rule", "oracle_particles"):
        print(f"  {key}: {SOLVER_SETTINGS[key]}")
    print(f"\nOutputs go to {OUTPUT_DIR} with float format {OUTPUT_SETTINGS['float_format']}")

    if show_scenarios:
        print()
        print_scenarios()

    print("\nTo solve the mean-field limit, run:")
    print("  python main.py meanfield --scenario one_cluster")
    print("\nTo compare a network with its rank-1 reduction, run:")
    print("  python main.py compare --scenario two_cluster --reduced two_cluster_rank1")
    print("\nFor more options, run:")
    print("  python main.py --help")


def print_scenarios():
    print("=== Bundled Scenarios ===\n")
    for i, (name, description) in enumerate(list_scenarios(), 1):
        print(f"{i}. {name} - {description}")


def print_error(exc, exit_code):
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code}))


def summary_line(summary):
    parts = [summary.get("command", "")]
    if "mean_D_T" in summary:
        parts.append(f"mean D_T {summary['mean_D_T']:.17g}")
    elif "D_T" in summary:
        parts.append(f"D_T {summary['D_T']:.17g}")
    if "overall_max_percent_error" in summary:
        parts.append(f"max PE {summary['overall_max_percent_error']:.17g}")
    if "slope" in summary and summary["slope"] is not None:
        parts.append(f"slope {summary['slope']:.17g}")
    if "trials" in summary:
        parts.append(f"trials {summary['trials']}")
    if "runtime" in summary:
        parts.append(f"runtime {summary['runtime']:.2f}s")
    return ", ".join(p for p in parts if p)


def run_command(args):
    """
    Dispatch one subcommand

    Returns:
        Summary dict, or None for informational commands
    """
    if args.command == 'svd':
        matrix, theta, out = args.matrix, args.theta, args.out
        if args.scenario:
            scenario = load_scenario(args.scenario)
            matrix = matrix or scenario.matrix
            theta = theta if theta is not None else scenario.theta
            out = out or scenario.output_dir / "svd"
        if matrix is None:
            raise FileNotFoundError("no matrix given (use --matrix or a scenario with a matrix)")
        summary = run_svd(matrix, out or OUTPUT_DIR / "svd", tol=args.tol, theta=theta, group_tol=args.group_tol)
        summary["command"] = "svd"
        return summary

    scenario = prepare_scenario(args.scenario, trials=args.trials, seed=args.seed, out_dir=args.out, bins=args.bins)
    if args.command == 'meanfield':
        return run_meanfield(scenario, threads=args.threads)
    if args.command == 'particles':
        return run_particles(scenario, threads=args.threads)
    if args.command == 'oracle':
        return run_oracle(scenario, particles=args.particles, picard=args.picard)
    if args.command == 'lln':
        return run_lln(scenario, threads=args.threads, n_list=args.n_list)
    if args.command == 'compare':
        reduced = prepare_scenario(args.reduced, trials=args.trials, seed=args.seed, bins=args.bins)
        return run_compare(scenario, reduced, out_dir=args.out, threads=args.threads)
    raise ValueError(f"unknown command {args.command}")


def main(argv=None):
    """
    Main entry point
    """
    args = parse_arguments(argv)

    if args.command == 'info':
        display_info(show_scenarios=args.scenarios)
        return 0
    if args.command == 'list-scenarios':
        print_scenarios()
        return 0
    if args.command is None:
        display_info()
        return 0

    logger.info(f"Starting {args.command}")
    try:
        summary = run_command(args)
    except ContagionError as e:
        log_error(f"{args.command} failed", e)
        print_error(e, e.exit_code)
        return e.exit_code
    except OSError as e:
        log_error(f"{args.command} failed to read or write a file", e)
        print_error(e, IO_EXIT_CODE)
        return IO_EXIT_CODE
    except Exception as e:
        log_error(f"Unexpected error in {args.command}", e)
        print_error(e, 1)
        return 1

    print(summary_line(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
