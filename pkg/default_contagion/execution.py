"""
Run orchestration: wires scenario files to the engines and writes their outputs
"""
import time
from dataclasses import replace
from pathlib import Path

import pandas as pd

from default_contagion.config import SOLVER_SETTINGS
from default_contagion.model import require_valid
from default_contagion.network import beta_norms, extract_types, low_rank, svd_decompose
from default_contagion.network.decomposition import check_orthonormal, reconstruction_residual
from default_contagion.network.io import read_matrix, write_matrix, write_svd
from default_contagion.scenarios import load_scenario
from default_contagion.simulation.convergence import lln_harness
from default_contagion.simulation.meanfield import compare_lowrank, solve_ensemble
from default_contagion.simulation.oracle import mv_solve
from default_contagion.simulation.particle import run_pool_trials
from default_contagion.utils.logger import log_run, logger
from default_contagion.utils.output import (
    default_times_frame, ensure_dir, histogram_frame, types_frame, write_frame, write_json,
)
from default_contagion.utils.streams import trial_seeds


def prepare_scenario(name_or_path, trials=None, seed=None, out_dir=None, bins=None):
    """
    Load a scenario and apply command-line overrides (flags win over the file)

    Returns:
        ScenarioFile with a validated config
    """
    scenario = load_scenario(name_or_path)
    config = scenario.config.with_overrides(trials=trials, seed=seed)
    scenario = replace(
        scenario,
        config=config,
        output_dir=Path(out_dir) if out_dir else scenario.output_dir,
        bins=bins or scenario.bins,
    )
    require_valid(scenario.config)
    return scenario


def run_svd(matrix_path, out_dir, tol=None, theta=None, group_tol=None):
    """
    Decompose a network and write singular values, factors, type table and low-rank report

    Args:
        matrix_path: Dense CSV or triple list
        out_dir: Output directory
        tol: Rank cutoff relative to the largest singular value
        theta: Low-rank order (default: full rank)
        group_tol: Type grouping tolerance

    Returns:
        Summary dict
    """
    start = time.time()
    out_dir = ensure_dir(out_dir)
    matrix = read_matrix(matrix_path)
    svd = svd_decompose(matrix, tol)
    write_svd(svd, out_dir)

    distribution = extract_types(svd, group_tol)
    write_frame(distribution.to_frame(), out_dir / "types.csv")

    summary = {
        "matrix": str(matrix_path),
        "n": matrix.n,
        "rank": svd.rank,
        "singular_values": svd.singular_values.tolist(),
        "beta_norms": beta_norms(svd).tolist(),
        "reconstruction_residual": reconstruction_residual(matrix, svd),
        "orthonormality_deviation": check_orthonormal(svd),
        "type_count": len(distribution.atoms),
    }
    if svd.rank:
        theta = svd.rank if theta is None else int(theta)
        approx, report = low_rank(svd, theta)
        write_matrix(approx, out_dir / f"low_rank_{theta}.csv")
        summary["low_rank"] = report.to_dict()

    summary["runtime"] = time.time() - start
    write_json(summary, out_dir / "svd_summary.json")
    logger.info(f"SVD of {matrix_path}: rank {svd.rank}, outputs in {out_dir}")
    return summary


def run_meanfield(scenario, threads=1):
    """
    Moment-hierarchy ensemble: mean curves, first trial, histogram of D_T and summary

    Args:
        scenario: Prepared ScenarioFile
        threads: Worker threads

    Returns:
        Summary dict
    """
    config = scenario.config
    out_dir = ensure_dir(scenario.output_dir)
    result = solve_ensemble(config, threads=threads, bins=scenario.bins)

    write_frame(result.mean_frame(), out_dir / "meanfield_curves.csv")
    write_frame(result.histogram(), out_dir / "meanfield_histogram.csv")
    write_frame(types_frame(config), out_dir / "types.csv")

    summary = {"command": "meanfield", "label": scenario.label, **result.summary()}
    write_json(summary, out_dir / "meanfield_summary.json")
    log_run("meanfield", scenario.label, result.trials, result.runtime, summary["mean_D_T"])
    return summary


def run_particles(scenario, threads=1):
    """
    Finite-pool ensemble with pool_size names per trial

    Returns:
        Summary dict
    """
    config = scenario.config
    out_dir = ensure_dir(scenario.output_dir)
    result = run_pool_trials(config, threads=threads)

    write_frame(result.mean_frame(), out_dir / "particles_curves.csv")
    write_frame(histogram_frame(result.D_T, scenario.bins), out_dir / "particles_histogram.csv")
    first = result.first_path
    write_frame(default_times_frame(first.default_times, first.name_types, first.labels), out_dir / "default_times.csv")
    write_frame(types_frame(config), out_dir / "types.csv")

    summary = {"command": "particles", "label": scenario.label, "pool_size": config.pool_size, **result.summary()}
    write_json(summary, out_dir / "particles_summary.json")
    log_run("particles", scenario.label, result.trials, result.runtime, summary["mean_D_T"])
    return summary


def run_oracle(scenario, particles=None, picard=0):
    """
    Weighted-particle solution along the first trial's V path

    Args:
        scenario: Prepared ScenarioFile
        particles: Particles per type
        picard: Picard diagnostic passes (0 disables)

    Returns:
        Summary dict
    """
    start = time.time()
    config = scenario.config
    out_dir = ensure_dir(scenario.output_dir)
    seed = trial_seeds(config.controls.seed, 1)[0]
    particles = particles or SOLVER_SETTINGS["oracle_particles"]
    path = mv_solve(config, seed, M=particles, picard_iterations=picard)

    write_frame(path.to_frame(), out_dir / "oracle_curves.csv")
    write_frame(types_frame(config), out_dir / "types.csv")

    runtime = time.time() - start
    summary = {
        "command": "oracle",
        "label": scenario.label,
        "particles_per_type": particles,
        "D_T": path.D_T,
        "min_intensity": path.min_intensity,
        "weights_nonincreasing": path.weights_nonincreasing,
        "picard_residuals": path.picard_residuals,
        "picard_distance": path.picard_distance,
        "runtime": runtime,
    }
    write_json(summary, out_dir / "oracle_summary.json")
    log_run("oracle", scenario.label, 1, runtime, path.D_T)
    return summary


def run_lln(scenario, threads=1, n_list=None):
    """
    Convergence of finite pools to the limit

    Returns:
        Convergence report as a dict
    """
    out_dir = ensure_dir(scenario.output_dir)
    report = lln_harness(scenario.config, n_list or scenario.n_list, threads=threads)
    data = {"command": "lln", "label": scenario.label, **report.to_dict()}
    write_frame(pd.DataFrame({
        "N": report.n_list,
        "rms_error": report.rms_error,
        "binomial_reference": report.binomial_reference,
    }), out_dir / "lln_errors.csv")
    write_json(data, out_dir / "lln_report.json")
    log_run("lln", scenario.label, report.trials, report.runtime)
    return data


def run_compare(full, reduced, out_dir=None, threads=1):
    """
    Percent error of the reduced network's mean impact against the full one

    Args:
        full: Prepared ScenarioFile of the full network
        reduced: Prepared ScenarioFile of the reduced network
        out_dir: Output directory (default: the full scenario's)

    Returns:
        Summary dict
    """
    out_dir = ensure_dir(out_dir or full.output_dir)
    comparison = compare_lowrank(full.config, reduced.config, threads=threads, bins=full.bins)

    columns = {"t": comparison.t}
    for i, label in enumerate(comparison.labels):
        columns[f"PE_{label}"] = comparison.percent_error[:, i]
    write_frame(pd.DataFrame(columns), out_dir / "percent_error.csv")
    write_frame(comparison.full.mean_frame(), out_dir / "compare_full_curves.csv")
    write_frame(comparison.reduced.mean_frame(), out_dir / "compare_reduced_curves.csv")

    summary = {"command": "compare", "full": full.label, "reduced": reduced.label, **comparison.summary()}
    write_json(summary, out_dir / "compare_summary.json")
    log_run("compare", f"{full.label} vs {reduced.label}", comparison.full.trials,
            comparison.runtime_full + comparison.runtime_reduced, float(comparison.full.D_T.mean()))
    return summary
