"""
Configuration settings for the default contagion engine
"""

import os
from pathlib import Path

# Define base directories
BASE_DIR = Path(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
SCENARIOS_DIR = BASE_DIR / "scenarios"
DATA_DIR = BASE_DIR / "data"
OUTPUT_DIR = BASE_DIR / "output"
LOGS_DIR = BASE_DIR / "logs"

# Solver settings (scenario files override these, CLI flags override scenario files)
SOLVER_SETTINGS = {
    "t_end": 1.0,  # Horizon T
    "dt": 0.01,  # Euler step
    "moment_cap": 20,  # Truncation level K of the moment hierarchy
    "trials": 2000,  # Monte Carlo trials at desk scale (50,000 available by flag)
    "seed": 20190517,  # Master seed
    "closure_rule": "copy_last",  # copy_last (u_{K+1} := u_K) or zero (u_{K+1} := 0)
    "enforce_assumptions": True,  # Failing assumption checks block a run
    "particle_guard": 1e6,  # Largest admissible |lambda| in particle and oracle runs
    "moment_guard": 1e8,  # Largest admissible |u_k|^(1/k), k >= 1, in the moment solver
    "negative_moment_tol": 1e-6,  # Moments below -tol are clamped to 0 and counted
    "oracle_particles": 100_000,  # Weighted particles per type
    "picard_iterations": 5,  # Cap for the path-level fixed point diagnostic
    "picard_tol": 1e-6,  # Sup-norm tolerance on Q between Picard passes
    "chunk_size": 64,  # Trials submitted per batch to the thread pool
}

# Standing-assumption checks
VALIDATION_SETTINGS = {
    "k_bdd": 1000.0,  # Bound on |sigma|, |beta_S|, |beta_C_j|, |ell_j|
    "sigma_lower": 1e-6,  # inf sigma must be at least this (and > 0)
    "dissipativity_start": 2.0,  # First point K of the grid {K, 2K, ..., 2^20 K}
    "dissipativity_doublings": 20,
    "weight_tol": 1e-12,  # Type weights must sum to 1 within this
    "step_tol": 1e-9,  # t_end / dt must be an integer within this
}

# Network / SVD settings
NETWORK_SETTINGS = {
    "svd_tol": 1e-10,  # Singular values <= tol * max are dropped
    "group_tol": 5e-5,  # Max-norm tolerance when merging factor rows
    "table_decimals": 4,  # Rounding applied before grouping
    "reconstruction_tol": 1e-8,  # Relative Frobenius residual allowed after SVD
    "orthonormal_tol": 1e-10,
    "jacobi_max_sweeps": 100,
}

# Output settings
OUTPUT_SETTINGS = {
    "float_format": "%.17g",
    "histogram_bins": 50,
    "json_indent": 2,
}

# Logging Settings
LOGGING_SETTINGS = {
    "enabled": True,
    "level": os.environ.get("DEFAULT_CONTAGION_LOG_LEVEL", "INFO"),  # DEBUG, INFO, WARNING, ERROR, CRITICAL
    "log_to_file": os.environ.get("DEFAULT_CONTAGION_LOG_FILE", "") != "",
    "log_file": os.environ.get("DEFAULT_CONTAGION_LOG_FILE", "default_contagion.log"),
}
