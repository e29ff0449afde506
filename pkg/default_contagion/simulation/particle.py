"""
Finite-N interacting intensity system

Each name n carries an intensity lambda_n driven by its own Brownian motion W_n, the common
factor X and the contagion jumps of the names that defaulted before it. Name n defaults at the
end of the first step in which its accumulated hazard reaches an independent standard
exponential threshold.
"""
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from default_contagion.errors import MalformedConfig, NumericalBlowup
from default_contagion.simulation.dynamics import IntensityCoefficients, check_guard, cir_step, intensity_step
from default_contagion.utils.logger import logger
from default_contagion.utils.output import curves_frame
from default_contagion.utils.streams import TrialStreams, map_trials, trial_seeds


@dataclass
class PoolState:
    """Mutable state of one pool during a trial"""

    t: float
    lam: np.ndarray
    hazard: np.ndarray
    threshold: np.ndarray
    alive: np.ndarray
    x: float


@dataclass
class PathOutput:
    t: np.ndarray
    D: np.ndarray
    D_by_type: np.ndarray
    L: np.ndarray
    Q_by_type: np.ndarray
    X: np.ndarray
    default_times: np.ndarray
    name_types: np.ndarray
    labels: list
    min_intensity: float = 0.0
    intensity_moments: tuple = (0.0, 0.0)
    history: Optional[dict] = None

    @property
    def D_T(self):
        return float(self.D[-1])

    def to_frame(self):
        return curves_frame(self.t, self.D, self.D_by_type, self.L, self.Q_by_type, self.X, self.labels)


def assign_types(config, N):
    """
    Deterministic block assignment: names [round(N c_{p-1}), round(N c_p)) get type p,
    with c the cumulative type weights

    Args:
        config: ScenarioConfig
        N: Pool size

    Returns:
        Integer array of length N
    """
    bounds = np.rint(N * np.cumsum(config.weights())).astype(int)
    bounds = np.clip(bounds, 0, N)
    bounds[-1] = N
    return np.searchsorted(bounds, np.arange(N), side="right")


def portfolio_stats(default_times, name_types, ell, beta, grid, n_types, type_beta=None):
    """
    Loss statistics of a finished pool

    Args:
        default_times: (N,) default time per name, inf if alive at T
        name_types: (N,) type index per name
        ell: (N, r) left factors per name
        beta: (N, r) contagion coefficients per name
        grid: Time grid
        n_types: Number of types
        type_beta: Optional (n_types, r) beta_C per type (default: per-type mean of `beta`)

    Returns:
        (D, D_by_type, L, Q_by_type) on the grid
    """
    N = len(default_times)
    defaulted = (default_times[None, :] <= grid[:, None]).astype(float)
    D = defaulted.mean(axis=1)
    L = defaulted @ ell / N

    D_by_type = np.zeros((len(grid), n_types))
    if type_beta is None:
        type_beta = np.zeros((n_types, ell.shape[1]))
        for p in range(n_types):
            members = name_types == p
            if members.any():
                type_beta[p] = beta[members].mean(axis=0)
    for p in range(n_types):
        members = name_types == p
        if members.any():
            D_by_type[:, p] = defaulted[:, members].mean(axis=1)
    Q_by_type = L @ np.asarray(type_beta).T
    return D, D_by_type, L, Q_by_type


def _name_coefficients(config, svd, name_types):
    """Per-name (ell, beta) from the type table or from an SVD of matching dimension"""
    if svd is None:
        return config.ell_matrix()[name_types], config.beta_matrix()[name_types], config.beta_matrix()
    if svd.n != config.pool_size:
        raise MalformedConfig(f"network dimension {svd.n} does not match pool size {config.pool_size}")
    if svd.rank != config.rank:
        raise MalformedConfig(f"network rank {svd.rank} does not match config rank {config.rank}")
    return np.array(svd.ell_matrix()), np.array(svd.beta_matrix()), None


def simulate_pool(config, svd=None, trial_seed=None, dV=None, keep_history=False):
    """
    One Euler-Maruyama path of the finite pool

    Args:
        config: Validated ScenarioConfig (pool_size names)
        svd: Optional NetworkSVD giving per-name beta_C and ell
        trial_seed: Seed of the trial streams (default: first trial of the master seed)
        dV: Optional Brownian increments of V overriding the trial's own V stream
        keep_history: Record intensities and hazards at every grid point

    Returns:
        PathOutput

    Raises:
        NumericalBlowup: if an intensity leaves the guard band
    """
    controls = config.controls
    dt = controls.dt
    n_steps = controls.n_steps
    grid = controls.grid()
    N = config.pool_size
    risk = config.risk

    if trial_seed is None:
        trial_seed = trial_seeds(controls.seed, 1)[0]
    streams = TrialStreams(trial_seed)
    dv = streams.v_increments(n_steps, dt) if dV is None else np.asarray(dV, dtype=float)
    if len(dv) != n_steps:
        raise MalformedConfig(f"dV has {len(dv)} increments, grid has {n_steps} steps")

    name_types = assign_types(config, N)
    ell, beta, type_beta = _name_coefficients(config, svd, name_types)
    coefficients = IntensityCoefficients(config.types, name_types)

    threshold = np.empty(N)
    dw = np.empty((N, n_steps))
    sqrt_dt = np.sqrt(dt)
    for n, rng in enumerate(streams.name_generators(N)):
        threshold[n] = rng.standard_exponential()
        dw[n] = sqrt_dt * rng.standard_normal(n_steps)

    state = PoolState(
        t=0.0,
        lam=np.array([t.lambda0 for t in config.types])[name_types],
        hazard=np.zeros(N),
        threshold=threshold,
        alive=np.ones(N, dtype=bool),
        x=risk.x0,
    )
    default_times = np.full(N, np.inf)
    X = np.empty(n_steps + 1)
    X[0] = state.x
    min_intensity = float(state.lam.min())
    moment_sums = np.array([state.lam.sum(), (state.lam ** 2).sum()]) / N
    history = None
    if keep_history:
        history = {"lambda": np.empty((n_steps + 1, N)), "hazard": np.empty((n_steps + 1, N))}
        history["lambda"][0] = state.lam
        history["hazard"][0] = state.hazard

    for step in range(n_steps):
        x_next, dx = cir_step(state.x, dv[step], risk, dt)
        alive = state.alive

        state.hazard[alive] += state.lam[alive] * dt
        stepped = intensity_step(state.lam, coefficients, dw[:, step], dx, dt)
        state.lam = np.where(alive, stepped, state.lam)

        newly = alive & (state.hazard >= state.threshold)
        state.t = grid[step + 1]
        state.x = x_next
        if newly.any():
            default_times[newly] = state.t
            state.alive = alive & ~newly
            loss = ell[newly].sum(axis=0) / N
            # signed low-rank networks can push a jump below zero
            jumped = state.lam[state.alive] + beta[state.alive] @ loss
            state.lam[state.alive] = np.maximum(jumped, 0.0)

        survivors = state.lam[state.alive]
        try:
            check_guard(survivors, controls.particle_guard, "particle intensity")
        except NumericalBlowup:
            logger.error(f"Intensity blow-up at t={state.t:.4f} in trial {trial_seed}")
            raise
        if survivors.size:
            min_intensity = min(min_intensity, float(survivors.min()))
        moment_sums += np.array([survivors.sum(), (survivors ** 2).sum()]) / N
        X[step + 1] = state.x
        if keep_history:
            history["lambda"][step + 1] = state.lam
            history["hazard"][step + 1] = state.hazard

    D, D_by_type, L, Q_by_type = portfolio_stats(default_times, name_types, ell, beta, grid, config.n_types, type_beta)
    return PathOutput(
        t=grid,
        D=D,
        D_by_type=D_by_type,
        L=L,
        Q_by_type=Q_by_type,
        X=X,
        default_times=default_times,
        name_types=name_types,
        labels=config.labels(),
        min_intensity=min_intensity,
        intensity_moments=tuple(float(m) for m in moment_sums / (n_steps + 1)),
        history=history,
    )


@dataclass
class PoolEnsemble:
    """Cross-trial summary of particle runs"""

    t: np.ndarray
    D_T: np.ndarray
    D_T_by_type: np.ndarray
    mean_D: np.ndarray
    mean_D_by_type: np.ndarray
    mean_L: np.ndarray
    mean_Q_by_type: np.ndarray
    mean_X: np.ndarray
    labels: list
    first_path: PathOutput
    min_intensity: float
    runtime: float

    @property
    def trials(self):
        return len(self.D_T)

    def mean_frame(self):
        return curves_frame(self.t, self.mean_D, self.mean_D_by_type, self.mean_L, self.mean_Q_by_type, self.mean_X, self.labels)

    def summary(self):
        return {
            "trials": self.trials,
            "mean_D_T": float(self.D_T.mean()),
            "var_D_T": float(self.D_T.var()),
            "mean_D_T_by_type": dict(zip(self.labels, self.D_T_by_type.mean(axis=0).tolist())),
            "min_intensity": self.min_intensity,
            "runtime": self.runtime,
        }


def run_pool_trials(config, svd=None, threads=1, seeds=None):
    """
    Independent particle trials with running means

    Args:
        config: Validated ScenarioConfig
        svd: Optional NetworkSVD for per-name coefficients
        threads: Worker threads; results do not depend on it
        seeds: Trial seeds (default: derived from controls.seed and controls.trials)

    Returns:
        PoolEnsemble
    """
    start = time.time()
    seeds = trial_seeds(config.controls.seed, config.controls.trials) if seeds is None else list(seeds)
    logger.info(f"Running {len(seeds)} pool trials with N={config.pool_size} on {threads} thread(s)")

    D_T = np.empty(len(seeds))
    D_T_by_type = np.empty((len(seeds), config.n_types))
    sums = None
    first = None
    min_intensity = np.inf
    for index, path in map_trials(lambda seed: simulate_pool(config, svd, seed), seeds, threads):
        if first is None:
            first = path
            sums = [np.zeros_like(path.D), np.zeros_like(path.D_by_type), np.zeros_like(path.L),
                    np.zeros_like(path.Q_by_type), np.zeros_like(path.X)]
        for total, values in zip(sums, (path.D, path.D_by_type, path.L, path.Q_by_type, path.X)):
            total += values
        D_T[index] = path.D_T
        D_T_by_type[index] = path.D_by_type[-1]
        min_intensity = min(min_intensity, path.min_intensity)

    count = len(seeds)
    return PoolEnsemble(
        t=first.t,
        D_T=D_T,
        D_T_by_type=D_T_by_type,
        mean_D=sums[0] / count,
        mean_D_by_type=sums[1] / count,
        mean_L=sums[2] / count,
        mean_Q_by_type=sums[3] / count,
        mean_X=sums[4] / count,
        labels=config.labels(),
        first_path=first,
        min_intensity=float(min_intensity),
        runtime=time.time() - start,
    )
