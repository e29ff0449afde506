"""
Large-pool limit through the truncated moment hierarchy

For affine drift and rho = 1/2 the moments u_k(t, p) = int lambda^k v(t, p, lambda) dlambda of
the surviving-intensity density of type p satisfy a linear SDE system driven by the common
Brownian motion V, coupled across types only through Q_j(t) = sum_p w_p ell_j(p) u_1(t, p).
The hierarchy is cut at K with u_{K+1} supplied by the closure rule.
"""
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from default_contagion.config import OUTPUT_SETTINGS, SOLVER_SETTINGS
from default_contagion.errors import MalformedConfig, NumericalBlowup, UnsupportedModel
from default_contagion.model import AffineDrift
from default_contagion.simulation.dynamics import check_guard, cir_step
from default_contagion.utils.logger import log_incident, logger
from default_contagion.utils.output import curves_frame, histogram_frame
from default_contagion.utils.streams import TrialStreams, map_trials, trial_seeds


@dataclass(frozen=True)
class MomentSystem:
    """Per-type coefficient arrays of the hierarchy, built once per config"""

    risk: object
    weight: np.ndarray
    alpha_bar: np.ndarray
    lambda_bar: np.ndarray
    sigma: np.ndarray
    beta_S: np.ndarray
    lambda0: np.ndarray
    ell: np.ndarray
    beta: np.ndarray
    moment_cap: int
    closure_rule: str
    guard: float
    negative_tol: float = SOLVER_SETTINGS["negative_moment_tol"]

    @classmethod
    def from_config(cls, config):
        """
        Raises:
            UnsupportedModel: for non-affine drift or rho != 1/2
        """
        for label, name_type in zip(config.labels(), config.types):
            if not isinstance(name_type.drift, AffineDrift):
                raise UnsupportedModel(f"type {label}: the moment solver needs affine drift")
            if name_type.rho != 0.5:
                raise UnsupportedModel(f"type {label}: the moment solver needs rho = 1/2, got {name_type.rho}")
        types = config.types
        controls = config.controls
        return cls(
            risk=config.risk,
            weight=config.weights(),
            alpha_bar=np.array([t.drift.alpha_bar for t in types]),
            lambda_bar=np.array([t.drift.lambda_bar for t in types]),
            sigma=np.array([t.sigma for t in types]),
            beta_S=np.array([t.beta_S for t in types]),
            lambda0=np.array([t.lambda0 for t in types]),
            ell=config.ell_matrix(),
            beta=config.beta_matrix(),
            moment_cap=controls.moment_cap,
            closure_rule=controls.closure_rule,
            guard=controls.moment_guard,
        )

    @property
    def orders(self):
        """k = 1..K as a row vector"""
        return np.arange(1, self.moment_cap + 1, dtype=float)[None, :]


@dataclass(frozen=True)
class MomentState:
    u: np.ndarray
    t: float
    x: float
    clamps: int = 0


def initial_state(system):
    """Point mass at lambda0: u_k(0) = lambda0^k"""
    u = system.lambda0[:, None] ** np.arange(system.moment_cap + 1)[None, :]
    return MomentState(u=u, t=0.0, x=system.risk.x0)


def coupling_Q(state, system):
    """Q_j = sum_p w_p ell_j(p) u_1(p)"""
    return (system.weight * state.u[:, 1]) @ system.ell


def moment_levels(u):
    """
    Intensity scale |u_k|^(1/k) implied by each moment of order k >= 1

    Args:
        u: (types, K+1) moments u_0..u_K

    Returns:
        (types, K) array
    """
    orders = np.arange(1, u.shape[1], dtype=float)
    return np.abs(u[:, 1:]) ** (1.0 / orders)[None, :]


def step_moments(state, dV, dt, system):
    """
    One Euler step of the moment hierarchy and of X under the same dV

    Args:
        state: MomentState at the step start
        dV: Brownian increment of the common factor
        dt: Step size
        system: MomentSystem

    Returns:
        MomentState at t + dt

    Raises:
        NumericalBlowup: if a moment level |u_k|^(1/k) leaves the guard band
    """
    risk = system.risk
    x_pos = max(state.x, 0.0)
    b0 = risk.kappa * (risk.theta - x_pos)
    s0 = risk.eps * np.sqrt(x_pos)

    k = system.orders
    u = state.u
    u_k = u[:, 1:]
    u_prev = u[:, :-1]
    if system.closure_rule == "copy_last":
        closure = u[:, -1:]
    else:
        closure = np.zeros((u.shape[0], 1))
    u_next = np.hstack([u[:, 2:], closure])

    alpha = system.alpha_bar[:, None]
    beta_S = system.beta_S[:, None]
    contagion = (system.beta @ coupling_Q(state, system))[:, None]

    drift = (
        k * (-alpha + beta_S * b0) * u_k
        + 0.5 * beta_S ** 2 * s0 ** 2 * k * (k - 1) * u_k
        + (0.5 * system.sigma[:, None] ** 2 * k * (k - 1) + alpha * system.lambda_bar[:, None] * k + k * contagion) * u_prev
        - u_next
    )
    diffusion = beta_S * s0 * k * u_k

    new_u = np.empty_like(u)
    new_u[:, 0] = u[:, 0] - u[:, 1] * dt
    new_u[:, 1:] = u_k + drift * dt + diffusion * dV

    negative = new_u < -system.negative_tol
    clamps = int(negative.sum())
    if clamps:
        new_u[negative] = 0.0
    check_guard(moment_levels(new_u), system.guard, "moment level")

    x_next, _ = cir_step(state.x, dV, risk, dt)
    return MomentState(u=new_u, t=state.t + dt, x=x_next, clamps=state.clamps + clamps)


def _dominance_pairs(beta):
    """(p, q) with beta[p] >= beta[q] componentwise and beta[p] != beta[q]"""
    pairs = []
    for p in range(len(beta)):
        for q in range(len(beta)):
            if p != q and np.all(beta[p] >= beta[q]) and np.any(beta[p] > beta[q]):
                pairs.append((p, q))
    return pairs


@dataclass
class MeanFieldPath:
    """One trial of the limit: curves on the grid plus solver diagnostics"""

    t: np.ndarray
    D: np.ndarray
    D_by_type: np.ndarray
    L: np.ndarray
    Q_by_type: np.ndarray
    X: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    labels: list
    clamps: int = 0
    ordering_violations: int = 0
    min_moment: float = 0.0

    @property
    def D_T(self):
        return float(self.D[-1])

    def to_frame(self):
        return curves_frame(self.t, self.D, self.D_by_type, self.L, self.Q_by_type, self.X, self.labels)


def limit_statistics(u0, weight, ell, beta):
    """
    Loss statistics from the survival masses u_0

    Args:
        u0: (steps+1, types) survival mass per type
        weight: (types,) type weights
        ell: (types, r)
        beta: (types, r)

    Returns:
        (D, D_by_type, L, Q_by_type) with L = ell_bar - sum_p w_p ell(p) u_0(p)
    """
    D = 1.0 - u0 @ weight
    D_by_type = 1.0 - u0
    ell_bar = weight @ ell
    L = ell_bar[None, :] - (u0 * weight[None, :]) @ ell
    Q_by_type = L @ beta.T
    return D, D_by_type, L, Q_by_type


def solve_trial(config, trial_seed=None, dV=None, system=None):
    """
    Integrate the hierarchy along one V path

    Args:
        config: Validated ScenarioConfig
        trial_seed: Seed of the trial streams (default: first trial of the master seed)
        dV: Optional increments overriding the trial's V stream
        system: Prebuilt MomentSystem (built from config if omitted)

    Returns:
        MeanFieldPath
    """
    system = system or MomentSystem.from_config(config)
    controls = config.controls
    n_steps = controls.n_steps
    grid = controls.grid()
    if trial_seed is None:
        trial_seed = trial_seeds(controls.seed, 1)[0]
    dv = TrialStreams(trial_seed).v_increments(n_steps, controls.dt) if dV is None else np.asarray(dV, dtype=float)
    if len(dv) != n_steps:
        raise MalformedConfig(f"dV has {len(dv)} increments, grid has {n_steps} steps")

    state = initial_state(system)
    u0 = np.empty((n_steps + 1, config.n_types))
    u1 = np.empty((n_steps + 1, config.n_types))
    X = np.empty(n_steps + 1)
    u0[0], u1[0], X[0] = state.u[:, 0], state.u[:, 1], state.x
    min_moment = float(state.u.min())

    for step in range(n_steps):
        try:
            state = step_moments(state, dv[step], controls.dt, system)
        except NumericalBlowup:
            logger.error(f"Moment blow-up at t={grid[step + 1]:.4f} in trial {trial_seed} (K={system.moment_cap}, dt={controls.dt})")
            raise
        u0[step + 1], u1[step + 1], X[step + 1] = state.u[:, 0], state.u[:, 1], state.x
        min_moment = min(min_moment, float(state.u.min()))

    D, D_by_type, L, Q_by_type = limit_statistics(u0, system.weight, system.ell, system.beta)
    violations = sum(int(np.sum(Q_by_type[:, p] < Q_by_type[:, q])) for p, q in _dominance_pairs(system.beta))
    if state.clamps:
        logger.debug(f"Trial {trial_seed}: {state.clamps} negative moments clamped")

    return MeanFieldPath(
        t=grid, D=D, D_by_type=D_by_type, L=L, Q_by_type=Q_by_type, X=X, u0=u0, u1=u1,
        labels=config.labels(), clamps=state.clamps, ordering_violations=violations, min_moment=min_moment,
    )


@dataclass
class LimitOutput:
    """Cross-trial summary of the limit"""

    t: np.ndarray
    D_T: np.ndarray
    D_T_by_type: np.ndarray
    mean_D: np.ndarray
    mean_D_by_type: np.ndarray
    mean_L: np.ndarray
    mean_Q_by_type: np.ndarray
    mean_X: np.ndarray
    labels: list
    clamps: int
    ordering_violations: int
    runtime: float
    n_equations: int = 0
    bins: int = OUTPUT_SETTINGS["histogram_bins"]
    paths: Optional[List[MeanFieldPath]] = None

    @property
    def trials(self):
        return len(self.D_T)

    def mean_frame(self):
        return curves_frame(self.t, self.mean_D, self.mean_D_by_type, self.mean_L, self.mean_Q_by_type, self.mean_X, self.labels)

    def histogram(self):
        return histogram_frame(self.D_T, self.bins)

    def summary(self):
        return {
            "trials": self.trials,
            "mean_D_T": float(self.D_T.mean()),
            "var_D_T": float(self.D_T.var()),
            "mean_D_T_by_type": dict(zip(self.labels, self.D_T_by_type.mean(axis=0).tolist())),
            "var_D_T_by_type": dict(zip(self.labels, self.D_T_by_type.var(axis=0).tolist())),
            "mean_time_average_D": float(self.mean_D.mean()),
            "clamps": self.clamps,
            "ordering_violations": self.ordering_violations,
            "runtime": self.runtime,
        }


def solve_ensemble(config, threads=1, bins=None, keep_paths=False, seeds=None):
    """
    Monte Carlo over independent V paths

    Args:
        config: Validated ScenarioConfig
        threads: Worker threads; results do not depend on it
        bins: Histogram bin count for D_T
        keep_paths: Keep every MeanFieldPath
        seeds: Trial seeds (default: derived from controls.seed and controls.trials)

    Returns:
        LimitOutput
    """
    start = time.time()
    system = MomentSystem.from_config(config)
    seeds = trial_seeds(config.controls.seed, config.controls.trials) if seeds is None else list(seeds)
    logger.info(f"Solving moment hierarchy for {len(seeds)} trials, {config.n_types} types, K={system.moment_cap}")

    D_T = np.empty(len(seeds))
    D_T_by_type = np.empty((len(seeds), config.n_types))
    sums = None
    paths = [] if keep_paths else None
    clamps = 0
    violations = 0
    for index, path in map_trials(lambda seed: solve_trial(config, seed, system=system), seeds, threads):
        curves = (path.D, path.D_by_type, path.L, path.Q_by_type, path.X)
        if sums is None:
            sums = [np.zeros_like(c) for c in curves]
        for total, values in zip(sums, curves):
            total += values
        D_T[index] = path.D_T
        D_T_by_type[index] = path.D_by_type[-1]
        clamps += path.clamps
        violations += path.ordering_violations
        if keep_paths:
            paths.append(path)

    if clamps:
        log_incident("clamp", f"{clamps} negative moments clamped to 0 over {len(seeds)} trials")
    count = len(seeds)
    return LimitOutput(
        t=config.controls.grid(),
        D_T=D_T,
        D_T_by_type=D_T_by_type,
        mean_D=sums[0] / count,
        mean_D_by_type=sums[1] / count,
        mean_L=sums[2] / count,
        mean_Q_by_type=sums[3] / count,
        mean_X=sums[4] / count,
        labels=config.labels(),
        clamps=clamps,
        ordering_violations=violations,
        runtime=time.time() - start,
        n_equations=config.n_types * (system.moment_cap + 1),
        bins=bins or OUTPUT_SETTINGS["histogram_bins"],
        paths=paths,
    )


@dataclass
class LowRankComparison:
    """Percent error of the mean impact when the network is replaced by a lower-rank one"""

    t: np.ndarray
    labels: list
    percent_error: np.ndarray
    max_percent_error: dict
    max_abs_D_difference: float
    runtime_full: float
    runtime_reduced: float
    full: LimitOutput = field(repr=False)
    reduced: LimitOutput = field(repr=False)

    @property
    def wall_clock_ratio(self):
        return self.runtime_full / self.runtime_reduced if self.runtime_reduced > 0 else float("inf")

    @property
    def equation_ratio(self):
        """Moment equations per step, full over reduced; the hardware-free cost of the full network"""
        return self.full.n_equations / self.reduced.n_equations

    @property
    def overall_max_percent_error(self):
        values = [v for v in self.max_percent_error.values() if np.isfinite(v)]
        return max(values) if values else 0.0

    def summary(self):
        return {
            "max_percent_error": self.max_percent_error,
            "overall_max_percent_error": self.overall_max_percent_error,
            "max_abs_D_difference": self.max_abs_D_difference,
            "runtime_full": self.runtime_full,
            "runtime_reduced": self.runtime_reduced,
            "wall_clock_ratio": self.wall_clock_ratio,
            "equation_ratio": self.equation_ratio,
            "mean_D_T_full": float(self.full.D_T.mean()),
            "mean_D_T_reduced": float(self.reduced.D_T.mean()),
        }


def compare_lowrank(config_full, config_reduced, threads=1, bins=None):
    """
    PE_t(p) = |Q_full,t(p) - Q_reduced,t(p)| / Q_full,t(p) on ensemble-mean curves

    Q_reduced for a type of the full config uses its first r_reduced contagion coefficients
    against the reduced model's mean cluster loss rates. Grid points with Q_full = 0 are skipped.

    Args:
        config_full: ScenarioConfig of the full network
        config_reduced: ScenarioConfig of the low-rank network, same grid, seed and trials

    Returns:
        LowRankComparison
    """
    full_controls, reduced_controls = config_full.controls, config_reduced.controls
    for name in ("t_end", "dt", "seed", "trials"):
        if getattr(full_controls, name) != getattr(reduced_controls, name):
            raise MalformedConfig(f"compared configs differ in {name}")
    if config_reduced.rank > config_full.rank:
        raise MalformedConfig("reduced config has more clusters than the full one")

    full = solve_ensemble(config_full, threads=threads, bins=bins)
    reduced = solve_ensemble(config_reduced, threads=threads, bins=bins)

    r = config_reduced.rank
    q_full = full.mean_Q_by_type
    q_reduced = reduced.mean_L[:, :r] @ config_full.beta_matrix()[:, :r].T
    with np.errstate(divide="ignore", invalid="ignore"):
        percent = np.where(q_full != 0, np.abs(q_full - q_reduced) / np.abs(q_full), np.nan)

    labels = config_full.labels()
    max_pe = {}
    for i, label in enumerate(labels):
        column = percent[:, i]
        max_pe[label] = float(np.nanmax(column)) if np.any(np.isfinite(column)) else float("nan")

    comparison = LowRankComparison(
        t=full.t,
        labels=labels,
        percent_error=percent,
        max_percent_error=max_pe,
        max_abs_D_difference=float(np.max(np.abs(full.mean_D - reduced.mean_D))),
        runtime_full=full.runtime,
        runtime_reduced=reduced.runtime,
        full=full,
        reduced=reduced,
    )
    logger.info(f"Low-rank comparison: max PE {comparison.overall_max_percent_error:.4%}, wall-clock ratio {comparison.wall_clock_ratio:.2f}")
    return comparison
