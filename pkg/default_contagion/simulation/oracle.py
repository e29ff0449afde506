"""
Weighted McKean-Vlasov particles for the large-pool limit, and a Jacobi SVD check

Instead of killing particles at default, every particle carries its survival weight
w = exp(-int lambda* ds). Weighted empirical means over the cloud then estimate the
conditional survival measure given the common factor path, for any drift and any rho.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from default_contagion.config import NETWORK_SETTINGS, SOLVER_SETTINGS
from default_contagion.errors import MalformedConfig, NonConvergence, NumericalBlowup
from default_contagion.simulation.dynamics import IntensityCoefficients, check_guard, cir_step, intensity_step
from default_contagion.simulation.meanfield import limit_statistics
from default_contagion.utils.logger import logger
from default_contagion.utils.output import curves_frame
from default_contagion.utils.streams import TrialStreams, trial_seeds


class WeightedParticleCloud:
    """
    M particles per type, stored type by type

    Args:
        config: ScenarioConfig
        M: Particles per type
        rng: numpy Generator for the idiosyncratic noise
    """

    def __init__(self, config, M, rng):
        self.M = int(M)
        self.n_types = config.n_types
        self.type_index = np.repeat(np.arange(self.n_types), self.M)
        self.coefficients = IntensityCoefficients(config.types, self.type_index)
        self.beta = config.beta_matrix()[self.type_index]
        self.lam = np.array([t.lambda0 for t in config.types])[self.type_index]
        self.hazard = np.zeros_like(self.lam)
        self.rng = rng

    @property
    def weights(self):
        return np.exp(-self.hazard)

    def type_means(self, values):
        """Mean over the particles of each type, summed in a fixed order"""
        return values.reshape(self.n_types, self.M).mean(axis=1)

    def survival(self):
        """Per-type weighted mass, the analog of u_0"""
        return self.type_means(self.weights)

    def first_moment(self):
        """Per-type weighted mean intensity, the analog of u_1"""
        return self.type_means(self.lam * self.weights)

    def step(self, Q, dx, dt):
        """Accumulate hazard at the step start, then move the intensities with contagion drift beta_C . Q"""
        self.hazard += self.lam * dt
        dw = np.sqrt(dt) * self.rng.standard_normal(self.lam.shape[0])
        self.lam = intensity_step(self.lam, self.coefficients, dw, dx, dt, extra_drift=self.beta @ Q)


@dataclass
class OraclePath:
    t: np.ndarray
    D: np.ndarray
    D_by_type: np.ndarray
    L: np.ndarray
    Q_by_type: np.ndarray
    X: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    Q: np.ndarray
    labels: list
    min_intensity: float = 0.0
    weights_nonincreasing: bool = True
    picard_residuals: List[float] = field(default_factory=list)
    picard_distance: Optional[float] = None

    @property
    def D_T(self):
        return float(self.D[-1])

    def to_frame(self):
        return curves_frame(self.t, self.D, self.D_by_type, self.L, self.Q_by_type, self.X, self.labels)


def _propagate(config, dv, streams, M, Q_fixed=None):
    """
    Run the cloud along one V path

    With Q_fixed None, Q at each step start is measured from the cloud itself (one-pass
    propagation); otherwise the given Q path drives the contagion drift.

    Returns:
        (u0, u1, Q_measured, X, min_intensity, weights_nonincreasing)
    """
    controls = config.controls
    dt = controls.dt
    n_steps = controls.n_steps
    weight = config.weights()
    ell = config.ell_matrix()
    cloud = WeightedParticleCloud(config, M, streams.cloud_rng())

    u0 = np.empty((n_steps + 1, config.n_types))
    u1 = np.empty((n_steps + 1, config.n_types))
    Q_measured = np.empty((n_steps + 1, config.rank))
    X = np.empty(n_steps + 1)
    x = config.risk.x0
    min_intensity = float(cloud.lam.min())
    nonincreasing = True
    previous = cloud.weights

    for step in range(n_steps + 1):
        u0[step] = cloud.survival()
        u1[step] = cloud.first_moment()
        Q_measured[step] = (weight * u1[step]) @ ell
        X[step] = x
        if step == n_steps:
            break

        Q = Q_measured[step] if Q_fixed is None else Q_fixed[step]
        x_next, dx = cir_step(x, dv[step], config.risk, dt)
        cloud.step(Q, dx, dt)
        x = x_next

        check_guard(cloud.lam, controls.particle_guard, "oracle intensity")
        min_intensity = min(min_intensity, float(cloud.lam.min()))
        current = cloud.weights
        nonincreasing = nonincreasing and bool(np.all(current <= previous))
        previous = current

    return u0, u1, Q_measured, X, min_intensity, nonincreasing


def mv_solve(config, trial_seed=None, M=None, dV=None, picard_iterations=0, picard_tol=None):
    """
    Weighted-particle approximation of the limit along one V path

    Args:
        config: Validated ScenarioConfig (any drift, any rho)
        trial_seed: Seed of the trial streams (default: first trial of the master seed)
        M: Particles per type (>= 100)
        dV: Optional increments overriding the trial's V stream
        picard_iterations: Also run up to this many path-level Picard passes started from
            Q = 0 and report their residuals
        picard_tol: Sup-norm tolerance on Q between Picard passes

    Returns:
        OraclePath
    """
    M = SOLVER_SETTINGS["oracle_particles"] if M is None else int(M)
    if M < 100:
        raise MalformedConfig(f"oracle needs at least 100 particles per type, got {M}")
    picard_tol = SOLVER_SETTINGS["picard_tol"] if picard_tol is None else picard_tol
    controls = config.controls
    if trial_seed is None:
        trial_seed = trial_seeds(controls.seed, 1)[0]
    streams = TrialStreams(trial_seed)
    dv = streams.v_increments(controls.n_steps, controls.dt) if dV is None else np.asarray(dV, dtype=float)
    if len(dv) != controls.n_steps:
        raise MalformedConfig(f"dV has {len(dv)} increments, grid has {controls.n_steps} steps")

    try:
        u0, u1, Q, X, min_intensity, nonincreasing = _propagate(config, dv, streams, M)
    except NumericalBlowup:
        logger.error(f"Oracle blow-up in trial {trial_seed} with M={M}")
        raise

    residuals = []
    distance = None
    if picard_iterations:
        Q_iterate = np.zeros_like(Q)
        for _ in range(picard_iterations):
            Q_next = _propagate(config, dv, streams, M, Q_fixed=Q_iterate)[2]
            residuals.append(float(np.max(np.abs(Q_next - Q_iterate))))
            Q_iterate = Q_next
            if residuals[-1] <= picard_tol:
                break
        distance = float(np.max(np.abs(Q_iterate - Q)))
        logger.debug(f"Picard residuals {residuals}, distance to one-pass {distance:.3g}")

    D, D_by_type, L, Q_by_type = limit_statistics(u0, config.weights(), config.ell_matrix(), config.beta_matrix())
    return OraclePath(
        t=controls.grid(), D=D, D_by_type=D_by_type, L=L, Q_by_type=Q_by_type, X=X, u0=u0, u1=u1, Q=Q,
        labels=config.labels(), min_intensity=min_intensity, weights_nonincreasing=nonincreasing,
        picard_residuals=residuals, picard_distance=distance,
    )


def jacobi_singular_values(values, max_sweeps=None, tol=1e-13):
    """
    Singular values from cyclic Jacobi rotations on A^T A, independent of LAPACK's SVD

    Args:
        values: (n, n) array
        max_sweeps: Sweep cap
        tol: Relative off-diagonal tolerance

    Returns:
        Singular values in decreasing order

    Raises:
        NonConvergence: if the off-diagonal mass does not vanish within max_sweeps
    """
    max_sweeps = NETWORK_SETTINGS["jacobi_max_sweeps"] if max_sweeps is None else max_sweeps
    a = np.asarray(values, dtype=float)
    s = a.T @ a
    n = s.shape[0]
    scale = np.linalg.norm(s, "fro")
    if scale == 0:
        return np.zeros(n)

    for sweep in range(max_sweeps):
        off = np.sqrt(np.sum(s ** 2) - np.sum(np.diag(s) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if s[p, q] == 0.0:
                    continue
                theta = (s[q, q] - s[p, p]) / (2.0 * s[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                rotation = np.array([[c, sn], [-sn, c]])
                s[[p, q], :] = rotation.T @ s[[p, q], :]
                s[:, [p, q]] = s[:, [p, q]] @ rotation
    else:
        raise NonConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    eigenvalues = np.clip(np.diag(s), 0.0, None)
    return np.sort(np.sqrt(eigenvalues))[::-1]
