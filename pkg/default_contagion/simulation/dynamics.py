"""
Euler kernels shared by the particle pool and the weighted-particle oracle
"""
import numpy as np

from default_contagion.errors import NumericalBlowup
from default_contagion.model import AffineDrift


def cir_step(x, dv, risk, dt):
    """
    Full-truncation Euler step of the systematic factor

    Args:
        x: Current X (>= 0)
        dv: Brownian increment
        risk: SystematicRisk
        dt: Step size

    Returns:
        (x_next, dx) where x_next = max(x + dx, 0) and dx drives beta_S * lambda * dX
    """
    x_pos = max(x, 0.0)
    dx = risk.kappa * (risk.theta - x_pos) * dt + risk.eps * np.sqrt(x_pos) * dv
    return max(x + dx, 0.0), dx


def factor_path(risk, dv, dt):
    """
    X on the whole grid plus the increments dX fed to the intensities

    Returns:
        (x, dx) with len(x) == len(dv) + 1
    """
    x = np.empty(len(dv) + 1)
    dx = np.empty(len(dv))
    x[0] = risk.x0
    for step, increment in enumerate(dv):
        x[step + 1], dx[step] = cir_step(x[step], increment, risk, dt)
    return x, dx


class IntensityCoefficients:
    """
    Per-particle coefficient arrays gathered from the type table

    Args:
        types: Sequence of NameType
        type_index: Integer array, type of every particle
    """

    def __init__(self, types, type_index):
        self.types = tuple(types)
        self.type_index = np.asarray(type_index, dtype=int)
        self.sigma = np.array([t.sigma for t in self.types])[self.type_index]
        self.beta_S = np.array([t.beta_S for t in self.types])[self.type_index]
        self.rho = np.array([t.rho for t in self.types])[self.type_index]
        self.all_affine = all(isinstance(t.drift, AffineDrift) for t in self.types)
        self.all_half = bool(np.all(self.rho == 0.5))
        if self.all_affine:
            self.alpha_bar = np.array([t.drift.alpha_bar for t in self.types])[self.type_index]
            self.lambda_bar = np.array([t.drift.lambda_bar for t in self.types])[self.type_index]
        self._masks = [(p, self.type_index == p) for p in range(len(self.types))]

    def subset(self, mask):
        """Coefficients for the particles selected by `mask`"""
        return IntensityCoefficients(self.types, self.type_index[mask])

    def drift(self, lam):
        if self.all_affine:
            return -self.alpha_bar * (lam - self.lambda_bar)
        out = np.empty_like(lam)
        for p, mask in self._masks:
            if mask.any():
                out[mask] = self.types[p].drift.evaluate(lam[mask])
        return out

    def diffusion(self, lam):
        lam_pos = np.maximum(lam, 0.0)
        if self.all_half:
            return self.sigma * np.sqrt(lam_pos)
        return self.sigma * lam_pos ** self.rho


def intensity_step(lam, coefficients, dw, dx, dt, extra_drift=None):
    """
    dlambda = b(lambda) dt + sigma (lambda v 0)^rho dW + beta_S lambda dX (+ extra_drift dt), floored at 0

    Args:
        lam: Intensities
        coefficients: IntensityCoefficients matching `lam`
        dw: Idiosyncratic increments
        dx: Systematic factor increment of the step
        dt: Step size
        extra_drift: Optional additional drift (the oracle's beta_C . Q)

    Returns:
        New intensity array
    """
    drift = coefficients.drift(lam)
    if extra_drift is not None:
        drift = drift + extra_drift
    step = drift * dt + coefficients.diffusion(lam) * dw + coefficients.beta_S * lam * dx
    return np.maximum(lam + step, 0.0)


def check_guard(values, guard, what):
    """
    Raise NumericalBlowup if any value is non-finite or exceeds the guard in magnitude
    """
    if not np.all(np.isfinite(values)):
        raise NumericalBlowup(f"{what} became non-finite")
    largest = float(np.max(np.abs(values))) if np.size(values) else 0.0
    if largest > guard:
        raise NumericalBlowup(f"{what} reached {largest:.6g}, above guard {guard:.6g}; reduce dt")
