"""
Domain types, scenario configuration and standing-assumption checks

Every other module consumes a ScenarioConfig. Types are frozen dataclasses holding tuples,
so a validated config can be shared between threads without copying.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from default_contagion.config import SOLVER_SETTINGS, VALIDATION_SETTINGS
from default_contagion.errors import AssumptionViolation, MalformedConfig
from default_contagion.utils.logger import logger, log_incident

CLOSURE_RULES = ("copy_last", "zero")

PASS = "pass"
FAIL = "fail"
WARN = "warn"
ASSUMED = "assumed"


def _reject_unknown(data, allowed, where):
    """Raise MalformedConfig when a mapping carries keys outside `allowed`"""
    if not isinstance(data, dict):
        raise MalformedConfig(f"{where}: expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise MalformedConfig(f"{where}: unknown keys {unknown}")


def _require(data, key, where):
    if key not in data:
        raise MalformedConfig(f"{where}: missing key '{key}'")
    return data[key]


def _as_float_tuple(values, where):
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError) as e:
        raise MalformedConfig(f"{where}: expected a list of numbers ({e})")


# ---------------------------------------------------------------------------
# Drift specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineDrift:
    """b(lambda) = -alpha_bar * (lambda - lambda_bar)"""

    alpha_bar: float
    lambda_bar: float

    kind = "affine"

    def evaluate(self, lam):
        return -self.alpha_bar * (lam - self.lambda_bar)

    def to_dict(self):
        return {"kind": self.kind, "alpha_bar": self.alpha_bar, "lambda_bar": self.lambda_bar}


@dataclass(frozen=True)
class PolynomialDrift:
    """b(lambda) = c_0 + c_1 lambda + ... + c_q lambda^q"""

    coefficients: Tuple[float, ...]

    kind = "polynomial"

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def evaluate(self, lam):
        return np.polynomial.polynomial.polyval(lam, self.coefficients)

    def to_dict(self):
        return {"kind": self.kind, "coefficients": list(self.coefficients)}


DriftSpec = Union[AffineDrift, PolynomialDrift]


def drift_from_dict(data, where="drift"):
    """
    Build a DriftSpec from its JSON form

    Args:
        data: {"kind": "affine", "alpha_bar", "lambda_bar"} or {"kind": "polynomial", "coefficients"}
        where: Location used in error messages

    Returns:
        AffineDrift or PolynomialDrift
    """
    kind = _require(data, "kind", where)
    if kind == AffineDrift.kind:
        _reject_unknown(data, ("kind", "alpha_bar", "lambda_bar"), where)
        return AffineDrift(
            alpha_bar=float(_require(data, "alpha_bar", where)),
            lambda_bar=float(_require(data, "lambda_bar", where)),
        )
    if kind == PolynomialDrift.kind:
        _reject_unknown(data, ("kind", "coefficients"), where)
        coefficients = _as_float_tuple(_require(data, "coefficients", where), where)
        if len(coefficients) < 2:
            raise MalformedConfig(f"{where}: polynomial drift needs degree >= 1")
        return PolynomialDrift(coefficients=coefficients)
    raise MalformedConfig(f"{where}: unknown drift kind '{kind}'")


def is_dissipative(drift, start=None, doublings=None):
    """
    Sampled dissipativity check: lambda * b(lambda) < 0 on {K, 2K, ..., 2^d K}

    Affine drifts with alpha_bar > 0 always pass. Polynomial drifts must also have
    c_0 > 0 and a negative leading coefficient.

    Args:
        drift: DriftSpec
        start: Grid start K
        doublings: Number of doublings d

    Returns:
        True if the drift is admissible
    """
    start = VALIDATION_SETTINGS["dissipativity_start"] if start is None else start
    doublings = VALIDATION_SETTINGS["dissipativity_doublings"] if doublings is None else doublings

    if isinstance(drift, AffineDrift):
        if drift.alpha_bar <= 0 or drift.lambda_bar < 0:
            return False
    elif isinstance(drift, PolynomialDrift):
        if drift.coefficients[0] <= 0 or drift.coefficients[-1] >= 0:
            return False

    grid = start * 2.0 ** np.arange(doublings + 1)
    return bool(np.all(grid * drift.evaluate(grid) < 0))


# ---------------------------------------------------------------------------
# Types and controls
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NameType:
    """
    Per-type parameters p = (sigma, drift, beta_S, beta_C, ell, rho) with initial intensity
    lambda0 and probability mass `weight`
    """

    sigma: float
    drift: DriftSpec
    beta_S: float
    beta_C: Tuple[float, ...]
    ell: Tuple[float, ...]
    rho: float = 0.5
    lambda0: float = 0.0
    weight: float = 1.0
    label: str = ""

    def dynamics_key(self):
        """Everything that moves the intensity; ell and weight only enter through aggregates"""
        return (self.sigma, self.drift, self.beta_S, self.beta_C, self.rho, self.lambda0)

    def to_dict(self):
        return {
            "label": self.label,
            "sigma": self.sigma,
            "drift": self.drift.to_dict(),
            "beta_S": self.beta_S,
            "beta_C": list(self.beta_C),
            "ell": list(self.ell),
            "rho": self.rho,
            "lambda0": self.lambda0,
            "weight": self.weight,
        }

    @classmethod
    def from_dict(cls, data, where="type"):
        _reject_unknown(data, ("label", "sigma", "drift", "beta_S", "beta_C", "ell", "rho", "lambda0", "weight"), where)
        return cls(
            sigma=float(_require(data, "sigma", where)),
            drift=drift_from_dict(_require(data, "drift", where), f"{where}.drift"),
            beta_S=float(_require(data, "beta_S", where)),
            beta_C=_as_float_tuple(_require(data, "beta_C", where), f"{where}.beta_C"),
            ell=_as_float_tuple(_require(data, "ell", where), f"{where}.ell"),
            rho=float(data.get("rho", 0.5)),
            lambda0=float(_require(data, "lambda0", where)),
            weight=float(_require(data, "weight", where)),
            label=str(data.get("label", "")),
        )


@dataclass(frozen=True)
class SystematicRisk:
    """CIR factor dX = kappa (theta - X) dt + eps sqrt(X) dV"""

    kappa: float
    theta: float
    eps: float
    x0: float

    @property
    def feller(self):
        """2 kappa theta >= eps^2"""
        return 2.0 * self.kappa * self.theta >= self.eps ** 2

    def b0(self, x):
        return self.kappa * (self.theta - x)

    def sigma0(self, x):
        return self.eps * np.sqrt(x)

    def to_dict(self):
        return {"kappa": self.kappa, "theta": self.theta, "eps": self.eps, "x0": self.x0}

    @classmethod
    def from_dict(cls, data, where="risk"):
        _reject_unknown(data, ("kappa", "theta", "eps", "x0"), where)
        return cls(**{key: float(_require(data, key, where)) for key in ("kappa", "theta", "eps", "x0")})


@dataclass(frozen=True)
class SolverControls:
    """Time grid, truncation level, trial counts and guards"""

    t_end: float = SOLVER_SETTINGS["t_end"]
    dt: float = SOLVER_SETTINGS["dt"]
    moment_cap: int = SOLVER_SETTINGS["moment_cap"]
    trials: int = SOLVER_SETTINGS["trials"]
    seed: int = SOLVER_SETTINGS["seed"]
    closure_rule: str = SOLVER_SETTINGS["closure_rule"]
    enforce_assumptions: bool = SOLVER_SETTINGS["enforce_assumptions"]
    particle_guard: float = SOLVER_SETTINGS["particle_guard"]
    moment_guard: float = SOLVER_SETTINGS["moment_guard"]

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def grid(self):
        """Time grid {0, dt, ..., T}"""
        return self.dt * np.arange(self.n_steps + 1)

    def to_dict(self):
        return {
            "t_end": self.t_end,
            "dt": self.dt,
            "moment_cap": self.moment_cap,
            "trials": self.trials,
            "seed": self.seed,
            "closure_rule": self.closure_rule,
            "enforce_assumptions": self.enforce_assumptions,
            "particle_guard": self.particle_guard,
            "moment_guard": self.moment_guard,
        }

    @classmethod
    def from_dict(cls, data, where="controls"):
        _reject_unknown(data, cls().to_dict().keys(), where)
        defaults = cls()
        return cls(
            t_end=float(data.get("t_end", defaults.t_end)),
            dt=float(data.get("dt", defaults.dt)),
            moment_cap=int(data.get("moment_cap", defaults.moment_cap)),
            trials=int(data.get("trials", defaults.trials)),
            seed=int(data.get("seed", defaults.seed)),
            closure_rule=str(data.get("closure_rule", defaults.closure_rule)),
            enforce_assumptions=bool(data.get("enforce_assumptions", defaults.enforce_assumptions)),
            particle_guard=float(data.get("particle_guard", defaults.particle_guard)),
            moment_guard=float(data.get("moment_guard", defaults.moment_guard)),
        )


@dataclass(frozen=True)
class AssumptionBounds:
    """Constants used by the boundedness and dissipativity checks"""

    k_bdd: float = VALIDATION_SETTINGS["k_bdd"]
    sigma_lower: float = VALIDATION_SETTINGS["sigma_lower"]
    dissipativity_start: float = VALIDATION_SETTINGS["dissipativity_start"]

    def to_dict(self):
        return {"k_bdd": self.k_bdd, "sigma_lower": self.sigma_lower, "dissipativity_start": self.dissipativity_start}

    @classmethod
    def from_dict(cls, data, where="bounds"):
        _reject_unknown(data, ("k_bdd", "sigma_lower", "dissipativity_start"), where)
        defaults = cls()
        return cls(
            k_bdd=float(data.get("k_bdd", defaults.k_bdd)),
            sigma_lower=float(data.get("sigma_lower", defaults.sigma_lower)),
            dissipativity_start=float(data.get("dissipativity_start", defaults.dissipativity_start)),
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """Pool, network coefficients, systematic risk and solver controls of one experiment"""

    types: Tuple[NameType, ...]
    risk: SystematicRisk
    controls: SolverControls = field(default_factory=SolverControls)
    pool_size: int = 1000
    bounds: AssumptionBounds = field(default_factory=AssumptionBounds)

    @property
    def rank(self):
        return len(self.types[0].beta_C) if self.types else 0

    @property
    def n_types(self):
        return len(self.types)

    def weights(self):
        return np.array([t.weight for t in self.types], dtype=float)

    def ell_matrix(self):
        """(n_types, r) array of left factors"""
        return np.array([t.ell for t in self.types], dtype=float).reshape(self.n_types, self.rank)

    def beta_matrix(self):
        """(n_types, r) array of contagion coefficients"""
        return np.array([t.beta_C for t in self.types], dtype=float).reshape(self.n_types, self.rank)

    def labels(self):
        return [t.label or f"p{i + 1}" for i, t in enumerate(self.types)]

    def with_overrides(self, **overrides):
        """
        Copy with controls or pool size replaced

        Args:
            overrides: Any SolverControls field, or pool_size

        Returns:
            New ScenarioConfig
        """
        pool_size = overrides.pop("pool_size", None)
        overrides = {key: value for key, value in overrides.items() if value is not None}
        config = replace(self, controls=replace(self.controls, **overrides)) if overrides else self
        if pool_size is not None:
            config = replace(config, pool_size=int(pool_size))
        return config


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    status: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: Tuple[AssumptionCheck, ...]

    @property
    def passed(self):
        return all(check.status != FAIL for check in self.checks)

    @property
    def failures(self):
        return [check for check in self.checks if check.status == FAIL]

    @property
    def warnings(self):
        return [check for check in self.checks if check.status == WARN]

    def status(self, name):
        for check in self.checks:
            if check.name == name:
                return check.status
        raise KeyError(name)

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "status": c.status, "detail": c.detail} for c in self.checks],
        }


def _check_structure(config):
    """Raise MalformedConfig for input that cannot be interpreted at all"""
    if not config.types:
        raise MalformedConfig("at least one type is required")
    r = config.rank
    if r < 1:
        raise MalformedConfig("beta_C must have at least one component")
    for i, name_type in enumerate(config.types):
        where = f"types[{i}]"
        if len(name_type.beta_C) != r or len(name_type.ell) != r:
            raise MalformedConfig(f"{where}: beta_C and ell must both have length r={r}")
        values = (name_type.sigma, name_type.beta_S, name_type.rho, name_type.lambda0, name_type.weight) + name_type.beta_C + name_type.ell
        if not all(math.isfinite(v) for v in values):
            raise MalformedConfig(f"{where}: non-finite parameter")
        if not 0.0 < name_type.weight <= 1.0:
            raise MalformedConfig(f"{where}: weight must lie in (0, 1]")
        if name_type.lambda0 < 0:
            raise MalformedConfig(f"{where}: lambda0 must be >= 0")

    controls = config.controls
    if not controls.dt > 0:
        raise MalformedConfig("dt must be positive")
    if not controls.t_end > 0:
        raise MalformedConfig("t_end must be positive")
    steps = controls.t_end / controls.dt
    if abs(steps - round(steps)) > VALIDATION_SETTINGS["step_tol"] * max(1.0, steps):
        raise MalformedConfig(f"t_end/dt = {steps} is not an integer number of steps")
    if controls.moment_cap < 2:
        raise MalformedConfig("moment_cap K must be >= 2")
    if controls.trials < 1:
        raise MalformedConfig("trials must be >= 1")
    if controls.closure_rule not in CLOSURE_RULES:
        raise MalformedConfig(f"closure_rule must be one of {CLOSURE_RULES}")
    if controls.particle_guard <= 0 or controls.moment_guard <= 0:
        raise MalformedConfig("guards must be positive")
    if config.pool_size < 1:
        raise MalformedConfig("pool_size must be >= 1")


def validate(config):
    """
    Check the machine-checkable standing assumptions

    Args:
        config: ScenarioConfig

    Returns:
        ValidationReport with one entry per assumption (pass / fail / warn / assumed)

    Raises:
        MalformedConfig: if the config is structurally unusable
    """
    _check_structure(config)
    bounds = config.bounds
    types = config.types
    risk = config.risk
    checks = []

    total = math.fsum(t.weight for t in types)
    checks.append(AssumptionCheck(
        "type measure",
        PASS if abs(total - 1.0) <= VALIDATION_SETTINGS["weight_tol"] else FAIL,
        f"weights sum to {total!r}",
    ))

    largest = max(max((abs(t.sigma), abs(t.beta_S)) + tuple(abs(b) for b in t.beta_C) + tuple(abs(l) for l in t.ell)) for t in types)
    checks.append(AssumptionCheck(
        "coefficient bound",
        PASS if largest <= bounds.k_bdd else FAIL,
        f"largest coefficient {largest!r} vs K_bdd {bounds.k_bdd!r}",
    ))

    smallest_sigma = min(t.sigma for t in types)
    checks.append(AssumptionCheck(
        "sigma lower bound",
        PASS if smallest_sigma > 0 and smallest_sigma >= bounds.sigma_lower else FAIL,
        f"inf sigma {smallest_sigma!r} vs lower bound {bounds.sigma_lower!r}",
    ))

    bad_drifts = [i for i, t in enumerate(types) if not is_dissipative(t.drift, bounds.dissipativity_start)]
    checks.append(AssumptionCheck(
        "dissipative drift",
        PASS if not bad_drifts else FAIL,
        f"failing types {bad_drifts}" if bad_drifts else "all drifts dissipative on the sampled grid",
    ))

    bad_rho = [i for i, t in enumerate(types) if not 0.5 <= t.rho < 1.0]
    checks.append(AssumptionCheck(
        "rho in [1/2, 1)",
        PASS if not bad_rho else FAIL,
        f"failing types {bad_rho}" if bad_rho else "",
    ))

    risk_ok = risk.kappa > 0 and risk.theta > 0 and risk.eps > 0 and risk.x0 >= 0
    checks.append(AssumptionCheck(
        "systematic risk parameters",
        PASS if risk_ok else FAIL,
        f"kappa={risk.kappa!r}, theta={risk.theta!r}, eps={risk.eps!r}, x0={risk.x0!r}",
    ))
    checks.append(AssumptionCheck(
        "Feller condition",
        PASS if risk.feller else WARN,
        f"2 kappa theta = {2 * risk.kappa * risk.theta!r}, eps^2 = {risk.eps ** 2!r}",
    ))

    checks.append(AssumptionCheck("bounded sigma0 / integrable b0", ASSUMED, "integrability of X is not checked"))
    checks.append(AssumptionCheck("factor moments", ASSUMED, "moments of X are not checked"))
    checks.append(AssumptionCheck("change of measure", ASSUMED, "treated as analytic only"))

    return ValidationReport(checks=tuple(checks))


def require_valid(config):
    """
    Validate and either block or log, depending on controls.enforce_assumptions

    Args:
        config: ScenarioConfig

    Returns:
        ValidationReport

    Raises:
        AssumptionViolation: if a check fails while enforcement is on
    """
    report = validate(config)
    for check in report.warnings:
        log_incident("assumption-warning", f"{check.name}: {check.detail}")
    if not report.passed:
        names = ", ".join(check.name for check in report.failures)
        if config.controls.enforce_assumptions:
            raise AssumptionViolation(f"assumption checks failed: {names}", report)
        log_incident("relaxed", f"running despite failed checks: {names}")
    return report


# ---------------------------------------------------------------------------
# Type measures
# ---------------------------------------------------------------------------

def type_measure(config):
    """
    Discrete measure pi x Lambda0 over the configured types

    Args:
        config: ScenarioConfig

    Returns:
        List of (NameType, weight) pairs
    """
    return [(name_type, name_type.weight) for name_type in config.types]


def product_types(base, beta_marginals, ell_marginals):
    """
    Types of the product measure of independent per-cluster marginals

    Args:
        base: Dict with sigma, drift, beta_S, rho, lambda0 shared by every type
        beta_marginals: Per cluster, a list of (value, probability) for beta_C_j
        ell_marginals: Per cluster, a list of (value, probability) for ell_j

    Returns:
        Tuple of NameType, labelled "b<i1>.<i2>|l<j1>.<j2>" with 1-based atom indices
    """
    if len(beta_marginals) != len(ell_marginals):
        raise MalformedConfig("beta_C and ell marginals must cover the same clusters")
    r = len(beta_marginals)
    atoms = [list(enumerate(marginal, start=1)) for marginal in list(beta_marginals) + list(ell_marginals)]
    types = []
    for combination in itertools.product(*atoms):
        indices = [index for index, _ in combination]
        values = [float(atom[0]) for _, atom in combination]
        weight = math.prod(float(atom[1]) for _, atom in combination)
        label = "b" + ".".join(map(str, indices[:r])) + "|l" + ".".join(map(str, indices[r:]))
        types.append(NameType(
            beta_C=tuple(values[:r]),
            ell=tuple(values[r:]),
            weight=weight,
            label=label,
            **base,
        ))
    return tuple(types)


def collapse_types(types):
    """
    Merge types with identical dynamics

    Weights add and ell becomes the weight-averaged ell. The limit dynamics only see ell
    through sum(weight * ell * u), so the merged system has the same D, L and Q.

    Args:
        types: Sequence of NameType

    Returns:
        Tuple of NameType in order of first appearance
    """
    groups: Dict[tuple, List[NameType]] = {}
    for name_type in types:
        groups.setdefault(name_type.dynamics_key(), []).append(name_type)

    merged = []
    for members in groups.values():
        if len(members) == 1:
            merged.append(members[0])
            continue
        weight = math.fsum(m.weight for m in members)
        r = len(members[0].ell)
        ell = tuple(math.fsum(m.weight * m.ell[j] for m in members) / weight for j in range(r))
        label = members[0].label.split("|")[0]
        merged.append(replace(members[0], weight=weight, ell=ell, label=label))
    if len(merged) < len(types):
        logger.debug(f"Collapsed {len(types)} types into {len(merged)}")
    return tuple(merged)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

CONFIG_KEYS = ("pool_size", "risk", "controls", "bounds", "types", "product", "collapse")
PRODUCT_KEYS = ("base", "beta_C", "ell")


def to_dict(config):
    return {
        "pool_size": config.pool_size,
        "risk": config.risk.to_dict(),
        "controls": config.controls.to_dict(),
        "bounds": config.bounds.to_dict(),
        "types": [t.to_dict() for t in config.types],
    }


def _product_from_dict(data, where="product"):
    _reject_unknown(data, PRODUCT_KEYS, where)
    base_data = _require(data, "base", where)
    _reject_unknown(base_data, ("sigma", "drift", "beta_S", "rho", "lambda0"), f"{where}.base")
    base = {
        "sigma": float(_require(base_data, "sigma", f"{where}.base")),
        "drift": drift_from_dict(_require(base_data, "drift", f"{where}.base"), f"{where}.base.drift"),
        "beta_S": float(_require(base_data, "beta_S", f"{where}.base")),
        "rho": float(base_data.get("rho", 0.5)),
        "lambda0": float(_require(base_data, "lambda0", f"{where}.base")),
    }
    beta = [[(float(v), float(p)) for v, p in marginal] for marginal in _require(data, "beta_C", where)]
    ell = [[(float(v), float(p)) for v, p in marginal] for marginal in _require(data, "ell", where)]
    return product_types(base, beta, ell)


def from_dict(data):
    """
    Build a ScenarioConfig from its JSON form

    Accepts either an explicit "types" list or a "product" block of independent marginals
    (collapsed by default; set "collapse": false to keep every atom combination).

    Args:
        data: Parsed JSON object

    Returns:
        ScenarioConfig
    """
    _reject_unknown(data, CONFIG_KEYS, "scenario")
    if ("types" in data) == ("product" in data):
        raise MalformedConfig("scenario: give exactly one of 'types' or 'product'")
    if "types" in data:
        types = tuple(NameType.from_dict(t, f"types[{i}]") for i, t in enumerate(data["types"]))
    else:
        types = _product_from_dict(data["product"])
        if data.get("collapse", True):
            types = collapse_types(types)
    return ScenarioConfig(
        types=types,
        risk=SystematicRisk.from_dict(_require(data, "risk", "scenario")),
        controls=SolverControls.from_dict(data.get("controls", {})),
        pool_size=int(data.get("pool_size", 1000)),
        bounds=AssumptionBounds.from_dict(data.get("bounds", {})),
    )


def dumps(config):
    """Serialize a config to canonical JSON text"""
    return json.dumps(to_dict(config), indent=2, sort_keys=True)


def loads(text):
    """Parse JSON text into a ScenarioConfig"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedConfig(f"invalid JSON: {e}")
    return from_dict(data)
