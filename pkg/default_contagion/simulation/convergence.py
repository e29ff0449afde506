"""
Law-of-large-numbers harness: finite pools against the limit under a shared V path
"""
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from default_contagion.errors import MalformedConfig, UnsupportedModel
from default_contagion.simulation.meanfield import MomentSystem, solve_trial
from default_contagion.simulation.oracle import mv_solve
from default_contagion.simulation.particle import simulate_pool
from default_contagion.utils.logger import logger
from default_contagion.utils.streams import map_trials, trial_seeds


@dataclass
class ConvergenceReport:
    n_list: List[int]
    rms_error: List[float]
    binomial_reference: List[float]
    intensity_moments: List[Tuple[float, float]]
    slope: Optional[float]
    slope_band: Optional[Tuple[float, float]]
    monotone: bool
    limit_engine: str
    trials: int
    runtime: float

    def to_dict(self):
        return {
            "N": self.n_list,
            "rms_error": self.rms_error,
            "binomial_reference": self.binomial_reference,
            "intensity_moments": [list(m) for m in self.intensity_moments],
            "slope": self.slope,
            "confidence_band": list(self.slope_band) if self.slope_band else None,
            "monotone": self.monotone,
            "limit_engine": self.limit_engine,
            "trials": self.trials,
            "runtime": self.runtime,
        }


def _limit_solver(config, M):
    """Moment hierarchy when the model allows it, weighted particles otherwise"""
    try:
        system = MomentSystem.from_config(config)
        return "meanfield", lambda seed: solve_trial(config, seed, system=system).D_T
    except UnsupportedModel:
        return "oracle", lambda seed: mv_solve(config, seed, M=M).D_T


def fit_slope(n_list, rms_error, confidence=0.95):
    """
    Least-squares slope of log(rms) against log(N) with a t-based confidence band

    Returns:
        (slope, (low, high)); the band is None with fewer than three points
    """
    if len(n_list) < 2:
        return None, None
    fit = stats.linregress(np.log(n_list), np.log(rms_error))
    if len(n_list) < 3:
        return float(fit.slope), None
    half = stats.t.ppf(0.5 + confidence / 2, len(n_list) - 2) * fit.stderr
    return float(fit.slope), (float(fit.slope - half), float(fit.slope + half))


def lln_harness(config, n_list, trials=None, threads=1, M=None):
    """
    RMS over trials of |D_T^N - D_T| for each pool size N

    Every trial seed drives the limit solver and every pool size with the same V path, so
    the difference isolates idiosyncratic sampling and discretization error.

    Args:
        config: Validated ScenarioConfig
        n_list: Ascending pool sizes
        trials: Trials per N (default: controls.trials)
        threads: Worker threads
        M: Oracle particles per type when the moment solver does not apply

    Returns:
        ConvergenceReport
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise MalformedConfig(f"N list must be nonempty and strictly ascending, got {n_list}")
    trials = config.controls.trials if trials is None else int(trials)
    if trials < 1:
        raise MalformedConfig("trials must be >= 1")

    start = time.time()
    engine, limit = _limit_solver(config, M)
    pools = [config.with_overrides(pool_size=n) for n in n_list]
    seeds = trial_seeds(config.controls.seed, trials)
    logger.info(f"LLN harness: N={n_list}, {trials} trials, limit engine {engine}")

    def run(seed):
        D_limit = limit(seed)
        paths = [simulate_pool(pool, trial_seed=seed) for pool in pools]
        return D_limit, [p.D_T for p in paths], [p.intensity_moments for p in paths]

    D_limit = np.empty(trials)
    D_pool = np.empty((trials, len(n_list)))
    moments = np.zeros((len(n_list), 2))
    for index, (d_lim, d_pool, m) in map_trials(run, seeds, threads):
        D_limit[index] = d_lim
        D_pool[index] = d_pool
        moments += np.array(m)

    rms = np.sqrt(np.mean((D_pool - D_limit[:, None]) ** 2, axis=0))
    binomial = [float(np.sqrt(np.mean(D_limit * (1 - D_limit)) / n)) for n in n_list]
    slope, band = fit_slope(n_list, rms) if np.all(rms > 0) else (None, None)

    report = ConvergenceReport(
        n_list=n_list,
        rms_error=rms.tolist(),
        binomial_reference=binomial,
        intensity_moments=[tuple(row) for row in (moments / trials).tolist()],
        slope=slope,
        slope_band=band,
        monotone=bool(np.all(np.diff(rms) < 0)),
        limit_engine=engine,
        trials=trials,
        runtime=time.time() - start,
    )
    logger.info(f"LLN harness done: rms {['%.5f' % e for e in report.rms_error]}, slope {slope}")
    return report
