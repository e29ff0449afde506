"""
Reproducible random streams and order-preserving parallel trial execution
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from default_contagion.config import SOLVER_SETTINGS
from default_contagion.utils.logger import logger


def trial_seeds(seed, trials):
    """
    Derive one 64-bit seed per trial from the master seed

    Args:
        seed: Master seed
        trials: Number of trials

    Returns:
        List of Python ints, identical for every caller using the same master seed
    """
    state = np.random.SeedSequence(int(seed)).generate_state(int(trials), np.uint64)
    return [int(s) for s in state]


class TrialStreams:
    """
    Child streams of one trial seed, always spawned in the same order:
    the systematic factor V, the pool names, and the oracle particle cloud
    """

    def __init__(self, trial_seed):
        self.trial_seed = int(trial_seed)
        root = np.random.SeedSequence(self.trial_seed)
        self._v, self._names, self._cloud = root.spawn(3)

    def v_increments(self, n_steps, dt):
        """Brownian increments dV for the whole grid"""
        rng = np.random.default_rng(self._v)
        return np.sqrt(dt) * rng.standard_normal(n_steps)

    def name_generator(self, n):
        """Stream of name n; it does not depend on the pool size"""
        child = np.random.SeedSequence(self._names.entropy, spawn_key=self._names.spawn_key + (int(n),))
        return np.random.default_rng(child)

    def name_generators(self, count):
        return [self.name_generator(n) for n in range(count)]

    def cloud_rng(self):
        return np.random.default_rng(self._cloud)


def map_trials(func, seeds, threads=1, chunk_size=None):
    """
    Apply `func` to every trial seed, preserving input order

    Each trial draws from its own streams, so results do not depend on `threads`.

    Args:
        func: Callable taking one trial seed
        seeds: Sequence of trial seeds
        threads: Worker threads (1 runs inline)
        chunk_size: Trials submitted per batch

    Yields:
        (index, result) in seed order
    """
    chunk_size = chunk_size or SOLVER_SETTINGS["chunk_size"]
    seeds = list(seeds)

    if threads is None or threads <= 1:
        for index, seed in enumerate(seeds):
            yield index, func(seed)
        return

    with ThreadPoolExecutor(max_workers=threads) as executor:
        for start in range(0, len(seeds), chunk_size):
            batch = seeds[start:start + chunk_size]
            for offset, result in enumerate(executor.map(func, batch)):
                yield start + offset, result
            logger.debug(f"Finished trials {start + 1}-{start + len(batch)} of {len(seeds)}")
