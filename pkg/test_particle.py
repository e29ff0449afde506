"""
Tests for the finite-N particle pool
"""
import math
import os
import sys
import unittest
from dataclasses import replace

import numpy as np

# Add the project root to the path
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from default_contagion.errors import MalformedConfig, NumericalBlowup
from default_contagion.model import AffineDrift, NameType, ScenarioConfig, SolverControls, SystematicRisk
from default_contagion.network import NetworkSVD
from default_contagion.scenarios import load_scenario
from default_contagion.simulation.meanfield import solve_ensemble
from default_contagion.simulation.particle import assign_types, portfolio_stats, run_pool_trials, simulate_pool
from default_contagion.utils.streams import TrialStreams, trial_seeds


def single_type_config(pool_size, sigma=0.0, beta_S=0.0, beta_C=0.0, drift=None, lambda0=0.0, eps=0.5, **controls):
    name_type = NameType(sigma=sigma, drift=drift or AffineDrift(1.0, 0.0), beta_S=beta_S, beta_C=(beta_C,),
                         ell=(0.1,), lambda0=lambda0, weight=1.0, label="p1")
    return ScenarioConfig(
        types=(name_type,),
        risk=SystematicRisk(kappa=4.0, theta=0.5, eps=eps, x0=0.2),
        controls=SolverControls(enforce_assumptions=False, **controls),
        pool_size=pool_size,
    )


class TestTypeAssignment(unittest.TestCase):
    """Test deterministic block assignment"""

    def test_equal_halves(self):
        config = load_scenario("one_cluster").config
        counts = np.bincount(assign_types(config, 1000))
        self.assertEqual(counts.tolist(), [500, 500])

    def test_rounded_boundaries(self):
        base = single_type_config(10).types[0]
        types = tuple(replace(base, weight=1 / 3, label=f"p{i}") for i in range(3))
        config = replace(single_type_config(10), types=types)
        self.assertEqual(np.bincount(assign_types(config, 10)).tolist(), [3, 4, 3])


class TestPortfolioStats(unittest.TestCase):
    """Test loss statistics against hand computation"""

    def setUp(self):
        self.grid = np.array([0.0, 0.1, 0.2, 0.3])
        self.name_types = np.array([0, 0, 1, 1])
        self.ell = np.array([[1.0], [2.0], [3.0], [4.0]])
        self.beta = np.array([[2.0], [2.0], [0.5], [0.5]])

    def test_hand_built_pool(self):
        default_times = np.array([0.1, np.inf, 0.3, 0.1])
        D, D_by_type, L, Q = portfolio_stats(default_times, self.name_types, self.ell, self.beta, self.grid, 2)
        np.testing.assert_array_equal(D, [0.0, 0.5, 0.5, 0.75])
        np.testing.assert_array_equal(L[:, 0], [0.0, 1.25, 1.25, 2.0])
        np.testing.assert_array_equal(D_by_type[-1], [0.5, 1.0])
        np.testing.assert_array_equal(Q[1], [2.5, 0.625])
        np.testing.assert_array_equal(Q[-1], [4.0, 1.0])

    def test_no_defaults(self):
        D, D_by_type, L, Q = portfolio_stats(np.full(4, np.inf), self.name_types, self.ell, self.beta, self.grid, 2)
        self.assertEqual(D.max(), 0.0)
        self.assertEqual(L.max(), 0.0)
        self.assertEqual(np.abs(Q).max(), 0.0)

    def test_all_defaulted(self):
        D, _, L, _ = portfolio_stats(np.full(4, 0.1), self.name_types, self.ell, self.beta, self.grid, 2)
        self.assertEqual(D[-1], 1.0)
        self.assertEqual(L[-1, 0], self.ell.mean())


class TestSimulatePool(unittest.TestCase):
    """Test single paths of the finite pool"""

    def setUp(self):
        self.config = load_scenario("one_cluster").config.with_overrides(pool_size=200, trials=8)

    def test_zero_intensity_pool(self):
        config = single_type_config(100)
        path = simulate_pool(config, trial_seed=1)
        self.assertEqual(path.D_T, 0.0)
        self.assertEqual(np.abs(path.Q_by_type).max(), 0.0)
        self.assertTrue(np.all(np.isinf(path.default_times)))

    def test_frozen_unit_intensity(self):
        config = single_type_config(5000, drift=AffineDrift(1.0, 1.0), lambda0=1.0)
        path = simulate_pool(config, trial_seed=trial_seeds(7, 1)[0])
        expected = 1.0 - math.exp(-1.0)
        band = 3.0 * math.sqrt(expected * (1.0 - expected) / 5000)
        self.assertAlmostEqual(path.D_T, expected, delta=band)

    def test_path_invariants(self):
        path = simulate_pool(self.config, trial_seed=123, keep_history=True)
        self.assertGreaterEqual(path.min_intensity, 0.0)
        self.assertTrue(np.all(np.diff(path.D) >= 0))
        self.assertGreaterEqual(path.D.min(), 0.0)
        self.assertLessEqual(path.D.max(), 1.0)
        self.assertTrue(np.all(np.diff(path.history["hazard"], axis=0) >= 0))
        self.assertGreaterEqual(path.history["lambda"].min(), 0.0)

        ell = self.config.ell_matrix()[path.name_types]
        for i, t in enumerate(path.t):
            expected = ell[path.default_times <= t].sum(axis=0) / self.config.pool_size
            np.testing.assert_allclose(path.L[i], expected, atol=1e-12)

    def test_defaulted_intensity_is_frozen(self):
        path = simulate_pool(self.config, trial_seed=5, keep_history=True)
        for n in np.flatnonzero(np.isfinite(path.default_times))[:10]:
            step = int(np.argmax(path.t >= path.default_times[n]))
            column = path.history["lambda"][step:, n]
            self.assertTrue(np.all(column == column[0]))

    def test_same_seed_is_bit_identical(self):
        first = simulate_pool(self.config, trial_seed=99)
        second = simulate_pool(self.config, trial_seed=99)
        np.testing.assert_array_equal(first.D, second.D)
        np.testing.assert_array_equal(first.default_times, second.default_times)

    def test_shared_v_override(self):
        dv = TrialStreams(11).v_increments(self.config.controls.n_steps, self.config.controls.dt)
        own = simulate_pool(self.config, trial_seed=11)
        forced = simulate_pool(self.config, trial_seed=42, dV=dv)
        np.testing.assert_array_equal(own.X, forced.X)
        with self.assertRaises(MalformedConfig):
            simulate_pool(self.config, trial_seed=1, dV=dv[:-1])

    def test_guard(self):
        config = replace(self.config, controls=replace(self.config.controls, particle_guard=1e-3))
        with self.assertRaises(NumericalBlowup):
            simulate_pool(config, trial_seed=1)

    def test_network_dimension_must_match(self):
        svd = NetworkSVD(np.array([1.0]), np.full((10, 1), 0.1), np.full((10, 1), 0.1))
        with self.assertRaises(MalformedConfig):
            simulate_pool(self.config, svd=svd, trial_seed=1)

    def test_per_name_network_coefficients(self):
        n = self.config.pool_size
        svd = NetworkSVD(np.array([10.0]), np.full((n, 1), 0.0316), np.full((n, 1), 0.09))
        path = simulate_pool(self.config, svd=svd, trial_seed=3)
        np.testing.assert_allclose(path.Q_by_type[:, 0], 0.9 * path.L[:, 0], atol=1e-15)


class TestPoolEnsemble(unittest.TestCase):
    """Test multi-trial runs"""

    def setUp(self):
        self.config = load_scenario("one_cluster").config.with_overrides(pool_size=200, trials=8)

    def test_thread_count_does_not_change_results(self):
        single = run_pool_trials(self.config, threads=1)
        pooled = run_pool_trials(self.config, threads=4)
        np.testing.assert_array_equal(single.D_T, pooled.D_T)
        np.testing.assert_array_equal(single.mean_D, pooled.mean_D)
        np.testing.assert_array_equal(single.mean_Q_by_type, pooled.mean_Q_by_type)

    def test_moment_bound_across_pool_sizes(self):
        seeds = trial_seeds(self.config.controls.seed, 10)
        moments = []
        for n in (250, 500, 1000, 2000):
            config = self.config.with_overrides(pool_size=n)
            paths = [simulate_pool(config, trial_seed=s) for s in seeds]
            moments.append(np.mean([p.intensity_moments for p in paths], axis=0))
        for smaller, larger in zip(moments, moments[1:]):
            self.assertTrue(np.all(larger <= 2.0 * smaller))

    def test_conditional_variance_shrinks_with_pool_size(self):
        dv = TrialStreams(2024).v_increments(self.config.controls.n_steps, self.config.controls.dt)
        seeds = trial_seeds(17, 40)
        variances = []
        for n in (250, 1000):
            config = self.config.with_overrides(pool_size=n)
            variances.append(np.var([simulate_pool(config, trial_seed=s, dV=dv).D_T for s in seeds]))
        self.assertLess(variances[1], variances[0])

    def test_matches_mean_field(self):
        config = load_scenario("one_cluster").config.with_overrides(trials=200)
        particles = run_pool_trials(config, threads=4)
        limit = solve_ensemble(config, threads=4)
        standard_error = particles.D_T.std(ddof=1) / math.sqrt(particles.trials)
        self.assertAlmostEqual(particles.D_T.mean(), limit.D_T.mean(), delta=3.0 * standard_error)


if __name__ == "__main__":
    unittest.main()
