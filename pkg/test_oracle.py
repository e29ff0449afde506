"""
Tests for the weighted-particle limit and the Jacobi singular value check
"""
import math
import os
import sys
import unittest
from dataclasses import replace

import numpy as np

# Add the project root to the path
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from default_contagion.errors import MalformedConfig, NonConvergence
from default_contagion.model import AffineDrift, NameType, PolynomialDrift, ScenarioConfig, SolverControls, SystematicRisk
from default_contagion.scenarios import load_scenario
from default_contagion.simulation.dynamics import cir_step
from default_contagion.simulation.meanfield import solve_trial
from default_contagion.simulation.oracle import jacobi_singular_values, mv_solve
from default_contagion.utils.streams import TrialStreams


def oracle_config(**type_overrides):
    params = dict(sigma=0.9, drift=AffineDrift(4.0, 0.2), beta_S=2.0, beta_C=(1.0,), ell=(0.1,),
                  lambda0=0.2, weight=1.0, label="p1")
    params.update(type_overrides)
    return ScenarioConfig(
        types=(NameType(**params),),
        risk=SystematicRisk(kappa=4.0, theta=0.5, eps=0.5, x0=0.2),
        controls=SolverControls(enforce_assumptions=False),
        pool_size=1000,
    )


class TestWeightedParticles(unittest.TestCase):
    """Test the weighted McKean-Vlasov particle cloud"""

    def test_killed_exponential(self):
        config = oracle_config(sigma=0.0, beta_S=0.0, beta_C=(0.0,), drift=AffineDrift(1.0, 0.3), lambda0=0.3)
        path = mv_solve(config, trial_seed=1, M=100)
        np.testing.assert_allclose(path.D, 1.0 - np.exp(-0.3 * path.t), atol=1e-12)

    def test_weights(self):
        path = mv_solve(load_scenario("one_cluster").config, trial_seed=4, M=500)
        self.assertTrue(path.weights_nonincreasing)
        self.assertTrue(np.all(path.u0 > 0.0))
        self.assertTrue(np.all(path.u0 <= 1.0))
        self.assertGreaterEqual(path.min_intensity, 0.0)

    def test_no_contagion_matches_hand_integration(self):
        config = oracle_config(beta_C=(0.0,))
        controls = config.controls
        seed = 31
        path = mv_solve(config, trial_seed=seed, M=200)

        streams = TrialStreams(seed)
        dv = streams.v_increments(controls.n_steps, controls.dt)
        rng = streams.cloud_rng()
        lam = np.full(200, 0.2)
        hazard = np.zeros(200)
        x = config.risk.x0
        for step in range(controls.n_steps):
            x, dx = cir_step(x, dv[step], config.risk, controls.dt)
            hazard += lam * controls.dt
            dw = math.sqrt(controls.dt) * rng.standard_normal(200)
            lam = np.maximum(lam - 4.0 * (lam - 0.2) * controls.dt + 0.9 * np.sqrt(lam) * dw + 2.0 * lam * dx, 0.0)
        self.assertAlmostEqual(path.D_T, 1.0 - np.exp(-hazard).mean(), delta=1e-12)

    def test_agrees_with_moment_hierarchy_on_bundled_scenarios(self):
        for name in ("one_cluster", "two_cluster", "two_cluster_rank1", "core_periphery_one", "core_periphery_two"):
            with self.subTest(scenario=name):
                config = load_scenario(name).config
                oracle = mv_solve(config, trial_seed=2019, M=100000)
                moments = solve_trial(config, trial_seed=2019)
                self.assertLessEqual(np.max(np.abs(oracle.D - moments.D)), 2e-3)

    def test_without_common_noise(self):
        config = load_scenario("one_cluster").config
        config = replace(config, risk=replace(config.risk, eps=0.0),
                         types=tuple(replace(t, beta_S=0.0) for t in config.types))
        first = solve_trial(config, trial_seed=1)
        second = solve_trial(config, trial_seed=2)
        np.testing.assert_array_equal(first.D, second.D)
        oracle = mv_solve(config, trial_seed=1, M=100000)
        self.assertLessEqual(np.max(np.abs(oracle.D - first.D)), 1e-3)

    def test_models_outside_the_moment_hierarchy(self):
        for overrides in ({"drift": PolynomialDrift((0.1, 1.0, 0.0, -1.0))}, {"rho": 0.75}):
            path = mv_solve(oracle_config(**overrides), trial_seed=8, M=1000)
            self.assertTrue(np.all(np.isfinite(path.D)))
            self.assertTrue(np.all(np.diff(path.D) >= -1e-15))
            self.assertLess(path.D_T, 1.0)

    def test_too_few_particles(self):
        with self.assertRaises(MalformedConfig):
            mv_solve(oracle_config(), M=50)

    def test_picard_diagnostic(self):
        path = mv_solve(load_scenario("one_cluster").config, trial_seed=12, M=1000, picard_iterations=5)
        residuals = path.picard_residuals
        self.assertGreaterEqual(len(residuals), 1)
        self.assertLessEqual(len(residuals), 5)
        for earlier, later in zip(residuals, residuals[1:]):
            self.assertLessEqual(later, earlier)
        self.assertLess(path.picard_distance, 1e-5)

    def test_dv_override(self):
        config = oracle_config()
        dv = TrialStreams(3).v_increments(config.controls.n_steps, config.controls.dt)
        np.testing.assert_array_equal(mv_solve(config, trial_seed=3, M=100).X,
                                      mv_solve(config, trial_seed=3, M=100, dV=dv).X)
        with self.assertRaises(MalformedConfig):
            mv_solve(config, M=100, dV=dv[:10])


class TestJacobi(unittest.TestCase):
    """Test the independent singular value routine"""

    def test_diagonal(self):
        np.testing.assert_allclose(jacobi_singular_values(np.diag([3.0, 1.0, 2.0])), [3.0, 2.0, 1.0])

    def test_matches_lapack(self):
        values = np.random.default_rng(5).normal(size=(6, 6))
        np.testing.assert_allclose(jacobi_singular_values(values), np.linalg.svd(values, compute_uv=False), atol=1e-10)

    def test_zero_matrix(self):
        np.testing.assert_array_equal(jacobi_singular_values(np.zeros((3, 3))), np.zeros(3))

    def test_sweep_cap(self):
        with self.assertRaises(NonConvergence):
            jacobi_singular_values(np.array([[1.0, 2.0], [3.0, 4.0]]), max_sweeps=0)


if __name__ == "__main__":
    unittest.main()
