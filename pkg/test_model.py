"""
Tests for scenario configuration, assumption checks and type measures
"""
import math
import os
import sys
import unittest
from dataclasses import replace

# Add the project root to the path
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from default_contagion.errors import AssumptionViolation, MalformedConfig
from default_contagion.model import (
    AffineDrift, NameType, PolynomialDrift, ScenarioConfig, SolverControls, SystematicRisk,
    collapse_types, dumps, from_dict, is_dissipative, loads, product_types, require_valid,
    to_dict, type_measure, validate,
)
from default_contagion.scenarios import load_scenario


def base_type(beta, ell, weight, label="", **overrides):
    params = dict(sigma=0.9, drift=AffineDrift(4.0, 0.2), beta_S=2.0, beta_C=tuple(beta), ell=tuple(ell),
                  rho=0.5, lambda0=0.2, weight=weight, label=label)
    params.update(overrides)
    return NameType(**params)


def base_config(types=None, **controls):
    types = types or (base_type([1.2361], [0.0316], 0.5, "p1"), base_type([0.6362], [0.0316], 0.5, "p2"))
    return ScenarioConfig(
        types=tuple(types),
        risk=SystematicRisk(kappa=4.0, theta=0.5, eps=0.5, x0=0.2),
        controls=SolverControls(**controls),
        pool_size=1000,
    )


class TestValidation(unittest.TestCase):
    """Test the standing-assumption checks"""

    def setUp(self):
        self.config = base_config()

    def test_base_config_passes(self):
        report = validate(self.config)
        self.assertTrue(report.passed)
        self.assertEqual(report.status("Feller condition"), "pass")
        self.assertEqual(report.status("change of measure"), "assumed")
        self.assertEqual(report.status("bounded sigma0 / integrable b0"), "assumed")

    def test_bundled_scenarios_validate(self):
        for name in ("one_cluster", "two_cluster", "two_cluster_rank1", "core_periphery_one", "core_periphery_two"):
            scenario = load_scenario(name)
            self.assertTrue(require_valid(scenario.config).passed, name)

    def test_weights_must_sum_to_one(self):
        config = base_config(types=(base_type([1.0], [0.1], 0.5), base_type([0.5], [0.1], 0.4)))
        report = validate(config)
        self.assertEqual(report.status("type measure"), "fail")
        with self.assertRaises(AssumptionViolation) as ctx:
            require_valid(config)
        self.assertIs(ctx.exception.report.passed, False)

    def test_relaxed_enforcement_logs_instead_of_raising(self):
        config = base_config(types=(base_type([1.0], [0.1], 1.0, sigma=0.0),), enforce_assumptions=False)
        report = require_valid(config)
        self.assertFalse(report.passed)
        self.assertEqual(report.status("sigma lower bound"), "fail")

    def test_boundedness(self):
        config = base_config(types=(base_type([2000.0], [0.1], 1.0),))
        self.assertEqual(validate(config).status("coefficient bound"), "fail")

    def test_feller_violation_is_a_warning(self):
        config = replace(self.config, risk=SystematicRisk(kappa=1.0, theta=0.1, eps=1.0, x0=0.1))
        report = validate(config)
        self.assertEqual(report.status("Feller condition"), "warn")
        self.assertTrue(report.passed)

    def test_rho_range(self):
        config = base_config(types=(base_type([1.0], [0.1], 1.0, rho=0.4),))
        self.assertEqual(validate(config).status("rho in [1/2, 1)"), "fail")

    def test_drift_admissibility(self):
        self.assertTrue(is_dissipative(AffineDrift(4.0, 0.2)))
        self.assertFalse(is_dissipative(AffineDrift(-1.0, 0.2)))
        # bistable drift b(l) = 0.1 + l - l^3
        self.assertTrue(is_dissipative(PolynomialDrift((0.1, 1.0, 0.0, -1.0))))
        self.assertFalse(is_dissipative(PolynomialDrift((0.1, 1.0))))
        self.assertFalse(is_dissipative(PolynomialDrift((-0.1, 0.0, -1.0))))

    def test_structural_errors(self):
        with self.assertRaises(MalformedConfig):
            validate(base_config(types=(base_type([1.0, 2.0], [0.1], 1.0),)))
        with self.assertRaises(MalformedConfig):
            validate(base_config(t_end=1.0, dt=0.03))
        with self.assertRaises(MalformedConfig):
            validate(base_config(trials=0))
        with self.assertRaises(MalformedConfig):
            validate(base_config(closure_rule="mirror"))
        with self.assertRaises(MalformedConfig):
            validate(base_config(moment_cap=1))
        with self.assertRaises(MalformedConfig):
            validate(base_config(types=(base_type([1.0], [0.1], 1.0, lambda0=-0.1),)))


class TestSerialization(unittest.TestCase):
    """Test JSON round trips"""

    def test_round_trip_identity(self):
        polynomial = base_config(types=(base_type([1.0], [0.1], 1.0, drift=PolynomialDrift((0.1, 1.0, 0.0, -1.0)), rho=0.75),))
        configs = [base_config(), load_scenario("core_periphery_two").config, polynomial]
        for config in configs:
            text = dumps(config)
            self.assertEqual(loads(text), config)
            self.assertEqual(dumps(loads(text)), text)

    def test_unknown_keys_rejected(self):
        data = to_dict(base_config())
        data["volatility"] = 1.0
        with self.assertRaises(MalformedConfig):
            from_dict(data)
        data = to_dict(base_config())
        data["types"][0]["colour"] = "red"
        with self.assertRaises(MalformedConfig):
            from_dict(data)

    def test_types_and_product_are_exclusive(self):
        data = to_dict(base_config())
        data["product"] = {}
        with self.assertRaises(MalformedConfig):
            from_dict(data)

    def test_invalid_json(self):
        with self.assertRaises(MalformedConfig):
            loads("{not json")

    def test_with_overrides(self):
        config = base_config().with_overrides(trials=7, seed=None, pool_size=250)
        self.assertEqual(config.controls.trials, 7)
        self.assertEqual(config.controls.seed, base_config().controls.seed)
        self.assertEqual(config.pool_size, 250)


class TestTypeMeasures(unittest.TestCase):
    """Test product measures and type collapsing"""

    def setUp(self):
        self.base = dict(sigma=0.9, drift=AffineDrift(4.0, 0.2), beta_S=2.0, rho=0.5, lambda0=0.2)
        self.beta = [[(0.2050, 0.5), (0.3980, 0.5)], [(0.0009, 2 / 3), (0.0022, 1 / 3)]]
        self.ell = [[(0.0316, 1.0)], [(0.0043, 0.5), (-0.0022, 0.5)]]

    def test_product_types(self):
        types = product_types(self.base, self.beta, self.ell)
        self.assertEqual(len(types), 8)
        self.assertAlmostEqual(math.fsum(t.weight for t in types), 1.0, places=12)
        self.assertEqual(types[0].label, "b1.1|l1.1")
        self.assertEqual(types[0].beta_C, (0.2050, 0.0009))
        self.assertAlmostEqual(types[0].weight, 0.5 * 2 / 3 * 0.5, places=15)

    def test_collapse_preserves_weighted_ell(self):
        types = product_types(self.base, self.beta, self.ell)
        collapsed = collapse_types(types)
        self.assertEqual(len(collapsed), 4)
        self.assertEqual(collapsed[0].label, "b1.1")
        for j in range(2):
            before = math.fsum(t.weight * t.ell[j] for t in types)
            after = math.fsum(t.weight * t.ell[j] for t in collapsed)
            self.assertAlmostEqual(before, after, places=15)
        self.assertAlmostEqual(collapsed[0].ell[1], 0.00105, places=15)

    def test_collapse_keeps_distinct_types(self):
        config = base_config()
        self.assertEqual(collapse_types(config.types), config.types)

    def test_type_measure(self):
        measure = type_measure(base_config())
        self.assertEqual([w for _, w in measure], [0.5, 0.5])
        self.assertEqual(measure[0][0].label, "p1")


if __name__ == "__main__":
    unittest.main()
