"""
Tests for the command-line interface
"""
import io
import json
import os
import sys
import tempfile
import unittest
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pandas as pd

# Add the project root to the path
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from default_contagion.config import DATA_DIR
from default_contagion.network.io import read_matrix
from default_contagion.simulation.oracle import jacobi_singular_values
from main import main, summary_line


def run_cli(*argv):
    """Run main() and return (exit code, stdout)"""
    buffer = io.StringIO()
    with redirect_stdout(buffer):
        code = main([str(a) for a in argv])
    return code, buffer.getvalue()


class CLITestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def read_json(self, name, out=None):
        return json.loads(((out or self.out) / name).read_text(encoding="utf-8"))


class TestSVDCommand(CLITestCase):
    """Test the svd subcommand"""

    def test_identity(self):
        code, _ = run_cli("svd", "--matrix", DATA_DIR / "identity_4.csv", "--out", self.out)
        self.assertEqual(code, 0)
        summary = self.read_json("svd_summary.json")
        self.assertEqual(summary["rank"], 4)
        np.testing.assert_allclose(summary["singular_values"], np.ones(4))
        for name in ("singular_values.csv", "left_factors.csv", "right_factors.csv", "types.csv", "low_rank_4.csv"):
            self.assertTrue((self.out / name).exists(), name)

    def test_one_cluster(self):
        code, _ = run_cli("svd", "--matrix", DATA_DIR / "one_cluster_rank1.csv", "--theta", 1, "--out", self.out)
        self.assertEqual(code, 0)
        summary = self.read_json("svd_summary.json")
        self.assertEqual(summary["rank"], 1)
        self.assertAlmostEqual(summary["singular_values"][0], 10.0, delta=1e-8)
        self.assertLessEqual(summary["low_rank"]["frobenius"], 1e-8)

    def test_core_periphery_against_jacobi(self):
        path = DATA_DIR / "core_periphery_block.csv"
        code, _ = run_cli("svd", "--matrix", path, "--out", self.out)
        self.assertEqual(code, 0)
        summary = self.read_json("svd_summary.json")
        oracle = jacobi_singular_values(read_matrix(path).values)
        np.testing.assert_allclose(summary["singular_values"], oracle[:summary["rank"]], atol=1e-8)

    def test_scenario_matrix(self):
        code, _ = run_cli("svd", "--scenario", "two_cluster", "--out", self.out)
        self.assertEqual(code, 0)
        self.assertTrue((self.out / "low_rank_1.csv").exists())

    def test_missing_matrix(self):
        code, output = run_cli("svd", "--matrix", self.out / "absent.csv", "--out", self.out)
        self.assertEqual(code, 6)
        self.assertEqual(json.loads(output)["exit_code"], 6)


class TestRunCommands(CLITestCase):
    """Test the engine subcommands end to end"""

    def test_meanfield_is_reproducible(self):
        first, second, threaded = self.out / "a", self.out / "b", self.out / "c"
        self.assertEqual(run_cli("meanfield", "--scenario", "one_cluster", "--trials", 20, "--out", first)[0], 0)
        self.assertEqual(run_cli("meanfield", "--scenario", "one_cluster", "--trials", 20, "--out", second)[0], 0)
        self.assertEqual(run_cli("meanfield", "--scenario", "one_cluster", "--trials", 20, "--threads", 4, "--out", threaded)[0], 0)
        for name in ("meanfield_curves.csv", "meanfield_histogram.csv", "types.csv"):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)
            self.assertEqual((first / name).read_bytes(), (threaded / name).read_bytes(), name)

        curves = pd.read_csv(first / "meanfield_curves.csv")
        self.assertEqual(list(curves.columns), ["t", "D", "D_p1", "D_p2", "L_1", "Q_p1", "Q_p2", "X"])
        self.assertEqual(len(curves), 101)
        summary = self.read_json("meanfield_summary.json", first)
        self.assertEqual(summary["trials"], 20)

    def test_seed_flag_changes_output(self):
        run_cli("meanfield", "--scenario", "one_cluster", "--trials", 5, "--out", self.out / "a")
        run_cli("meanfield", "--scenario", "one_cluster", "--trials", 5, "--seed", 7, "--out", self.out / "b")
        self.assertNotEqual((self.out / "a" / "meanfield_curves.csv").read_bytes(),
                            (self.out / "b" / "meanfield_curves.csv").read_bytes())

    def test_bins_flag(self):
        run_cli("meanfield", "--scenario", "one_cluster", "--trials", 5, "--bins", 7, "--out", self.out)
        self.assertEqual(len(pd.read_csv(self.out / "meanfield_histogram.csv")), 7)

    def test_summary_line_precision(self):
        code, output = run_cli("meanfield", "--scenario", "one_cluster", "--trials", 5, "--out", self.out)
        self.assertEqual(code, 0)
        printed = output.split("mean D_T ")[1].split(",")[0]
        self.assertEqual(float(printed), self.read_json("meanfield_summary.json")["mean_D_T"])
        self.assertEqual(summary_line({"command": "oracle", "D_T": 0.1}), "oracle, D_T 0.10000000000000001")

    def test_invalid_trials(self):
        code, output = run_cli("meanfield", "--scenario", "one_cluster", "--trials", 0, "--out", self.out)
        self.assertEqual(code, 2)
        error = json.loads(output)
        self.assertEqual(error["exit_code"], 2)
        self.assertEqual(error["error"], "MalformedConfig")

    def test_missing_scenario(self):
        code, output = run_cli("meanfield", "--scenario", self.out / "absent.json", "--out", self.out)
        self.assertEqual(code, 6)
        self.assertEqual(json.loads(output)["exit_code"], 6)

    def test_particles(self):
        code, output = run_cli("particles", "--scenario", "one_cluster", "--trials", 3, "--out", self.out)
        self.assertEqual(code, 0)
        self.assertIn("mean D_T", output)
        summary = self.read_json("particles_summary.json")
        self.assertEqual(summary["pool_size"], 1000)
        times = pd.read_csv(self.out / "default_times.csv")
        self.assertEqual(list(times.columns), ["name", "type", "time"])
        self.assertTrue((self.out / "particles_histogram.csv").exists())

    def test_oracle(self):
        code, _ = run_cli("oracle", "--scenario", "one_cluster", "--particles", 1000, "--picard", 3, "--out", self.out)
        self.assertEqual(code, 0)
        summary = self.read_json("oracle_summary.json")
        self.assertEqual(summary["particles_per_type"], 1000)
        self.assertTrue(summary["weights_nonincreasing"])
        self.assertLessEqual(len(summary["picard_residuals"]), 3)

    def test_lln(self):
        code, _ = run_cli("lln", "--scenario", "one_cluster", "--trials", 3, "--n-list", 100, 200, "--out", self.out)
        self.assertEqual(code, 0)
        report = self.read_json("lln_report.json")
        self.assertEqual(report["N"], [100, 200])
        self.assertEqual(len(pd.read_csv(self.out / "lln_errors.csv")), 2)

    def test_compare(self):
        code, output = run_cli("compare", "--scenario", "two_cluster", "--reduced", "two_cluster_rank1",
                               "--trials", 10, "--out", self.out)
        self.assertEqual(code, 0)
        self.assertIn("max PE", output)
        summary = self.read_json("compare_summary.json")
        self.assertEqual(summary["reduced"], "two_cluster_rank1")
        self.assertTrue((self.out / "percent_error.csv").exists())


class TestInfoCommands(unittest.TestCase):
    """Test informational subcommands"""

    def test_list_scenarios(self):
        code, output = run_cli("list-scenarios")
        self.assertEqual(code, 0)
        for name in ("one_cluster", "two_cluster", "core_periphery_two"):
            self.assertIn(name, output)

    def test_info(self):
        code, output = run_cli("info", "--scenarios")
        self.assertEqual(code, 0)
        self.assertIn("Solver Settings", output)
        self.assertIn("one_cluster", output)


if __name__ == "__main__":
    unittest.main()
