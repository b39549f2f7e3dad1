"""
Unit tests for the interference-free lower bound.
"""

import unittest
import os
import sys
import tempfile

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from config import Config, ConfigError
from model.scenario import scenario_from_gains
from solvers.schedulers import run_uba
from solvers.bounding import (LbaConfig, LbaModel, SandwichReport, BOUND_REPORT_HEADER, interference_free_powers,
                              power_budget_lhs, compute_rmax, solve_lba, relative_gap, sandwich_report,
                              write_bound_report, _branch_variable, _propagate, _solve_node)

GAINS = [[4.0, 1.0, 0.5], [0.2, 0.3, 2.0]]


def micro_scenario(demands=(10.0, 8.0, 6.0), min_rates=None, conflicts=()):
    return scenario_from_gains(GAINS, [0, 0, 1], list(demands), T=2, B0=2, K0=2,
                               min_rates_bps=min_rates, conflicts=conflicts, scenario_id='micro')


class TestClosedForms(unittest.TestCase):
    """Test cases for the per-beam closed-form powers."""

    def test_powers_deliver_rates(self):
        """Test each terminal reaches its rate seeing only stronger terminals."""
        powers = interference_free_powers([4.0, 1.0], [1.0, 1.0], 1.0, 1.0)

        np.testing.assert_allclose(powers, [0.25, 1.25])
        self.assertAlmostEqual(np.log2(1.0 + 1.0 * powers[1] / (powers[0] + 1.0)), 1.0)

    def test_budget_matches_power_sum(self):
        """Test the exponential form equals the summed powers."""
        gains, rates = [5.0, 2.0, 0.5], [0.7, 1.3, 0.2]

        lhs = power_budget_lhs(gains, rates, 0.8, 2.0)

        self.assertAlmostEqual(lhs, interference_free_powers(gains, rates, 0.8, 2.0).sum(), places=12)

    def test_zero_rates(self):
        """Test zero rates need zero power."""
        self.assertAlmostEqual(power_budget_lhs([3.0, 1.0], [0.0, 0.0], 1.0, 1.0), 0.0)
        self.assertEqual(power_budget_lhs([], [], 1.0, 1.0), 0.0)
        np.testing.assert_array_equal(interference_free_powers([3.0, 1.0], [0.0, 0.0], 1.0, 1.0), [0.0, 0.0])

    def test_budget_matches_power_sum_random_beams(self):
        """Test the exponential form against the summed powers on random beams."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            size = int(rng.integers(1, 7))
            gains = np.sort(rng.uniform(0.05, 10.0, size=size))[::-1]
            if np.any(np.diff(gains) >= 0):
                continue
            bandwidth = float(rng.uniform(0.5, 5.0))
            rates = bandwidth * rng.uniform(0.0, 2.0, size=size) * (rng.random(size) > 0.25)
            noise = float(rng.uniform(0.1, 2.0))

            powers = interference_free_powers(gains, rates, noise, bandwidth)
            lhs = power_budget_lhs(gains, rates, noise, bandwidth)

            self.assertTrue(np.all(rates >= 0.0))
            scale = noise / gains[-1] * 2.0 ** (rates.sum() / bandwidth)
            self.assertAlmostEqual(lhs, powers.sum(), delta=1e-9 * powers.sum() + 1e-12 * scale)
            zero = power_budget_lhs(gains, np.zeros(size), noise, bandwidth)
            self.assertAlmostEqual(zero, 0.0, delta=1e-12 * noise / gains[-1])

    def test_rmax(self):
        """Test the single-slot full-power rates."""
        np.testing.assert_allclose(compute_rmax(micro_scenario()), np.log2([5.0, 2.0, 3.0]))


class TestLbaConfig(unittest.TestCase):
    """Test cases for LbaConfig."""

    def test_from_dict(self):
        """Test overrides build a config."""
        self.assertEqual(LbaConfig.from_dict({'node_budget': 12}).node_budget, 12)

    def test_invalid(self):
        """Test invalid settings are rejected."""
        with self.assertRaises(ConfigError):
            LbaConfig.from_dict({'budget': 12})
        with self.assertRaises(ConfigError):
            LbaConfig(node_budget=0).validate()
        with self.assertRaises(ConfigError):
            LbaConfig(integrality_tol=0.6).validate()


class TestSolveLba(unittest.TestCase):
    """Test cases for branch-and-bound."""

    def test_sandwich_holds(self):
        """Test the lower bound never exceeds a UBA schedule."""
        scenario = micro_scenario()

        result = solve_lba(scenario)
        upper = run_uba(scenario)

        self.assertEqual(result.status, 'optimal')
        self.assertGreater(result.lower_bound, 0.0)
        self.assertLessEqual(result.lower_bound, upper.objective * (1 + 1e-6))
        self.assertGreaterEqual(result.nodes_explored, 1)

    def test_relaxed_solution(self):
        """Test the incumbent schedule is reported in interference-free terms."""
        scenario = micro_scenario(conflicts=[(0, 1)])

        result = solve_lba(scenario)

        self.assertEqual(result.solution.status, 'relaxed')
        self.assertEqual(result.solution.scheme, 'lba')
        alpha = result.solution.assignment.alpha
        self.assertFalse(np.any(alpha[0] & alpha[1]))
        self.assertTrue(np.all(result.solution.power.p[:2].sum(axis=0) <= 1.0 + 1e-6))

    def test_node_budget(self):
        """Test a truncated search returns a no-larger bound."""
        scenario = micro_scenario()

        full = solve_lba(scenario)
        truncated = solve_lba(scenario, LbaConfig(node_budget=1))

        self.assertIn(truncated.status, ('optimal', 'incomplete'))
        self.assertLessEqual(truncated.lower_bound, full.lower_bound * (1 + 1e-6))

    def test_demands_met(self):
        """Test reachable demands give a zero bound."""
        result = solve_lba(micro_scenario(demands=(0.5, 0.4, 0.3)))

        self.assertAlmostEqual(result.lower_bound, 0.0, places=15)

    def test_deterministic(self):
        """Test repeated runs split the same variables in the same order."""
        scenario = micro_scenario(conflicts=[(0, 1)])

        first = solve_lba(scenario)
        second = solve_lba(scenario)

        self.assertEqual(first.branching, second.branching)
        self.assertEqual(first.nodes_explored, second.nodes_explored)
        self.assertEqual(first.lower_bound, second.lower_bound)
        binaries = set(LbaModel(scenario).binaries.tolist())
        self.assertTrue(all(index in binaries for _, index in first.branching))

    def test_children_never_undercut_parent(self):
        """Test a branch's relaxation value stays above its parent's, up to solver gaps."""
        config = LbaConfig()
        compared = 0
        scenarios = (micro_scenario(conflicts=[(0, 1)]), micro_scenario(), micro_scenario(demands=(3.0, 2.0, 4.0)))
        for scenario in scenarios:
            model = LbaModel(scenario)
            fixed = _propagate(model, model.base)
            solved = _solve_node(model, fixed, config)
            for _ in range(4):
                if solved is None:
                    break
                value, gap, point = solved
                index = _branch_variable(model, fixed, point, config.integrality_tol)
                if index is None:
                    break
                next_node = None
                for bit in (0.0, 1.0):
                    child = fixed.copy()
                    child[index] = bit
                    child = _propagate(model, child)
                    if child is None:
                        continue
                    child_solved = _solve_node(model, child, config)
                    if child_solved is None:
                        continue
                    child_value, child_gap, _ = child_solved
                    self.assertGreaterEqual(child_value, value - gap - child_gap - 1e-9 * max(1.0, abs(value)))
                    compared += 1
                    next_node = next_node or (child, child_solved)
                if next_node is None:
                    break
                fixed, solved = next_node

        self.assertGreater(compared, 0)

    def test_unreachable_floor(self):
        """Test an unreachable floor makes the relaxation infeasible."""
        result = solve_lba(micro_scenario(demands=(1.0, 1.0, 100.0), min_rates=(0.0, 0.0, 50.0)))

        self.assertEqual(result.status, 'infeasible')
        self.assertEqual(result.lower_bound, float('inf'))
        self.assertIsNone(result.solution)


class TestSandwichReport(unittest.TestCase):
    """Test cases for bound reports."""

    def test_relative_gap(self):
        """Test the relative gap and its floor."""
        self.assertAlmostEqual(relative_gap(2.0, 3.0), 0.5)
        self.assertAlmostEqual(relative_gap(0.0, 1.0), 1.0 / Config.GAP_FLOOR)

    def test_report_from_parts(self):
        """Test a report built from an existing bound and schedule."""
        scenario = micro_scenario()
        lba = solve_lba(scenario)
        upper = run_uba(scenario)

        report = sandwich_report(scenario, upper_solution=upper, lba=lba)

        self.assertEqual(report.scenario_id, 'micro')
        self.assertEqual(report.lower, lba.lower_bound)
        self.assertEqual(report.upper, upper.objective)
        self.assertGreaterEqual(report.rel_gap, -1e-6)
        self.assertEqual(report.status, 'optimal')

    def test_write_bound_report(self):
        """Test the bound CSV layout."""
        report = SandwichReport('micro', 1.0, 1.5, 0.5, 7, 'incomplete')
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bound.csv')
            write_bound_report(path, [report])
            with open(path) as handle:
                lines = handle.read().splitlines()

        self.assertEqual(lines[0], ','.join(BOUND_REPORT_HEADER))
        self.assertEqual(lines[1], 'micro,1.0,1.5,0.5,7,incomplete')


if __name__ == '__main__':
    unittest.main()
