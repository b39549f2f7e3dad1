"""
Unit tests for configuration system.
"""

import unittest
from unittest.mock import patch
import json
import logging
import os
import sys
import tempfile

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from config import Config, ConfigError


class TestConfig(unittest.TestCase):
    """Test cases for Config class."""

    def test_physical_defaults(self):
        """Test the link budget defaults."""
        self.assertEqual(Config.CARRIER_FREQ_HZ, 20e9)
        self.assertEqual(Config.BANDWIDTH_HZ, 500e6)
        self.assertEqual(Config.BEAM_POWER_DBW, 20.0)
        self.assertEqual(Config.RX_GAIN_DBI, 42.1)
        self.assertEqual(Config.NOISE_POWER_DBW, -126.47)
        self.assertEqual(Config.SAT_ALTITUDE_KM, 35786.0)

    def test_problem_sizes(self):
        """Test full-scale and desk-scale problem sizes."""
        self.assertEqual((Config.NUM_TIMESLOTS, Config.NUM_BEAMS), (256, 16))
        self.assertEqual((Config.MAX_ACTIVE_BEAMS, Config.MAX_MULTIPLEXED), (5, 3))
        self.assertEqual((Config.DESK_NUM_BEAMS, Config.DESK_NUM_TIMESLOTS), (6, 16))
        self.assertEqual((Config.DESK_MAX_ACTIVE_BEAMS, Config.DESK_MAX_MULTIPLEXED), (2, 2))

    def test_solver_settings(self):
        """Test solver tolerances and limits."""
        self.assertEqual(Config.FEASIBILITY_TOL, 1e-6)
        self.assertEqual(Config.LOG_FLOOR, 1e-12)
        self.assertEqual(Config.UBA_MAX_ITERS, 100)
        self.assertEqual(Config.NODE_BUDGET, 10000)
        self.assertEqual(Config.SIC_ERROR_RATIO, 1e-4)

    def test_logging_settings(self):
        """Test logging configuration."""
        self.assertEqual(Config.LOG_LEVEL, "INFO")
        self.assertEqual(Config.LOG_FORMAT, '%(asctime)s - %(levelname)s - %(message)s')
        self.assertEqual(Config.LOG_FILE, 'bhnoma.log')

    def test_exit_codes(self):
        """Test process exit codes are distinct."""
        codes = {Config.EXIT_OK, Config.EXIT_ERROR, Config.EXIT_INFEASIBLE}
        self.assertEqual(len(codes), 3)
        self.assertEqual(Config.EXIT_OK, 0)

    def test_unit_conversion(self):
        """Test decibel conversions."""
        self.assertAlmostEqual(Config.db_to_linear(10.0), 10.0)
        self.assertAlmostEqual(Config.dbw_to_watts(20.0), 100.0)
        self.assertAlmostEqual(Config.db_to_linear(0.0), 1.0)

    @patch.dict(os.environ, {'BHNOMA_LOG': 'debug', 'BHNOMA_JOBS': '4'})
    def test_get_environment_variables(self):
        """Test getting environment variables."""
        env_vars = Config.get_environment_variables()

        self.assertEqual(env_vars['BHNOMA_LOG'], 'debug')
        self.assertEqual(env_vars['BHNOMA_JOBS'], '4')
        self.assertIn('BHNOMA_CONFIG', env_vars)

    @patch.dict(os.environ, {'BHNOMA_LOG': 'warning'})
    def test_get_log_level_from_env(self):
        """Test log level resolved from BHNOMA_LOG."""
        self.assertEqual(Config.get_log_level(), logging.WARNING)

    @patch.dict(os.environ, {}, clear=True)
    def test_get_log_level_default(self):
        """Test log level falls back to LOG_LEVEL."""
        self.assertEqual(Config.get_log_level(), logging.INFO)

    @patch.dict(os.environ, {'BHNOMA_LOG': 'chatty'})
    def test_get_log_level_invalid(self):
        """Test unknown level names are rejected."""
        with self.assertRaises(ValueError) as context:
            Config.get_log_level()

        self.assertIn('BHNOMA_LOG', str(context.exception))

    def test_scale_presets(self):
        """Test the generator presets differ only in problem size."""
        full = Config.full_scale_spec()
        desk = Config.desk_spec()

        self.assertEqual(full['num_beams'], 16)
        self.assertEqual(desk['num_beams'], 6)
        self.assertEqual(desk['terminals_per_beam'], 3)
        self.assertEqual(full['demand_max_bps'], desk['demand_max_bps'])
        self.assertEqual(full['min_rate_bps'], 5e6)


class TestSchemeRegistry(unittest.TestCase):
    """Test cases for the scheme registry in Config."""

    def test_all_algorithms_registered(self):
        """Test every --algo name has a registry entry."""
        expected = {'uba', 'ejpbt', 'lba', 'bh-oma', '1c-noma', '2c-noma', '4c-noma', 'ra', 'maxsinr',
                    'mincci', 'scheme1', 'scheme2'}
        self.assertEqual(set(Config.scheme_names()), expected)

    def test_get_enabled_schemes(self):
        """Test enabled schemes are a subset of the registry."""
        enabled = Config.get_enabled_schemes()

        self.assertIn('uba', enabled)
        self.assertTrue(all(cfg['enabled'] for cfg in enabled.values()))

    def test_get_scheme_config(self):
        """Test per-scheme options are returned as a copy."""
        config = Config.get_scheme_config('4c-noma')
        config['color_count'] = 99

        self.assertEqual(Config.get_scheme_config('4c-noma')['color_count'], 4)
        self.assertEqual(Config.get_scheme_config('nonexistent'), {})

    def test_is_scheme_enabled(self):
        """Test checking if a scheme is enabled."""
        self.assertTrue(Config.is_scheme_enabled('uba'))
        self.assertFalse(Config.is_scheme_enabled('nonexistent'))


class TestLoadOverrides(unittest.TestCase):
    """Test cases for --config override files."""

    def _write(self, content: str) -> str:
        handle = tempfile.NamedTemporaryFile('w', suffix='.json', delete=False)
        handle.write(content)
        handle.close()
        self.addCleanup(os.remove, handle.name)
        return handle.name

    def test_valid_overrides(self):
        """Test a valid override document is returned."""
        path = self._write(json.dumps({'solver': {'max_outer_iters': 5}, 'lba': {'node_budget': 10}}))

        overrides = Config.load_overrides(path)

        self.assertEqual(overrides['solver']['max_outer_iters'], 5)
        self.assertEqual(overrides['lba']['node_budget'], 10)

    def test_unknown_section(self):
        """Test unknown top-level sections are rejected."""
        path = self._write(json.dumps({'plots': {}}))

        with self.assertRaises(ConfigError) as context:
            Config.load_overrides(path)

        self.assertIn('plots', str(context.exception))

    def test_malformed_json(self):
        """Test malformed JSON raises a ValueError."""
        path = self._write('{"solver": ')

        with self.assertRaises(ValueError):
            Config.load_overrides(path)

    def test_not_an_object(self):
        """Test a JSON array is rejected."""
        path = self._write('[1, 2]')

        with self.assertRaises(ConfigError):
            Config.load_overrides(path)

    def test_missing_file(self):
        """Test an unreadable path raises ConfigError."""
        with self.assertRaises(ConfigError):
            Config.load_overrides('/nonexistent/overrides.json')


if __name__ == '__main__':
    unittest.main()
