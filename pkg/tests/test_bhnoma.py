"""
Unit tests for the bhnoma command line.
"""

import unittest
from unittest.mock import patch
import csv
import json
import os
import sys
import tempfile

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from config import Config, ConfigError
from model.scenario import ScenarioError
from model.scenario_io import load_scenario
from solvers.schedulers import SchedulingInfeasibleError
from bhnoma import (ExperimentSpec, generator_spec, sweep_point, run_sweep_job,
                    aggregate_rows, metric_matrix, main)


def scenario_document(min_rate=0.0) -> dict:
    return {
        'scenario_id': 'cli',
        'T': 2, 'B0': 1, 'K0': 2, 'P_beam_W': 1.0,
        'beams': [{'beam_id': 1, 'lat_deg': 0.0, 'lon_deg': 0.0, 'contour_radius_km': 1.0},
                  {'beam_id': 2, 'lat_deg': 0.0, 'lon_deg': 1.0, 'contour_radius_km': 1.0}],
        'terminals': [{'home_beam': 1, 'demand_bps': 3.0},
                      {'home_beam': 1, 'demand_bps': 2.0},
                      {'home_beam': 2, 'demand_bps': 50.0, 'min_rate_bps': min_rate}],
        'channel': {'gains': [[4.0, 1.0, 0.5], [0.2, 0.3, 2.0]], 'noise_power_W': 1.0, 'bandwidth_Hz': 1.0},
        'conflicts': [[1, 2]],
    }


TINY_GENERATOR = {'preset': 'desk', 'num_beams': 2, 'terminals_per_beam': 1, 'num_timeslots': 2,
                  'max_active_beams': 1, 'max_multiplexed': 1, 'min_rate_bps': 0.0}


def read_rows(path):
    with open(path, newline='') as handle:
        return list(csv.DictReader(handle))


class CliTestCase(unittest.TestCase):
    """Temporary directory, quiet logging and a clean environment."""

    def setUp(self):
        """Set up test fixtures."""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        for target in ('bhnoma.configure_logging', 'bhnoma.load_dotenv'):
            patcher = patch(target)
            patcher.start()
            self.addCleanup(patcher.stop)
        env = patch.dict(os.environ, {'BHNOMA_CONFIG': '', 'BHNOMA_JOBS': ''})
        env.start()
        self.addCleanup(env.stop)

    def path(self, *parts):
        return os.path.join(self.tmp.name, *parts)

    def write_json(self, name, data):
        with open(self.path(name), 'w') as handle:
            json.dump(data, handle)
        return self.path(name)


class TestGeneratorSpec(unittest.TestCase):
    """Test cases for presets and sweep points."""

    def test_desk_preset_default(self):
        """Test the desk preset is the default."""
        spec = generator_spec({'seed': 4})

        self.assertEqual(spec.num_beams, Config.DESK_NUM_BEAMS)

    def test_full_preset(self):
        """Test the full-scale preset."""
        spec = generator_spec({'preset': 'full'})

        self.assertEqual((spec.num_beams, spec.num_timeslots), (16, 256))

    def test_unknown_preset(self):
        """Test unknown presets are rejected."""
        with self.assertRaises(ScenarioError):
            generator_spec({'preset': 'huge'})

    def test_eta_point(self):
        """Test eta sweeps the SIC error ratio only."""
        spec, overrides = sweep_point(TINY_GENERATOR, {'solver': {'max_outer_iters': 3}}, 'eta', 0.05)

        self.assertEqual(overrides['eval']['sic_error_ratio'], 0.05)
        self.assertEqual(overrides['solver'], {'max_outer_iters': 3})
        self.assertEqual(spec.num_beams, 2)

    def test_limit_points(self):
        """Test K0 and B0 sweeps replace the limits."""
        spec, _ = sweep_point({'preset': 'desk'}, {}, 'K0', 3)
        self.assertEqual(spec.max_multiplexed, 3)

        spec, _ = sweep_point({'preset': 'desk'}, {}, 'B0', 4)
        self.assertEqual(spec.max_active_beams, 4)

    def test_demand_point(self):
        """Test demand sweeps rescale the demand range around the new mean."""
        spec, _ = sweep_point({'preset': 'desk'}, {}, 'demand_mean', 400e6)

        self.assertAlmostEqual(0.5 * (spec.demand_min_bps + spec.demand_max_bps), 400e6)

    def test_overrides_not_mutated(self):
        """Test sweep points copy the overrides."""
        overrides = {'eval': {'sic_error_ratio': 0.0}}

        sweep_point(TINY_GENERATOR, overrides, 'eta', 0.2)

        self.assertEqual(overrides['eval']['sic_error_ratio'], 0.0)


class TestExperimentSpec(unittest.TestCase):
    """Test cases for experiment spec parsing."""

    def test_from_dict(self):
        """Test a complete spec parses."""
        spec = ExperimentSpec.from_dict({'generator': TINY_GENERATOR, 'schemes': ['uba', 'ra'],
                                         'sweep': {'parameter': 'eta', 'values': [0.0, 0.1]},
                                         'seeds': 3, 'base_seed': 7, 'config': {'solver': {}}})

        self.assertEqual(spec.schemes, ['uba', 'ra'])
        self.assertEqual((spec.seeds, spec.base_seed), (3, 7))
        self.assertEqual(spec.overrides, {'solver': {}})

    def test_missing_sweep(self):
        """Test a spec without a sweep is rejected."""
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict({'schemes': ['uba']})

    def test_unknown_scheme(self):
        """Test unknown scheme names are rejected."""
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict({'schemes': ['oracle'], 'sweep': {'parameter': 'eta', 'values': [0.0]}})

    def test_unknown_parameter(self):
        """Test unknown sweep parameters are rejected."""
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict({'schemes': ['uba'], 'sweep': {'parameter': 'T', 'values': [4]}})

    def test_empty_values(self):
        """Test an empty sweep is rejected."""
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict({'schemes': ['uba'], 'sweep': {'parameter': 'eta', 'values': []}})


class TestSweepRows(unittest.TestCase):
    """Test cases for sweep jobs and aggregation."""

    def _row(self, scheme, value, gap, status='feasible'):
        return {'scheme': scheme, 'parameter': 'eta', 'value': value, 'seed': 0, 'sum_sq_gap_Mbps2': gap,
                'worst_octr': 0.5, 'unmet_Mbps': 1.0, 'total_power_W': 2.0, 'runtime_s': 0.1,
                'status': status, 'error': ''}

    def test_failed_job_recorded(self):
        """Test a failing job becomes an error row."""
        row = run_sweep_job({'scheme': 'uba', 'parameter': 'eta', 'value': 0.0, 'seed': 0,
                             'generator': {'bogus': 1}, 'overrides': {}})

        self.assertEqual(row['status'], 'error')
        self.assertIn('ScenarioError', row['error'])
        self.assertEqual(row['sum_sq_gap_Mbps2'], '')

    @patch('bhnoma.create_scheme')
    def test_infeasible_job_recorded(self, mock_create):
        """Test infeasible runs are tagged, not counted as errors."""
        mock_create.return_value.run.side_effect = SchedulingInfeasibleError("no schedule")

        row = run_sweep_job({'scheme': 'uba', 'parameter': 'eta', 'value': 0.0, 'seed': 0,
                             'generator': TINY_GENERATOR, 'overrides': {}})

        self.assertEqual(row['status'], 'infeasible')
        self.assertEqual(row['error'], 'no schedule')

    def test_aggregate(self):
        """Test mean and standard error per scheme and value."""
        rows = [self._row('uba', 0.0, 1.0), self._row('uba', 0.0, 3.0), self._row('uba', 0.1, 5.0),
                self._row('ra', 0.0, '', status='error')]

        aggregate = aggregate_rows(rows)

        self.assertEqual(len(aggregate), 2)
        first = aggregate[0]
        self.assertEqual(first['n'], 2)
        self.assertAlmostEqual(first['mean_sum_sq_gap_Mbps2'], 2.0)
        self.assertAlmostEqual(first['stderr_sum_sq_gap_Mbps2'], 1.0)
        self.assertEqual(aggregate[1]['stderr_sum_sq_gap_Mbps2'], 0.0)

    def test_metric_matrix(self):
        """Test the per-scheme metric averages skip failed rows."""
        rows = [self._row('uba', 0.0, 1.0), self._row('uba', 0.1, 3.0), self._row('ra', 0.0, '', status='error')]

        matrix = metric_matrix(rows)

        self.assertEqual([row['scheme'] for row in matrix], ['uba'])
        self.assertAlmostEqual(matrix[0]['mean_sum_sq_gap_Mbps2'], 2.0)


class TestGenerateCommand(CliTestCase):
    """Test cases for the generate command."""

    def test_generate(self):
        """Test a scenario file is written with the spec seed."""
        spec = self.write_json('spec.json', dict(TINY_GENERATOR, seed=11))

        code = main(['generate', '--spec', spec, '--out', self.path('scenario.json')])

        self.assertEqual(code, Config.EXIT_OK)
        scenario = load_scenario(self.path('scenario.json'))
        self.assertEqual((scenario.B, scenario.K, scenario.T), (2, 2, 2))
        self.assertEqual(scenario.seed, 11)

    def test_seed_flag_wins(self):
        """Test --seed overrides the spec seed."""
        spec = self.write_json('spec.json', dict(TINY_GENERATOR, seed=11))

        main(['generate', '--spec', spec, '--out', self.path('scenario.json'), '--seed', '5'])

        self.assertEqual(load_scenario(self.path('scenario.json')).seed, 5)

    def test_bad_spec(self):
        """Test an invalid spec exits with an error."""
        spec = self.write_json('spec.json', {'num_beams': 0})

        code = main(['generate', '--spec', spec, '--out', self.path('scenario.json')])

        self.assertEqual(code, Config.EXIT_ERROR)
        self.assertFalse(os.path.exists(self.path('scenario.json')))


class TestSolveCommand(CliTestCase):
    """Test cases for the solve command."""

    def test_solve_uba(self):
        """Test UBA writes solution, metrics and trace files."""
        scenario = self.write_json('scenario.json', scenario_document())

        code = main(['solve', '--scenario', scenario, '--algo', 'uba', '--out', self.path('out')])

        self.assertEqual(code, Config.EXIT_OK)
        for name in ('solution.csv', 'metrics.csv', 'trace.csv'):
            self.assertTrue(os.path.exists(self.path('out', name)), name)
        metrics = read_rows(self.path('out', 'metrics.csv'))
        self.assertEqual(metrics[0], {'metric': 'status', 'value': 'feasible'})
        self.assertEqual(metrics[-1]['metric'], 'runtime_s')

    def test_solve_lba_writes_bound(self):
        """Test LBA also writes the sandwich report."""
        scenario = self.write_json('scenario.json', scenario_document())

        code = main(['solve', '--scenario', scenario, '--algo', 'lba', '--out', self.path('out')])

        self.assertEqual(code, Config.EXIT_OK)
        bound = read_rows(self.path('out', 'bound.csv'))
        self.assertEqual(bound[0]['scenario_id'], 'cli')
        self.assertLessEqual(float(bound[0]['lower']), float(bound[0]['upper']) * (1 + 1e-6))

    def test_solve_infeasible(self):
        """Test an unreachable floor exits with the infeasible code."""
        scenario = self.write_json('scenario.json', scenario_document(min_rate=40.0))

        code = main(['solve', '--scenario', scenario, '--algo', 'uba', '--out', self.path('out')])

        self.assertEqual(code, Config.EXIT_INFEASIBLE)

    def test_config_overrides(self):
        """Test --config settings reach the scheme."""
        scenario = self.write_json('scenario.json', scenario_document())
        overrides = self.write_json('cfg.json', {'scheduler': {'max_iters': 1}})

        with patch('bhnoma.ExperimentRunner') as mock_runner:
            mock_runner.return_value.cmd_solve.return_value = Config.EXIT_OK
            code = main(['solve', '--scenario', scenario, '--algo', 'uba', '--out', self.path('out'),
                         '--config', overrides])

        self.assertEqual(code, Config.EXIT_OK)
        mock_runner.assert_called_once_with({'scheduler': {'max_iters': 1}}, 1)
        mock_runner.return_value.cmd_solve.assert_called_once_with(scenario, 'uba', self.path('out'), None)

    def test_bad_config(self):
        """Test an unreadable --config exits with an error."""
        scenario = self.write_json('scenario.json', scenario_document())

        code = main(['solve', '--scenario', scenario, '--algo', 'uba', '--out', self.path('out'),
                     '--config', self.path('missing.json')])

        self.assertEqual(code, Config.EXIT_ERROR)

    def test_missing_scenario(self):
        """Test a missing scenario file exits with an error."""
        code = main(['solve', '--scenario', self.path('none.json'), '--algo', 'uba', '--out', self.path('out')])

        self.assertEqual(code, Config.EXIT_ERROR)

    def test_color_scheme_rows(self):
        """Test color schemes dump every beam in every slot."""
        scenario = self.write_json('scenario.json', scenario_document())

        code = main(['solve', '--scenario', scenario, '--algo', '2c-noma', '--out', self.path('out')])

        self.assertIn(code, (Config.EXIT_OK, Config.EXIT_INFEASIBLE))
        rows = read_rows(self.path('out', 'solution.csv'))
        self.assertEqual({(row['slot'], row['beam']) for row in rows},
                         {('0', '1'), ('0', '2'), ('1', '1'), ('1', '2')})


class TestSweepCommand(CliTestCase):
    """Test cases for the sweep command."""

    def test_sweep(self):
        """Test rows, aggregates and metrics are written."""
        spec = self.write_json('experiment.json', {
            'generator': TINY_GENERATOR, 'schemes': ['uba'],
            'sweep': {'parameter': 'eta', 'values': [0.0, 0.01]}, 'seeds': 2, 'base_seed': 4})

        code = main(['sweep', '--spec', spec, '--out', self.path('sweep')])

        self.assertEqual(code, Config.EXIT_OK)
        rows = read_rows(self.path('sweep', 'rows.csv'))
        self.assertEqual(len(rows), 4)
        self.assertEqual(sorted({row['seed'] for row in rows}), ['4', '5'])
        self.assertTrue(all(row['status'] != 'error' for row in rows), rows)
        aggregate = read_rows(self.path('sweep', 'aggregate.csv'))
        self.assertEqual([row['n'] for row in aggregate], ['2', '2'])
        self.assertEqual(len(read_rows(self.path('sweep', 'metrics.csv'))), 1)

    def test_seeds_flag(self):
        """Test --seeds overrides the spec."""
        spec = self.write_json('experiment.json', {
            'generator': TINY_GENERATOR, 'schemes': ['uba'],
            'sweep': {'parameter': 'eta', 'values': [0.0]}, 'seeds': 5})

        with patch('bhnoma.run_sweep_job', side_effect=lambda job: dict(
                scheme=job['scheme'], parameter=job['parameter'], value=job['value'], seed=job['seed'],
                sum_sq_gap_Mbps2=1.0, worst_octr=1.0, unmet_Mbps=0.0, total_power_W=1.0, runtime_s=0.0,
                status='feasible', error='')):
            main(['sweep', '--spec', spec, '--out', self.path('sweep'), '--seeds', '1'])

        self.assertEqual(len(read_rows(self.path('sweep', 'rows.csv'))), 1)

    def test_bad_experiment(self):
        """Test an invalid experiment spec exits with an error."""
        spec = self.write_json('experiment.json', {'schemes': []})

        self.assertEqual(main(['sweep', '--spec', spec, '--out', self.path('sweep')]), Config.EXIT_ERROR)


class TestMainLogging(unittest.TestCase):
    """Test cases for logging setup failures."""

    @patch('bhnoma.load_dotenv')
    @patch('bhnoma.logging.basicConfig')
    @patch.dict(os.environ, {'BHNOMA_LOG': 'chatty'})
    def test_invalid_log_level(self, mock_basic, mock_dotenv):
        """Test an invalid BHNOMA_LOG exits before any work."""
        with patch('sys.stderr'):
            code = main(['generate', '--spec', 'x.json', '--out', 'y.json'])

        self.assertEqual(code, Config.EXIT_ERROR)
        mock_basic.assert_not_called()


if __name__ == '__main__':
    unittest.main()
