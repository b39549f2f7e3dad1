"""
Unit tests for scenario ingest and dump.
"""

import unittest
from unittest.mock import Mock, patch
import json
import os
import sys
import tempfile

import numpy as np
import requests

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from config import Config
from model.scenario import ScenarioError, ScenarioSpec, generate_scenario
from model.scenario_io import (scenario_to_dict, scenario_from_dict, save_scenario, load_scenario,
                               load_gain_table, fetch_remote, read_source, write_csv)


def explicit_document() -> dict:
    return {
        'scenario_id': 'doc',
        'T': 2, 'B0': 1, 'K0': 2, 'P_beam_W': 1.0,
        'beams': [{'beam_id': 1, 'lat_deg': 0.0, 'lon_deg': 0.0, 'contour_radius_km': 1.0},
                  {'beam_id': 2, 'lat_deg': 0.0, 'lon_deg': 1.0, 'contour_radius_km': 1.0}],
        'terminals': [{'home_beam': 1, 'demand_bps': 2.0},
                      {'home_beam': 1, 'demand_bps': 1.0},
                      {'home_beam': 2, 'demand_bps': 3.0, 'min_rate_bps': 0.5}],
        'channel': {'gains': [[1.0, 4.0, 0.1], [0.1, 0.2, 2.0]], 'noise_power_W': 1.0, 'bandwidth_Hz': 1.0},
        'conflicts': [[1, 2]],
    }


class TestScenarioDocuments(unittest.TestCase):
    """Test cases for scenario JSON conversion."""

    def test_explicit_gains(self):
        """Test explicit gains are used and terminals reordered."""
        scenario = scenario_from_dict(explicit_document())

        np.testing.assert_allclose(scenario.direct_gains, [4.0, 1.0, 2.0])
        np.testing.assert_allclose(scenario.demands, [1.0, 2.0, 3.0])
        self.assertTrue(scenario.conflicts(0, 1))
        self.assertEqual(scenario.scenario_id, 'doc')

    def test_missing_required_key(self):
        """Test a missing key names its field path."""
        document = explicit_document()
        del document['terminals'][1]['demand_bps']

        with self.assertRaises(ScenarioError) as context:
            scenario_from_dict(document)

        self.assertEqual(context.exception.field_path, 'terminals[1].demand_bps')

    def test_wrong_type(self):
        """Test non-integer counts are rejected."""
        document = explicit_document()
        document['T'] = 'two'

        with self.assertRaises(ScenarioError) as context:
            scenario_from_dict(document)

        self.assertEqual(context.exception.field_path, 'T')

    def test_gain_shape_mismatch(self):
        """Test a gain matrix of the wrong shape is rejected."""
        document = explicit_document()
        document['channel']['gains'] = [[1.0, 1.0, 1.0]]

        with self.assertRaises(ScenarioError) as context:
            scenario_from_dict(document)

        self.assertEqual(context.exception.field_path, 'channel.gains')

    def test_malformed_conflict(self):
        """Test conflict entries must be pairs."""
        document = explicit_document()
        document['conflicts'] = [[1, 2, 3]]

        with self.assertRaises(ScenarioError):
            scenario_from_dict(document)

    def test_synthesized_gains(self):
        """Test gains are synthesized from geometry when absent."""
        scenario = generate_scenario(ScenarioSpec.from_dict(Config.desk_spec()), seed=3)
        document = scenario_to_dict(scenario)
        del document['channel']['gains']

        rebuilt = scenario_from_dict(document)

        np.testing.assert_allclose(rebuilt.channel.gains, scenario.channel.gains, rtol=1e-9)


class TestScenarioFiles(unittest.TestCase):
    """Test cases for scenario files."""

    def setUp(self):
        """Set up test fixtures."""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.scenario = generate_scenario(ScenarioSpec.from_dict(Config.desk_spec()), seed=9)

    def test_round_trip(self):
        """Test a saved scenario loads back unchanged."""
        path = os.path.join(self.tmp.name, 'scenario.json')
        save_scenario(self.scenario, path)

        loaded = load_scenario(path)

        np.testing.assert_array_equal(loaded.channel.gains, self.scenario.channel.gains)
        np.testing.assert_array_equal(loaded.demands, self.scenario.demands)
        self.assertEqual(loaded.conflict_set, self.scenario.conflict_set)
        self.assertEqual((loaded.T, loaded.B0, loaded.K0), (self.scenario.T, self.scenario.B0, self.scenario.K0))
        self.assertEqual(loaded.seed, 9)

    def test_byte_identical(self):
        """Test the same scenario always serializes to the same bytes."""
        first = os.path.join(self.tmp.name, 'a.json')
        second = os.path.join(self.tmp.name, 'b.json')
        save_scenario(self.scenario, first)
        save_scenario(generate_scenario(ScenarioSpec.from_dict(Config.desk_spec()), seed=9), second)

        with open(first, 'rb') as a, open(second, 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_load_invalid_json(self):
        """Test malformed JSON is reported as a scenario error."""
        path = os.path.join(self.tmp.name, 'broken.json')
        with open(path, 'w') as handle:
            handle.write('{"T": ')

        with self.assertRaises(ScenarioError):
            load_scenario(path)

    def test_load_missing_file(self):
        """Test an unreadable path raises ScenarioError."""
        with self.assertRaises(ScenarioError):
            load_scenario(os.path.join(self.tmp.name, 'missing.json'))

    def test_write_csv_atomic(self):
        """Test CSV writes leave no temporary files behind."""
        path = os.path.join(self.tmp.name, 'out', 'rows.csv')

        write_csv(path, ['a', 'b'], [{'a': 1, 'b': 2}])

        self.assertEqual(os.listdir(os.path.dirname(path)), ['rows.csv'])
        with open(path) as handle:
            self.assertEqual(handle.read().splitlines(), ['a,b', '1,2'])


class TestGainTable(unittest.TestCase):
    """Test cases for gain table overrides."""

    def setUp(self):
        """Set up test fixtures."""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.scenario = scenario_from_dict(explicit_document())

    def _table(self, text: str) -> str:
        path = os.path.join(self.tmp.name, 'gains.csv')
        with open(path, 'w') as handle:
            handle.write(text)
        return path

    def test_override(self):
        """Test listed entries replace the scenario gains."""
        path = self._table("beam_id,terminal_id,gain_linear\n2,1,0.5\n")

        updated = load_gain_table(path, self.scenario)

        self.assertAlmostEqual(updated.channel.gains[1, 0], 0.5)
        self.assertAlmostEqual(updated.channel.gains[0, 0], 4.0)

    def test_override_reorders(self):
        """Test an override that changes in-beam order re-indexes terminals."""
        path = self._table("beam_id,terminal_id,gain_linear\n1,2,8.0\n")

        updated = load_gain_table(path, self.scenario)

        np.testing.assert_allclose(updated.direct_gains[:2], [8.0, 4.0])
        np.testing.assert_allclose(updated.demands[:2], [2.0, 1.0])

    def test_unknown_terminal(self):
        """Test unknown ids are rejected with the table line."""
        path = self._table("beam_id,terminal_id,gain_linear\n1,9,0.5\n")

        with self.assertRaises(ScenarioError) as context:
            load_gain_table(path, self.scenario)

        self.assertTrue(context.exception.field_path.endswith(':2'))

    def test_bad_header(self):
        """Test the header must match exactly."""
        path = self._table("beam,terminal,gain\n1,1,0.5\n")

        with self.assertRaises(ScenarioError):
            load_gain_table(path, self.scenario)


class TestRemoteFetch(unittest.TestCase):
    """Test cases for remote ingest with retry."""

    @patch('model.scenario_io.requests.get')
    def test_fetch_success(self, mock_get):
        """Test successful fetch returns the body."""
        mock_response = Mock()
        mock_response.text = '{"ok": true}'
        mock_response.raise_for_status.return_value = None
        mock_get.return_value = mock_response

        self.assertEqual(fetch_remote('https://example.org/s.json'), '{"ok": true}')
        mock_get.assert_called_once_with('https://example.org/s.json', timeout=Config.HTTP_TIMEOUT)

    @patch('model.scenario_io.time.sleep')
    @patch('model.scenario_io.requests.get')
    def test_fetch_retries_then_succeeds(self, mock_get, mock_sleep):
        """Test a transient failure is retried."""
        mock_response = Mock()
        mock_response.text = 'body'
        mock_response.raise_for_status.return_value = None
        mock_get.side_effect = [requests.exceptions.ConnectionError("down"), mock_response]

        self.assertEqual(fetch_remote('https://example.org/s.json'), 'body')
        self.assertEqual(mock_get.call_count, 2)
        mock_sleep.assert_called_once_with(Config.RETRY_DELAY)

    @patch('model.scenario_io.time.sleep')
    @patch('model.scenario_io.requests.get')
    def test_fetch_exhausts_retries(self, mock_get, mock_sleep):
        """Test exhausted retries raise ScenarioError."""
        mock_response = Mock()
        mock_response.raise_for_status.side_effect = requests.exceptions.HTTPError("404")
        mock_get.return_value = mock_response

        with self.assertRaises(ScenarioError):
            fetch_remote('https://example.org/missing.json')

        self.assertEqual(mock_get.call_count, Config.MAX_RETRIES)
        self.assertEqual(mock_sleep.call_count, Config.MAX_RETRIES - 1)

    @patch('model.scenario_io.requests.get')
    def test_load_scenario_from_url(self, mock_get):
        """Test scenarios load from an http(s) URL."""
        mock_response = Mock()
        mock_response.text = json.dumps(explicit_document())
        mock_response.raise_for_status.return_value = None
        mock_get.return_value = mock_response

        scenario = load_scenario('https://example.org/doc.json')

        self.assertEqual(scenario.K, 3)

    def test_read_source_local(self):
        """Test local paths bypass the network."""
        with tempfile.NamedTemporaryFile('w', delete=False) as handle:
            handle.write('local')
        self.addCleanup(os.remove, handle.name)

        with patch('model.scenario_io.requests.get') as mock_get:
            self.assertEqual(read_source(handle.name), 'local')
            mock_get.assert_not_called()


if __name__ == '__main__':
    unittest.main()
