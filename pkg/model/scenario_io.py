"""
Scenario ingest and dump.

Scenarios travel as JSON (beams, terminals, optional explicit gains, budgets
and conflicts); gain tables as CSV with header beam_id,terminal_id,gain_linear.
Both may be read from a local path or fetched over HTTP(S).
"""

import os
import io
import csv
import json
import time
import tempfile
import logging
from typing import Dict, Any, List, Optional, Sequence

import numpy as np
import requests

from config import Config
from model.scenario import (Scenario, BeamGeometry, Terminal, ChannelMatrix, RadioParams, ScenarioError,
                            build_channel_matrix, reindex_terminals)

logger = logging.getLogger(__name__)

GAIN_TABLE_HEADER = ['beam_id', 'terminal_id', 'gain_linear']


def is_url(source: str) -> bool:
    return source.startswith('http://') or source.startswith('https://')


def fetch_remote(url: str) -> str:
    """Fetch a remote document with retry logic."""
    for attempt in range(Config.MAX_RETRIES):
        try:
            logger.info(f"Fetching {url} (attempt {attempt + 1}/{Config.MAX_RETRIES})")
            response = requests.get(url, timeout=Config.HTTP_TIMEOUT)
            response.raise_for_status()
            logger.info(f"Successfully fetched {url}")
            return response.text

        except requests.exceptions.RequestException as e:
            logger.error(f"Request failed (attempt {attempt + 1}/{Config.MAX_RETRIES}): {e}")
            if attempt < Config.MAX_RETRIES - 1:
                logger.info(f"Retrying in {Config.RETRY_DELAY} seconds...")
                time.sleep(Config.RETRY_DELAY)
    raise ScenarioError(f"could not fetch {url} after {Config.MAX_RETRIES} attempts", "source")


def read_source(source: str) -> str:
    if is_url(source):
        return fetch_remote(source)
    try:
        with open(source, 'r', encoding='utf-8') as handle:
            return handle.read()
    except OSError as e:
        raise ScenarioError(f"cannot read file: {e}", source)


def write_csv(path: str, fieldnames: Sequence[str], rows: Sequence[Dict[str, Any]]) -> None:
    """Write a CSV file atomically (temp file in the same directory, then rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix='.csv')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            writer = csv.DictWriter(handle, fieldnames=list(fieldnames))
            writer.writeheader()
            writer.writerows(rows)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def _require(data: Dict[str, Any], key: str, path: str) -> Any:
    if not isinstance(data, dict):
        raise ScenarioError("expected an object", path)
    if key not in data:
        raise ScenarioError("missing required key", f"{path}.{key}" if path else key)
    return data[key]


def _number(data: Dict[str, Any], key: str, path: str, default: Optional[float] = None) -> float:
    if default is not None and key not in data:
        return default
    value = _require(data, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number (got {value!r})", f"{path}.{key}" if path else key)
    return float(value)


def _integer(data: Dict[str, Any], key: str, path: str) -> int:
    value = _require(data, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"expected an integer (got {value!r})", f"{path}.{key}" if path else key)
    return value


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    return {
        'scenario_id': scenario.scenario_id,
        'seed': scenario.seed,
        'T': scenario.T,
        'B0': scenario.B0,
        'K0': scenario.K0,
        'P_beam_W': scenario.P_beam_W,
        'beams': [{'beam_id': b.beam_id, 'lat_deg': b.lat_deg, 'lon_deg': b.lon_deg,
                   'contour_radius_km': b.contour_radius_km, 'peak_tx_gain_dBi': b.peak_tx_gain_dBi}
                  for b in scenario.beams],
        'terminals': [{'terminal_id': t.terminal_id, 'home_beam': t.home_beam + 1, 'lat_deg': t.lat_deg,
                       'lon_deg': t.lon_deg, 'rx_gain_dBi': t.rx_gain_dBi, 'demand_bps': t.demand_bps,
                       'min_rate_bps': t.min_rate_bps}
                      for t in scenario.terminals],
        'channel': {'gains': scenario.channel.gains.tolist(),
                    'noise_power_W': scenario.channel.noise_power_W,
                    'bandwidth_Hz': scenario.channel.bandwidth_Hz,
                    'carrier_freq_Hz': scenario.channel.carrier_freq_Hz},
        'conflicts': [[a + 1, b + 1] for a, b in sorted(scenario.conflict_set)],
    }


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """Validate a scenario document and build the Scenario, synthesizing gains if absent."""
    beams = []
    for i, entry in enumerate(_require(data, 'beams', '')):
        path = f"beams[{i}]"
        beams.append(BeamGeometry(beam_id=_integer(entry, 'beam_id', path),
                                  lat_deg=_number(entry, 'lat_deg', path),
                                  lon_deg=_number(entry, 'lon_deg', path),
                                  contour_radius_km=_number(entry, 'contour_radius_km', path),
                                  peak_tx_gain_dBi=_number(entry, 'peak_tx_gain_dBi', path,
                                                           Config.PEAK_TX_GAIN_DBI)))
    terminals = []
    for i, entry in enumerate(_require(data, 'terminals', '')):
        path = f"terminals[{i}]"
        terminals.append(Terminal(terminal_id=i + 1,
                                  home_beam=_integer(entry, 'home_beam', path) - 1,
                                  lat_deg=_number(entry, 'lat_deg', path, 0.0),
                                  lon_deg=_number(entry, 'lon_deg', path, 0.0),
                                  rx_gain_dBi=_number(entry, 'rx_gain_dBi', path, Config.RX_GAIN_DBI),
                                  demand_bps=_number(entry, 'demand_bps', path),
                                  min_rate_bps=_number(entry, 'min_rate_bps', path, 0.0)))

    channel_data = data.get('channel', {})
    radio = RadioParams(carrier_freq_Hz=_number(channel_data, 'carrier_freq_Hz', 'channel', Config.CARRIER_FREQ_HZ),
                        bandwidth_Hz=_number(channel_data, 'bandwidth_Hz', 'channel', Config.BANDWIDTH_HZ),
                        noise_power_W=_number(channel_data, 'noise_power_W', 'channel',
                                              Config.dbw_to_watts(Config.NOISE_POWER_DBW)))
    if 'gains' in channel_data:
        gains = np.asarray(channel_data['gains'], dtype=float)
        if gains.shape != (len(beams), len(terminals)):
            raise ScenarioError(f"expected shape ({len(beams)}, {len(terminals)}), got {gains.shape}",
                                'channel.gains')
        for terminal in terminals:
            if not 0 <= terminal.home_beam < len(beams):
                raise ScenarioError(f"home beam {terminal.home_beam + 1} does not exist",
                                    f"terminals[{terminal.terminal_id - 1}].home_beam")
        terminals, gains = reindex_terminals(terminals, gains)
        channel = ChannelMatrix(gains=gains, noise_power_W=radio.noise_power_W, bandwidth_Hz=radio.bandwidth_Hz,
                                carrier_freq_Hz=radio.carrier_freq_Hz)
    else:
        channel, terminals = build_channel_matrix(beams, terminals, radio)

    conflicts = set()
    for i, pair in enumerate(data.get('conflicts', [])):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ScenarioError("expected a pair of beam ids", f"conflicts[{i}]")
        conflicts.add((int(pair[0]) - 1, int(pair[1]) - 1))

    seed = data.get('seed')
    return Scenario(beams=tuple(beams), terminals=tuple(terminals), channel=channel,
                    T=_integer(data, 'T', ''), B0=_integer(data, 'B0', ''), K0=_integer(data, 'K0', ''),
                    P_beam_W=_number(data, 'P_beam_W', ''), conflict_set=frozenset(conflicts),
                    seed=None if seed is None else int(seed),
                    scenario_id=str(data.get('scenario_id', 'scenario')))


def save_scenario(scenario: Scenario, path: str) -> None:
    """Write scenario JSON; identical scenarios give byte-identical files."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(scenario_to_dict(scenario), handle, indent=2, sort_keys=True)
        handle.write('\n')


def load_scenario(source: str) -> Scenario:
    """Load a scenario from a JSON file path or an http(s) URL."""
    text = read_source(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"not valid JSON: {e}", source)
    scenario = scenario_from_dict(data)
    logger.info(f"Loaded scenario {scenario.scenario_id}: B={scenario.B}, K={scenario.K}, T={scenario.T}")
    return scenario


def load_gain_table(source: str, scenario: Scenario) -> Scenario:
    """Override a scenario's gains with a beam_id,terminal_id,gain_linear table."""
    gains = np.array(scenario.channel.gains)
    reader = csv.DictReader(io.StringIO(read_source(source)))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != GAIN_TABLE_HEADER:
        raise ScenarioError(f"header must be {','.join(GAIN_TABLE_HEADER)}", source)
    for line, row in enumerate(reader, start=2):
        try:
            b, k, value = int(row['beam_id']) - 1, int(row['terminal_id']) - 1, float(row['gain_linear'])
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"malformed row ({e})", f"{source}:{line}")
        if not (0 <= b < scenario.B and 0 <= k < scenario.K):
            raise ScenarioError(f"unknown beam {b + 1} or terminal {k + 1}", f"{source}:{line}")
        gains[b, k] = value

    terminals, gains = reindex_terminals(list(scenario.terminals), gains)
    channel = ChannelMatrix(gains=gains, noise_power_W=scenario.channel.noise_power_W,
                            bandwidth_Hz=scenario.channel.bandwidth_Hz,
                            carrier_freq_Hz=scenario.channel.carrier_freq_Hz)
    return Scenario(beams=scenario.beams, terminals=tuple(terminals), channel=channel, T=scenario.T,
                    B0=scenario.B0, K0=scenario.K0, P_beam_W=scenario.P_beam_W,
                    conflict_set=scenario.conflict_set, seed=scenario.seed, scenario_id=scenario.scenario_id)


def write_rows(path: str, rows: List[Dict[str, Any]], fieldnames: Optional[Sequence[str]] = None) -> None:
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    write_csv(path, fieldnames, rows)
