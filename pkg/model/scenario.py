"""
Scenario model for beam-hopping NOMA downlinks.

Holds the immutable problem description (beams, terminals, channel gains,
budgets and the beam conflict set) and the ways of building one: synthesis
from a parametric beam pattern, explicit gain tables, and the hardness
instances built from three-dimensional matching triples.

Indexing convention: arrays are 0-based. ``beam_id`` and ``terminal_id`` are
1-based labels equal to index + 1. ``Terminal.home_beam`` and the pairs in
``Scenario.conflict_set`` are 0-based beam indices.
"""

import math
import logging
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from typing import Dict, Any, List, Optional, Sequence, Tuple, FrozenSet, Iterable

import numpy as np
import networkx as nx

from config import Config

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """Invalid scenario data, optionally tagged with the offending field path."""

    def __init__(self, message: str, field_path: Optional[str] = None):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message)


@dataclass(frozen=True)
class BeamGeometry:
    beam_id: int
    lat_deg: float
    lon_deg: float
    contour_radius_km: float
    peak_tx_gain_dBi: float = Config.PEAK_TX_GAIN_DBI

    def __post_init__(self):
        if not self.contour_radius_km > 0:
            raise ScenarioError(f"contour radius must be positive (got {self.contour_radius_km})",
                                f"beams[{self.beam_id - 1}].contour_radius_km")


@dataclass(frozen=True)
class Terminal:
    terminal_id: int
    home_beam: int
    lat_deg: float
    lon_deg: float
    rx_gain_dBi: float
    demand_bps: float
    min_rate_bps: float = 0.0

    def __post_init__(self):
        path = f"terminals[{self.terminal_id - 1}]"
        if self.demand_bps < 0 or not math.isfinite(self.demand_bps):
            raise ScenarioError(f"demand must be a finite nonnegative rate (got {self.demand_bps})",
                                f"{path}.demand_bps")
        if self.min_rate_bps < 0:
            raise ScenarioError(f"minimum rate must be nonnegative (got {self.min_rate_bps})",
                                f"{path}.min_rate_bps")
        if self.min_rate_bps > 0 and not self.min_rate_bps < self.demand_bps:
            raise ScenarioError("minimum rate must be smaller than the demand", f"{path}.min_rate_bps")


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    gains: np.ndarray
    noise_power_W: float
    bandwidth_Hz: float
    carrier_freq_Hz: float = Config.CARRIER_FREQ_HZ

    def __post_init__(self):
        gains = np.array(self.gains, dtype=float)
        if gains.ndim != 2:
            raise ScenarioError("gain matrix must be two-dimensional (beams x terminals)", "channel.gains")
        if not np.all(np.isfinite(gains)) or np.any(gains < 0):
            raise ScenarioError("gains must be finite and nonnegative", "channel.gains")
        for name in ('noise_power_W', 'bandwidth_Hz', 'carrier_freq_Hz'):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ScenarioError(f"must be positive (got {value})", f"channel.{name}")
        gains.setflags(write=False)
        object.__setattr__(self, 'gains', gains)


@dataclass(frozen=True, eq=False)
class Scenario:
    beams: Tuple[BeamGeometry, ...]
    terminals: Tuple[Terminal, ...]
    channel: ChannelMatrix
    T: int
    B0: int
    K0: int
    P_beam_W: float
    conflict_set: FrozenSet[Tuple[int, int]] = frozenset()
    seed: Optional[int] = None
    scenario_id: str = 'scenario'

    def __post_init__(self):
        object.__setattr__(self, 'beams', tuple(self.beams))
        object.__setattr__(self, 'terminals', tuple(self.terminals))
        B, K = len(self.beams), len(self.terminals)
        if B < 1:
            raise ScenarioError("at least one beam is required", "beams")
        for index, beam in enumerate(self.beams):
            if beam.beam_id != index + 1:
                raise ScenarioError(f"beam ids must be contiguous from 1 (found {beam.beam_id})",
                                    f"beams[{index}].beam_id")
        for index, terminal in enumerate(self.terminals):
            if terminal.terminal_id != index + 1:
                raise ScenarioError(f"terminal ids must be contiguous from 1 (found {terminal.terminal_id})",
                                    f"terminals[{index}].terminal_id")
            if not 0 <= terminal.home_beam < B:
                raise ScenarioError(f"home beam {terminal.home_beam} does not exist",
                                    f"terminals[{index}].home_beam")
        if self.channel.gains.shape != (B, K):
            raise ScenarioError(f"gain matrix shape {self.channel.gains.shape} does not match ({B}, {K})",
                                "channel.gains")
        if self.T < 1:
            raise ScenarioError(f"timeslot count must be positive (got {self.T})", "T")
        if not 1 <= self.B0 <= B:
            raise ScenarioError(f"B0 must lie in [1, {B}] (got {self.B0})", "B0")
        if self.K0 < 1:
            raise ScenarioError(f"K0 must be at least 1 (got {self.K0})", "K0")
        if not self.P_beam_W > 0:
            raise ScenarioError(f"per-beam power must be positive (got {self.P_beam_W})", "P_beam_W")

        pairs = set()
        for pair in self.conflict_set:
            a, b = (int(v) for v in pair)
            if a == b:
                raise ScenarioError(f"self-pair ({a}, {b}) is not allowed", "conflicts")
            if not (0 <= a < B and 0 <= b < B):
                raise ScenarioError(f"pair ({a}, {b}) references a missing beam", "conflicts")
            pairs.add((min(a, b), max(a, b)))
        object.__setattr__(self, 'conflict_set', frozenset(pairs))

        own = self.channel.gains[self.beam_of, np.arange(K)]
        for b in range(B):
            members = np.flatnonzero(self.beam_of == b)
            if np.any(np.diff(own[members]) > 0):
                raise ScenarioError(f"terminals of beam {b + 1} are not in descending gain order", "terminals")

    @property
    def B(self) -> int:
        return len(self.beams)

    @property
    def K(self) -> int:
        return len(self.terminals)

    @cached_property
    def beam_of(self) -> np.ndarray:
        beam_of = np.array([t.home_beam for t in self.terminals], dtype=int)
        beam_of.setflags(write=False)
        return beam_of

    @cached_property
    def members(self) -> List[np.ndarray]:
        """Terminal indices of each beam, in SIC order."""
        return [np.flatnonzero(self.beam_of == b) for b in range(self.B)]

    @cached_property
    def demands(self) -> np.ndarray:
        return np.array([t.demand_bps for t in self.terminals], dtype=float)

    @cached_property
    def min_rates(self) -> np.ndarray:
        return np.array([t.min_rate_bps for t in self.terminals], dtype=float)

    @cached_property
    def direct_gains(self) -> np.ndarray:
        return self.channel.gains[self.beam_of, np.arange(self.K)]

    @property
    def bandwidth_Hz(self) -> float:
        return self.channel.bandwidth_Hz

    @property
    def noise_power_W(self) -> float:
        return self.channel.noise_power_W

    def conflicts(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.conflict_set

    def with_channel(self, channel: ChannelMatrix) -> 'Scenario':
        return replace(self, channel=channel)

    def with_limits(self, B0: Optional[int] = None, K0: Optional[int] = None) -> 'Scenario':
        return replace(self, B0=self.B0 if B0 is None else B0, K0=self.K0 if K0 is None else K0)

    def with_demands(self, demands_bps: Sequence[float]) -> 'Scenario':
        terminals = [replace(t, demand_bps=float(d)) for t, d in zip(self.terminals, demands_bps)]
        return replace(self, terminals=tuple(terminals))


@dataclass(frozen=True)
class RadioParams:
    carrier_freq_Hz: float = Config.CARRIER_FREQ_HZ
    bandwidth_Hz: float = Config.BANDWIDTH_HZ
    noise_power_W: float = Config.dbw_to_watts(Config.NOISE_POWER_DBW)
    noise_temperature_K: Optional[float] = None
    sat_lon_deg: float = Config.SAT_LON_DEG
    sat_altitude_km: float = Config.SAT_ALTITUDE_KM

    @property
    def gain_normalization(self) -> float:
        """kappa * T_noise * W, or 1 when gains are kept as physical path gains."""
        if self.noise_temperature_K is None:
            return 1.0
        return Config.BOLTZMANN * self.noise_temperature_K * self.bandwidth_Hz


@dataclass
class ScenarioSpec:
    num_beams: int = Config.DESK_NUM_BEAMS
    num_timeslots: int = Config.DESK_NUM_TIMESLOTS
    max_active_beams: int = Config.DESK_MAX_ACTIVE_BEAMS
    max_multiplexed: int = Config.DESK_MAX_MULTIPLEXED
    terminals_per_beam: int = Config.DESK_TERMINALS_PER_BEAM
    demand_min_bps: float = Config.DEMAND_MIN_BPS
    demand_max_bps: float = Config.DEMAND_MAX_BPS
    min_rate_bps: float = Config.MIN_RATE_BPS
    beam_power_dbw: float = Config.BEAM_POWER_DBW
    noise_power_dbw: float = Config.NOISE_POWER_DBW
    bandwidth_Hz: float = Config.BANDWIDTH_HZ
    carrier_freq_Hz: float = Config.CARRIER_FREQ_HZ
    rx_gain_dBi: float = Config.RX_GAIN_DBI
    peak_tx_gain_dBi: float = Config.PEAK_TX_GAIN_DBI
    contour_radius_km: float = Config.CONTOUR_RADIUS_KM
    beam_spacing_km: float = Config.BEAM_SPACING_KM
    conflict_radius_km: float = Config.CONFLICT_RADIUS_KM
    center_lat_deg: float = Config.COVERAGE_CENTER_LAT_DEG
    center_lon_deg: float = Config.COVERAGE_CENTER_LON_DEG
    sat_lon_deg: float = Config.SAT_LON_DEG
    sat_altitude_km: float = Config.SAT_ALTITUDE_KM
    cross_gain_scale: float = 1.0

    def validate(self) -> None:
        """Reject specs that cannot produce a valid scenario."""
        for name in ('num_beams', 'num_timeslots', 'terminals_per_beam', 'demand_max_bps',
                     'bandwidth_Hz', 'carrier_freq_Hz', 'contour_radius_km', 'beam_spacing_km'):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"must be positive (got {getattr(self, name)})", f"spec.{name}")
        if self.max_active_beams < 1 or self.max_active_beams >= self.num_beams:
            raise ScenarioError(f"B0 must satisfy 1 <= B0 < B (got B0={self.max_active_beams}, "
                                f"B={self.num_beams})", "spec.max_active_beams")
        if self.max_multiplexed < 1:
            raise ScenarioError(f"K0 must be at least 1 (got {self.max_multiplexed})", "spec.max_multiplexed")
        if not 0 <= self.demand_min_bps <= self.demand_max_bps:
            raise ScenarioError("demand range must satisfy 0 <= min <= max", "spec.demand_min_bps")
        if self.min_rate_bps < 0 or (self.min_rate_bps > 0 and self.min_rate_bps >= self.demand_min_bps):
            raise ScenarioError("minimum rate must be nonnegative and below the smallest demand",
                                "spec.min_rate_bps")
        if self.conflict_radius_km < 0 or self.cross_gain_scale < 0:
            raise ScenarioError("conflict radius and cross-gain scale must be nonnegative", "spec")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScenarioSpec':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ScenarioError(f"unknown keys: {', '.join(unknown)}", "spec")
        return cls(**data)

    def radio_params(self) -> RadioParams:
        return RadioParams(carrier_freq_Hz=self.carrier_freq_Hz, bandwidth_Hz=self.bandwidth_Hz,
                           noise_power_W=Config.dbw_to_watts(self.noise_power_dbw),
                           sat_lon_deg=self.sat_lon_deg, sat_altitude_km=self.sat_altitude_km)


# Geometry on a spherical Earth, positions in km (ECEF).

def geodetic_to_ecef(lat_deg: float, lon_deg: float, alt_km: float = 0.0) -> np.ndarray:
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    r = Config.EARTH_RADIUS_KM + alt_km
    return np.array([r * math.cos(lat) * math.cos(lon), r * math.cos(lat) * math.sin(lon), r * math.sin(lat)])


def satellite_position(sat_lon_deg: float = Config.SAT_LON_DEG,
                       sat_altitude_km: float = Config.SAT_ALTITUDE_KM) -> np.ndarray:
    return geodetic_to_ecef(0.0, sat_lon_deg, sat_altitude_km)


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    cos_angle = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.acos(min(1.0, max(-1.0, cos_angle)))


def offset_position(lat_deg: float, lon_deg: float, north_km: float, east_km: float) -> Tuple[float, float]:
    """Shift a point by a small local displacement."""
    lat = lat_deg + math.degrees(north_km / Config.EARTH_RADIUS_KM)
    lon = lon_deg + math.degrees(east_km / (Config.EARTH_RADIUS_KM * math.cos(math.radians(lat_deg))))
    return lat, lon


def great_circle_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    return Config.EARTH_RADIUS_KM * angle_between(geodetic_to_ecef(lat1, lon1), geodetic_to_ecef(lat2, lon2))


def contour_half_angle(beam: BeamGeometry, sat_position: np.ndarray) -> float:
    """Off-boresight angle, seen from the satellite, of the beam's contour edge."""
    edge = offset_position(beam.lat_deg, beam.lon_deg, beam.contour_radius_km, 0.0)
    boresight = geodetic_to_ecef(beam.lat_deg, beam.lon_deg)
    return angle_between(boresight - sat_position, geodetic_to_ecef(*edge) - sat_position)


def rolloff_gain(peak_gain_dBi: float, theta: float, theta_c: float) -> float:
    """Gaussian rolloff anchored so the gain is CONTOUR_ROLLOFF_DB down at theta_c."""
    decay = math.log(10.0 ** (Config.CONTOUR_ROLLOFF_DB / 10.0))
    return Config.db_to_linear(peak_gain_dBi) * math.exp(-decay * (theta / theta_c) ** 2)


def synth_tx_gain(beam: BeamGeometry, terminal_position: Tuple[float, float],
                  sat_position: Optional[np.ndarray] = None) -> float:
    """
    Transmit gain of a beam towards a ground position.

    Args:
        beam: Beam geometry with boresight and contour radius
        terminal_position: (lat, lon) in degrees
        sat_position: Satellite ECEF position in km, GEO default if omitted

    Returns:
        float: Linear transmit gain
    """
    lat, lon = terminal_position
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise ScenarioError(f"position ({lat}, {lon}) is outside the coverage area", "terminal.position")
    sat = satellite_position() if sat_position is None else sat_position
    boresight = geodetic_to_ecef(beam.lat_deg, beam.lon_deg)
    theta = angle_between(boresight - sat, geodetic_to_ecef(lat, lon) - sat)
    return rolloff_gain(beam.peak_tx_gain_dBi, theta, contour_half_angle(beam, sat))


def free_space_gain(tx_gain: float, rx_gain: float, distance_m: float, freq_hz: float,
                    normalization: float = 1.0) -> float:
    """Linear power gain Gtx*Grx/(kTW) * (c / (4 pi d f))^2."""
    if not (distance_m > 0 and math.isfinite(distance_m)):
        raise ScenarioError(f"distance must be positive (got {distance_m})", "distance")
    if not (freq_hz > 0 and math.isfinite(freq_hz)):
        raise ScenarioError(f"frequency must be positive (got {freq_hz})", "carrier_freq_Hz")
    if not (tx_gain > 0 and rx_gain > 0 and normalization > 0):
        raise ScenarioError("antenna gains and normalization must be positive", "gain")
    return tx_gain * rx_gain / normalization * (Config.SPEED_OF_LIGHT / (4.0 * math.pi * distance_m * freq_hz)) ** 2


def reindex_terminals(terminals: Sequence[Terminal], gains: np.ndarray) -> Tuple[List[Terminal], np.ndarray]:
    """Group terminals by home beam and sort each group by descending own-beam gain."""
    gains = np.asarray(gains, dtype=float)
    order = sorted(range(len(terminals)),
                   key=lambda k: (terminals[k].home_beam, -gains[terminals[k].home_beam, k], k))
    reordered = [replace(terminals[k], terminal_id=i + 1) for i, k in enumerate(order)]
    return reordered, gains[:, order]


def build_channel_matrix(beams: Sequence[BeamGeometry], terminals: Sequence[Terminal],
                         radio_params: RadioParams) -> Tuple[ChannelMatrix, List[Terminal]]:
    """
    Evaluate the link budget of every beam towards every terminal.

    Returns the channel matrix together with the terminals re-indexed into
    SIC order, since the gain columns follow that order.
    """
    sat = satellite_position(radio_params.sat_lon_deg, radio_params.sat_altitude_km)
    gains = np.zeros((len(beams), len(terminals)))
    for k, terminal in enumerate(terminals):
        distance_m = 1e3 * float(np.linalg.norm(geodetic_to_ecef(terminal.lat_deg, terminal.lon_deg) - sat))
        rx_gain = Config.db_to_linear(terminal.rx_gain_dBi)
        for b, beam in enumerate(beams):
            tx_gain = synth_tx_gain(beam, (terminal.lat_deg, terminal.lon_deg), sat)
            gains[b, k] = free_space_gain(tx_gain, rx_gain, distance_m, radio_params.carrier_freq_Hz,
                                          radio_params.gain_normalization)
    ordered, gains = reindex_terminals(terminals, gains)
    channel = ChannelMatrix(gains=gains, noise_power_W=radio_params.noise_power_W,
                            bandwidth_Hz=radio_params.bandwidth_Hz,
                            carrier_freq_Hz=radio_params.carrier_freq_Hz)
    return channel, ordered


def hex_layout(num_beams: int, spacing_km: float, center: Tuple[float, float]) -> List[Tuple[float, float]]:
    """Boresights on a hexagonal grid centred on the coverage centre."""
    cols = int(math.ceil(math.sqrt(num_beams)))
    offsets = []
    for i in range(num_beams):
        row, col = divmod(i, cols)
        east = (col + 0.5 * (row % 2)) * spacing_km
        north = row * spacing_km * math.sqrt(3.0) / 2.0
        offsets.append((north, east))
    mean_north = sum(o[0] for o in offsets) / num_beams
    mean_east = sum(o[1] for o in offsets) / num_beams
    return [offset_position(center[0], center[1], n - mean_north, e - mean_east) for n, e in offsets]


def build_conflict_set(beams: Sequence[BeamGeometry], conflict_radius_km: float) -> FrozenSet[Tuple[int, int]]:
    pairs = set()
    for a in range(len(beams)):
        for b in range(a + 1, len(beams)):
            separation = great_circle_km(beams[a].lat_deg, beams[a].lon_deg, beams[b].lat_deg, beams[b].lon_deg)
            if separation < conflict_radius_km:
                pairs.add((a, b))
    return frozenset(pairs)


def assign_home_beams(beams: Sequence[BeamGeometry], positions: Sequence[Tuple[float, float]],
                      sat_position: np.ndarray) -> List[int]:
    """Containment in a beam contour, ties and uncovered points broken by strongest gain."""
    homes = []
    for lat, lon in positions:
        tx = [synth_tx_gain(beam, (lat, lon), sat_position) for beam in beams]
        inside = [b for b, beam in enumerate(beams)
                  if great_circle_km(lat, lon, beam.lat_deg, beam.lon_deg) <= beam.contour_radius_km]
        candidates = inside if inside else range(len(beams))
        homes.append(max(candidates, key=lambda b: (tx[b], -b)))
    return homes


def _normalize_seed(seed: int) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF


def generate_scenario(spec: ScenarioSpec, seed: int) -> Scenario:
    """Synthesize a scenario; a pure function of (spec, seed)."""
    spec.validate()
    rng = np.random.default_rng(_normalize_seed(seed))
    radio = spec.radio_params()
    sat = satellite_position(spec.sat_lon_deg, spec.sat_altitude_km)

    boresights = hex_layout(spec.num_beams, spec.beam_spacing_km, (spec.center_lat_deg, spec.center_lon_deg))
    beams = [BeamGeometry(beam_id=b + 1, lat_deg=lat, lon_deg=lon, contour_radius_km=spec.contour_radius_km,
                          peak_tx_gain_dBi=spec.peak_tx_gain_dBi) for b, (lat, lon) in enumerate(boresights)]

    positions = []
    for beam in beams:
        for _ in range(spec.terminals_per_beam):
            radius = spec.contour_radius_km * math.sqrt(rng.uniform())
            bearing = 2.0 * math.pi * rng.uniform()
            positions.append(offset_position(beam.lat_deg, beam.lon_deg,
                                             radius * math.cos(bearing), radius * math.sin(bearing)))
    demands = rng.uniform(spec.demand_min_bps, spec.demand_max_bps, size=len(positions))
    homes = assign_home_beams(beams, positions, sat)

    terminals = [Terminal(terminal_id=k + 1, home_beam=homes[k], lat_deg=lat, lon_deg=lon,
                          rx_gain_dBi=spec.rx_gain_dBi, demand_bps=float(demands[k]),
                          min_rate_bps=spec.min_rate_bps)
                 for k, (lat, lon) in enumerate(positions)]
    channel, terminals = build_channel_matrix(beams, terminals, radio)

    scenario = Scenario(beams=tuple(beams), terminals=tuple(terminals), channel=channel,
                        T=spec.num_timeslots, B0=spec.max_active_beams, K0=spec.max_multiplexed,
                        P_beam_W=Config.dbw_to_watts(spec.beam_power_dbw),
                        conflict_set=build_conflict_set(beams, spec.conflict_radius_km),
                        seed=int(seed), scenario_id=f"gen-{int(seed)}")
    if spec.cross_gain_scale != 1.0:
        scenario = scale_cross_gains(scenario, spec.cross_gain_scale)
    logger.debug(f"Generated scenario {scenario.scenario_id}: B={scenario.B}, K={scenario.K}, "
                 f"|conflicts|={len(scenario.conflict_set)}")
    return scenario


def scale_cross_gains(scenario: Scenario, factor: float) -> Scenario:
    """Multiply every gain from a beam to a terminal outside it by ``factor``."""
    gains = np.array(scenario.channel.gains)
    own = np.zeros_like(gains, dtype=bool)
    own[scenario.beam_of, np.arange(scenario.K)] = True
    gains[~own] *= factor
    return scenario.with_channel(replace(scenario.channel, gains=gains))


def conflict_graph(scenario: Scenario) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(scenario.B))
    graph.add_edges_from(scenario.conflict_set)
    return graph


def build_beam_groups(scenario: Scenario) -> List[Tuple[int, ...]]:
    """
    Independent beam sets of size <= B0 covering every beam.

    Maximal independent sets of the conflict graph are split into B0-sized
    chunks in index order, deduplicated, and listed largest first.
    """
    complement = nx.complement(conflict_graph(scenario))
    groups = set()
    for clique in nx.find_cliques(complement):
        members = sorted(clique)
        for start in range(0, len(members), scenario.B0):
            groups.add(tuple(members[start:start + scenario.B0]))
    return sorted(groups, key=lambda g: (-len(g), g))


def validate_triples(matching_triples: Iterable[Tuple[int, int, int]], B: int) -> List[Tuple[int, int, int]]:
    """Check a triple family (slot x, first-subset beam y, second-subset beam z) against B."""
    half = B // 2
    triples = []
    for triple in matching_triples:
        x, y, z = (int(v) for v in triple)
        if not (0 <= x < half and 0 <= y < half and 0 <= z < half):
            raise ScenarioError(f"triple ({x}, {y}, {z}) is out of range", "matching_triples")
        triples.append((x, y, z))
    return sorted(set(triples))


def make_3dm_instance(matching_triples: Optional[Iterable[Tuple[int, int, int]]], B: int, eps: float) -> Scenario:
    """
    Hardness instance from a three-dimensional matching family.

    Beams 0..B/2-1 form the first subset and B/2..B-1 the second, with one
    terminal per beam, T = B/2 and an empty conflict set. A triple (x, y, z)
    reads as "slot x lights beam y together with beam B/2 + z". The triples
    are only validated here; solvers.schedulers.matching_schedule enforces
    them slot by slot.
    """
    if B < 4 or B % 2:
        raise ScenarioError(f"B must be an even number >= 4 (got {B})", "B")
    bound = 2.0 ** (1.0 / B) - 1.0
    if not 0 < eps <= bound:
        raise ScenarioError(f"eps must lie in (0, {bound}] (got {eps})", "eps")
    half = B // 2
    if matching_triples is not None:
        validate_triples(matching_triples, B)

    subset = np.arange(B) >= half
    gains = np.where(subset[:, None] == subset[None, :], 1.0 + eps / 2.0, eps)
    np.fill_diagonal(gains, 1.0 + eps)

    beams = tuple(BeamGeometry(beam_id=b + 1, lat_deg=0.0, lon_deg=float(b), contour_radius_km=1.0)
                  for b in range(B))
    terminals = tuple(Terminal(terminal_id=b + 1, home_beam=b, lat_deg=0.0, lon_deg=float(b), rx_gain_dBi=0.0,
                               demand_bps=1e3, min_rate_bps=1.0) for b in range(B))
    channel = ChannelMatrix(gains=gains, noise_power_W=eps, bandwidth_Hz=1.0)
    return Scenario(beams=beams, terminals=terminals, channel=channel, T=half, B0=2, K0=1, P_beam_W=1.0,
                    scenario_id=f"3dm-B{B}")


def scenario_from_gains(gains: Sequence[Sequence[float]], home_beams: Sequence[int], demands_bps: Sequence[float],
                        T: int, B0: int, K0: int, P_beam_W: float = 1.0, noise_power_W: float = 1.0,
                        bandwidth_Hz: float = 1.0, min_rates_bps: Optional[Sequence[float]] = None,
                        conflicts: Iterable[Tuple[int, int]] = (), scenario_id: str = 'explicit') -> Scenario:
    """Build a scenario straight from a gain matrix, re-indexing terminals into SIC order."""
    gains = np.asarray(gains, dtype=float)
    B, K = gains.shape
    min_rates = [0.0] * K if min_rates_bps is None else list(min_rates_bps)
    beams = tuple(BeamGeometry(beam_id=b + 1, lat_deg=0.0, lon_deg=float(b), contour_radius_km=1.0)
                  for b in range(B))
    terminals = [Terminal(terminal_id=k + 1, home_beam=int(home_beams[k]), lat_deg=0.0, lon_deg=0.0,
                          rx_gain_dBi=0.0, demand_bps=float(demands_bps[k]), min_rate_bps=float(min_rates[k]))
                 for k in range(K)]
    terminals, gains = reindex_terminals(terminals, gains)
    channel = ChannelMatrix(gains=gains, noise_power_W=noise_power_W, bandwidth_Hz=bandwidth_Hz)
    return Scenario(beams=beams, terminals=tuple(terminals), channel=channel, T=T, B0=B0, K0=K0,
                    P_beam_W=P_beam_W, conflict_set=frozenset(tuple(p) for p in conflicts),
                    scenario_id=scenario_id)
