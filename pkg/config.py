"""
Configuration file for bhnoma

All configurable parameters are defined here for easy maintenance and customization.
"""

import os
import json
import logging
from typing import Dict, Any, List


class ConfigError(ValueError):
    """Raised when a configuration value or override file is invalid."""


class Config:
    """Configuration class for the beam-hopping NOMA optimizer."""

    # Physical constants
    SPEED_OF_LIGHT = 299792458.0  # m/s
    BOLTZMANN = 1.380649e-23  # J/K
    EARTH_RADIUS_KM = 6378.137

    # Radio settings
    CARRIER_FREQ_HZ = 20e9
    BANDWIDTH_HZ = 500e6
    BEAM_POWER_DBW = 20.0  # per-beam budget P
    RX_GAIN_DBI = 42.1
    NOISE_POWER_DBW = -126.47
    PEAK_TX_GAIN_DBI = 52.0
    CONTOUR_ROLLOFF_DB = 4.3  # gain drop at the beam contour

    # Satellite geometry
    SAT_LON_DEG = 13.0
    SAT_ALTITUDE_KM = 35786.0

    # Coverage layout for synthesized scenarios
    COVERAGE_CENTER_LAT_DEG = 48.0
    COVERAGE_CENTER_LON_DEG = 10.0
    CONTOUR_RADIUS_KM = 150.0
    BEAM_SPACING_KM = 260.0
    CONFLICT_RADIUS_KM = 300.0  # boresight separation below which beams conflict

    # Problem sizes
    NUM_TIMESLOTS = 256
    NUM_BEAMS = 16
    MAX_ACTIVE_BEAMS = 5  # B0
    TERMINALS_PER_BEAM = 5
    MAX_MULTIPLEXED = 3  # K0

    # Traffic
    MIN_RATE_BPS = 5e6
    DEMAND_MIN_BPS = 100e6
    DEMAND_MAX_BPS = 1.2e9

    # Desk-scale sizes
    DESK_NUM_TIMESLOTS = 16
    DESK_NUM_BEAMS = 6
    DESK_MAX_ACTIVE_BEAMS = 2
    DESK_TERMINALS_PER_BEAM = 3
    DESK_MAX_MULTIPLEXED = 2

    # Imperfect SIC
    SIC_ERROR_RATIO = 1e-4

    # Power allocation settings
    ALG1_MAX_ITERS = 20  # N
    CONVERGENCE_TOL = 1e-4  # relative objective change
    INNER_TOL = 1e-7  # barrier duality-gap bound, normalized units
    LM_TOL = 1e-8
    LM_MAX_ITERS = 100
    BARRIER_MU = 10.0
    BARRIER_T0 = 1.0
    MAX_NEWTON_ITERS = 60
    LOG_FLOOR = 1e-12
    SLACK_PENALTY = 1e2
    FEASIBILITY_TOL = 1e-6  # relative, rate constraints only
    INTERIOR_MIX = 1e-9  # blend toward the simplex centre before a convex solve

    # Scheduler settings
    UBA_MAX_ITERS = 100
    STAGE_ITERS = 5
    SOFTPLUS_SHARPNESS = 1e3  # per bit/s/Hz
    PENALTY_SCALE = 2.0  # phi_k = PENALTY_SCALE * residual demand

    # Bounding settings
    NODE_BUDGET = 10000
    GAP_FLOOR = 1e-9  # Mbps^2

    # Logging settings
    LOG_LEVEL = "INFO"
    LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
    LOG_FILE = 'bhnoma.log'
    LOG_ENV_VAR = 'BHNOMA_LOG'

    # Remote ingest settings
    HTTP_TIMEOUT = 30  # seconds
    MAX_RETRIES = 3
    RETRY_DELAY = 5  # seconds

    # Process exit codes
    EXIT_OK = 0
    EXIT_ERROR = 1
    EXIT_INFEASIBLE = 3

    # Solver schemes, keyed by --algo name
    SCHEMES = {
        'uba': {'enabled': True},
        'ejpbt': {'enabled': True},
        'lba': {'enabled': False, 'node_budget': NODE_BUDGET},
        'bh-oma': {'enabled': True},
        '1c-noma': {'enabled': True, 'color_count': 1},
        '2c-noma': {'enabled': False, 'color_count': 2},
        '4c-noma': {'enabled': False, 'color_count': 4},
        'ra': {'enabled': True},
        'maxsinr': {'enabled': True},
        'mincci': {'enabled': True},
        'scheme1': {'enabled': False, 'objective': 'max_min_octr'},
        'scheme2': {'enabled': False, 'objective': 'min_unmet'},
    }

    @classmethod
    def get_environment_variables(cls) -> Dict[str, str]:
        """Get optional environment variables."""
        return {
            'BHNOMA_LOG': os.getenv('BHNOMA_LOG'),
            'BHNOMA_CONFIG': os.getenv('BHNOMA_CONFIG'),
            'BHNOMA_JOBS': os.getenv('BHNOMA_JOBS'),
        }

    @classmethod
    def get_log_level(cls) -> int:
        """Resolve the logging level from BHNOMA_LOG, falling back to LOG_LEVEL."""
        name = (os.getenv(cls.LOG_ENV_VAR) or cls.LOG_LEVEL).strip().upper()
        level = getattr(logging, name, None)
        if not isinstance(level, int):
            raise ConfigError(f"{cls.LOG_ENV_VAR} must be one of DEBUG, INFO, WARNING, ERROR (got '{name}')")
        return level

    @classmethod
    def db_to_linear(cls, db: float) -> float:
        """Convert decibels to a linear ratio."""
        return 10.0 ** (db / 10.0)

    @classmethod
    def dbw_to_watts(cls, dbw: float) -> float:
        """Convert dBW to watts."""
        return cls.db_to_linear(dbw)

    @classmethod
    def full_scale_spec(cls) -> Dict[str, Any]:
        """Full-scale generator settings."""
        return {
            'num_beams': cls.NUM_BEAMS,
            'num_timeslots': cls.NUM_TIMESLOTS,
            'max_active_beams': cls.MAX_ACTIVE_BEAMS,
            'max_multiplexed': cls.MAX_MULTIPLEXED,
            'terminals_per_beam': cls.TERMINALS_PER_BEAM,
            'demand_min_bps': cls.DEMAND_MIN_BPS,
            'demand_max_bps': cls.DEMAND_MAX_BPS,
            'min_rate_bps': cls.MIN_RATE_BPS,
            'beam_power_dbw': cls.BEAM_POWER_DBW,
            'noise_power_dbw': cls.NOISE_POWER_DBW,
        }

    @classmethod
    def desk_spec(cls) -> Dict[str, Any]:
        """Desk-scale generator settings."""
        spec = cls.full_scale_spec()
        spec.update({
            'num_beams': cls.DESK_NUM_BEAMS,
            'num_timeslots': cls.DESK_NUM_TIMESLOTS,
            'max_active_beams': cls.DESK_MAX_ACTIVE_BEAMS,
            'max_multiplexed': cls.DESK_MAX_MULTIPLEXED,
            'terminals_per_beam': cls.DESK_TERMINALS_PER_BEAM,
        })
        return spec

    @classmethod
    def get_enabled_schemes(cls) -> Dict[str, Dict[str, Any]]:
        """Get enabled solver schemes."""
        return {
            name: config for name, config in cls.SCHEMES.items()
            if config.get('enabled', False)
        }

    @classmethod
    def get_scheme_config(cls, scheme_name: str) -> Dict[str, Any]:
        """Get configuration for a specific scheme."""
        return dict(cls.SCHEMES.get(scheme_name, {}))

    @classmethod
    def is_scheme_enabled(cls, scheme_name: str) -> bool:
        """Check if a specific scheme is enabled."""
        return cls.get_scheme_config(scheme_name).get('enabled', False)

    @classmethod
    def scheme_names(cls) -> List[str]:
        """All recognised --algo names."""
        return list(cls.SCHEMES.keys())

    @classmethod
    def load_overrides(cls, path: str) -> Dict[str, Any]:
        """Load a JSON override file for solver settings."""
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                overrides = json.load(handle)
        except OSError as e:
            raise ConfigError(f"Cannot read config file '{path}': {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file '{path}' is not valid JSON: {e}")

        if not isinstance(overrides, dict):
            raise ConfigError(f"Config file '{path}' must contain a JSON object")

        allowed = {'solver', 'scheduler', 'ejpbt', 'lba', 'eval', 'schemes'}
        unknown = sorted(set(overrides) - allowed)
        if unknown:
            raise ConfigError(f"Unknown config sections: {', '.join(unknown)}")
        return overrides
