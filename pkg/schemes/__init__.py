"""
Solver schemes module for bhnoma.

This module contains one scheme class per --algo name.
"""

from typing import Dict, Any, Optional

from config import Config
from .base_scheme import BaseScheme
from .bhnoma_schemes import UbaScheme, EjpbtScheme, LbaScheme
from .benchmark_schemes import (BhOmaScheme, ColorNomaScheme, RaScheme, MaxSinrScheme, MinCciScheme,
                                AltObjectiveScheme)

SCHEME_CLASSES = {
    'uba': UbaScheme,
    'ejpbt': EjpbtScheme,
    'lba': LbaScheme,
    'bh-oma': BhOmaScheme,
    '1c-noma': ColorNomaScheme,
    '2c-noma': ColorNomaScheme,
    '4c-noma': ColorNomaScheme,
    'ra': RaScheme,
    'maxsinr': MaxSinrScheme,
    'mincci': MinCciScheme,
    'scheme1': AltObjectiveScheme,
    'scheme2': AltObjectiveScheme,
}


def scheme_settings(name: str, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Registry entry for ``name`` merged with the sections of a --config document."""
    overrides = overrides or {}
    settings = Config.get_scheme_config(name)
    settings.update(overrides.get('schemes', {}).get(name, {}))
    solver = dict(overrides.get('solver', {}))
    solver.update(overrides.get('eval', {}))
    settings['solver'] = solver
    for section in ('scheduler', 'ejpbt', 'lba'):
        settings[section] = dict(overrides.get(section, {}))
    settings['name'] = name
    return settings


def create_scheme(name: str, overrides: Optional[Dict[str, Any]] = None) -> BaseScheme:
    """
    Build the scheme registered under ``name``.

    Raises:
        ValueError: for an unknown scheme name
    """
    if name not in SCHEME_CLASSES:
        raise ValueError(f"Unknown scheme '{name}'; expected one of {', '.join(SCHEME_CLASSES)}")
    return SCHEME_CLASSES[name](scheme_settings(name, overrides))


__all__ = ['BaseScheme', 'UbaScheme', 'EjpbtScheme', 'LbaScheme', 'BhOmaScheme', 'ColorNomaScheme', 'RaScheme',
           'MaxSinrScheme', 'MinCciScheme', 'AltObjectiveScheme', 'SCHEME_CLASSES', 'scheme_settings',
           'create_scheme']
