"""
Benchmark schemes.
"""

import logging
from typing import Dict, Any

from model.scenario import Scenario
from model.linkmodel import Solution
from solvers.benchmarks import (run_bh_oma, run_color_noma, run_ra, run_maxsinr, run_mincci, run_alt_objective,
                                build_color_plan, COLOR_COUNTS)
from .base_scheme import BaseScheme

logger = logging.getLogger(__name__)


class BhOmaScheme(BaseScheme):
    """Beam hopping with one terminal per beam-slot."""

    def solve(self, scenario: Scenario) -> Solution:
        return run_bh_oma(scenario, self.scheduler_config())


class ColorNomaScheme(BaseScheme):
    """Always-on NOMA over a 1, 2 or 4 color reuse pattern."""

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.color_count = int(config.get('color_count', 1))

    def validate_config(self) -> bool:
        if self.color_count not in COLOR_COUNTS:
            logger.error(f"{self.name}: color_count must be one of {COLOR_COUNTS}")
            return False
        return super().validate_config()

    def evaluation_scenario(self, scenario: Scenario) -> Scenario:
        return build_color_plan(scenario, self.color_count).apply(scenario)

    def solve(self, scenario: Scenario) -> Solution:
        return run_color_noma(scenario, self.color_count, self.scheduler_config())


class RaScheme(BaseScheme):
    """Gives each beam a number of slots in proportion to its demand."""

    def solve(self, scenario: Scenario) -> Solution:
        return run_ra(scenario, self.ejpbt_config())


class MaxSinrScheme(BaseScheme):
    """Lights the beams with the largest estimated SINR in each slot."""

    def solve(self, scenario: Scenario) -> Solution:
        return run_maxsinr(scenario, self.ejpbt_config())


class MinCciScheme(BaseScheme):
    """Lights the beams with the least mutual co-channel interference in each slot."""

    def solve(self, scenario: Scenario) -> Solution:
        return run_mincci(scenario, self.ejpbt_config())


class AltObjectiveScheme(BaseScheme):
    """UBA under the max-min served fraction or the total unmet rate."""

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.objective = config.get('objective', 'max_min_octr')

    def validate_config(self) -> bool:
        if self.objective not in ('max_min_octr', 'min_unmet'):
            logger.error(f"{self.name}: objective must be 'max_min_octr' or 'min_unmet'")
            return False
        return super().validate_config()

    def solve(self, scenario: Scenario) -> Solution:
        return run_alt_objective(scenario, self.objective, self.scheduler_config())
