"""
BH-NOMA schemes: swap matching, staged greedy and the lower bound.
"""

import logging
from typing import Dict, Any, Optional

from model.scenario import Scenario
from model.linkmodel import Solution
from solvers.schedulers import run_uba, run_ejpbt, SchedulingInfeasibleError
from solvers.bounding import LbaResult, solve_lba
from .base_scheme import BaseScheme

logger = logging.getLogger(__name__)


class UbaScheme(BaseScheme):
    """Swap-matching upper bound."""

    def solve(self, scenario: Scenario) -> Solution:
        return run_uba(scenario, config=self.scheduler_config())


class EjpbtScheme(BaseScheme):
    """Slot-by-slot relaxed greedy."""

    def solve(self, scenario: Scenario) -> Solution:
        return run_ejpbt(scenario, self.ejpbt_config())


class LbaScheme(BaseScheme):
    """Interference-free lower bound; the returned solution is relaxed, not deployable."""

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.result: Optional[LbaResult] = None

    def lba_config(self):
        settings = dict(self.config.get('lba', {}))
        if 'node_budget' in self.config:
            settings.setdefault('node_budget', self.config['node_budget'])
        self.config = dict(self.config, lba=settings)
        return super().lba_config()

    def solve(self, scenario: Scenario) -> Solution:
        self.result = solve_lba(scenario, self.lba_config())
        if self.result.status == 'infeasible':
            raise SchedulingInfeasibleError(f"relaxation of {scenario.scenario_id} has no feasible point")
        return self.result.solution
