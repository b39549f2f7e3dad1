"""
Base solver scheme class.

Defines the interface that all solver schemes must implement.
"""

from abc import ABC, abstractmethod
from typing import Dict, Any
import time
import logging

from config import ConfigError
from model.scenario import Scenario
from model.linkmodel import Solution
from solvers.power_solver import SolverConfig
from solvers.schedulers import SchedulerConfig, EjpbtConfig
from solvers.bounding import LbaConfig

logger = logging.getLogger(__name__)


class BaseScheme(ABC):
    """Base class for all solver schemes."""

    def __init__(self, config: Dict[str, Any]):
        """Initialize the scheme with configuration."""
        self.config = config
        self.name = config.get('name', self.__class__.__name__)
        logger.info(f"Initialized {self.name} scheme")

    @abstractmethod
    def solve(self, scenario: Scenario) -> Solution:
        """
        Produce a schedule and power plan for the scenario.

        Args:
            scenario: problem instance

        Returns:
            Solution: evaluated solution; infeasible outcomes carry
            status 'infeasible' and their violations
        """
        pass

    def solver_config(self) -> SolverConfig:
        return SolverConfig.from_dict(self.config.get('solver', {}))

    def scheduler_config(self) -> SchedulerConfig:
        return SchedulerConfig.from_dict(self.config.get('scheduler', {}), self.solver_config())

    def ejpbt_config(self) -> EjpbtConfig:
        return EjpbtConfig.from_dict(self.config.get('ejpbt', {}), self.solver_config())

    def lba_config(self) -> LbaConfig:
        return LbaConfig.from_dict(self.config.get('lba', {}), self.solver_config())

    def evaluation_scenario(self, scenario: Scenario) -> Scenario:
        """Channel the returned solution's rates were computed on."""
        return scenario

    def validate_config(self) -> bool:
        """
        Validate scheme configuration.

        Returns:
            bool: True if configuration is valid, False otherwise
        """
        try:
            self.scheduler_config().validate()
            self.ejpbt_config().validate()
            self.lba_config().validate()
        except (ConfigError, TypeError) as e:
            logger.error(f"{self.name} configuration is invalid: {e}")
            return False
        return True

    def run(self, scenario: Scenario) -> Solution:
        """Solve with timing and a one-line summary."""
        logger.info(f"Running {self.name} on {scenario.scenario_id}...")
        start = time.perf_counter()
        solution = self.solve(scenario)
        solution.runtime_s = time.perf_counter() - start
        solution.scheme = self.name
        logger.info(f"{self.name} finished in {solution.runtime_s:.2f}s: status {solution.status}, "
                    f"sum squared gap {solution.aux_metrics['sum_squared_gap']:.6g} Mbps^2")
        return solution
