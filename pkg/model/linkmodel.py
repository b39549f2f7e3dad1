"""
Link evaluation: SINR, rates, capacities, constraint checks and metrics.

Every scheduler and benchmark reports through this module, so the same
formulas decide what a schedule is worth regardless of how it was found.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional, Tuple, Iterable

import numpy as np

from config import Config
from model.scenario import Scenario
from model.scenario_io import write_csv

logger = logging.getLogger(__name__)

METRICS = ('sum_squared_gap', 'worst_octr', 'unmet')
MBPS = 1e6


@dataclass(frozen=True, eq=False)
class Assignment:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=bool)
        beta = np.array(self.beta, dtype=bool)
        if alpha.ndim != 2 or beta.ndim != 2 or alpha.shape[1] != beta.shape[1]:
            raise ValueError(f"alpha {alpha.shape} and beta {beta.shape} must be B x T and K x T")
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'beta', beta)

    @classmethod
    def empty(cls, scenario: Scenario) -> 'Assignment':
        return cls(np.zeros((scenario.B, scenario.T), bool), np.zeros((scenario.K, scenario.T), bool))

    @classmethod
    def from_sets(cls, scenario: Scenario, beam_slots: Iterable[Tuple[int, int]],
                  terminal_slots: Iterable[Tuple[int, int]]) -> 'Assignment':
        alpha = np.zeros((scenario.B, scenario.T), bool)
        beta = np.zeros((scenario.K, scenario.T), bool)
        for b, t in beam_slots:
            alpha[b, t] = True
        for k, t in terminal_slots:
            beta[k, t] = True
        return cls(alpha, beta)

    def scheduled(self, scenario: Scenario) -> np.ndarray:
        """K x T mask of terminals that are scheduled inside an illuminated beam."""
        return self.beta & self.alpha[scenario.beam_of, :]

    def beam_slots(self) -> List[Tuple[int, int]]:
        return [(int(b), int(t)) for b, t in zip(*np.nonzero(self.alpha))]

    def terminal_slots(self) -> List[Tuple[int, int]]:
        return [(int(k), int(t)) for k, t in zip(*np.nonzero(self.beta))]


@dataclass(frozen=True, eq=False)
class PowerPlan:
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2:
            raise ValueError(f"power plan must be K x T (got shape {p.shape})")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("powers must be finite and nonnegative")
        p.setflags(write=False)
        object.__setattr__(self, 'p', p)

    @classmethod
    def zeros(cls, scenario: Scenario) -> 'PowerPlan':
        return cls(np.zeros((scenario.K, scenario.T)))

    @property
    def total_W(self) -> float:
        return float(self.p.sum())


@dataclass(frozen=True)
class EvalConfig:
    sic_error_ratio: float = Config.SIC_ERROR_RATIO

    def validate(self) -> None:
        if not 0.0 <= self.sic_error_ratio <= 1.0:
            raise ValueError(f"SIC error ratio must lie in [0, 1] (got {self.sic_error_ratio})")


@dataclass(frozen=True)
class ConstraintRegime:
    """Which structural constraints a scheme is held to."""
    beam_cap: bool = True
    conflicts: bool = True


@dataclass(frozen=True)
class Violation:
    constraint: str
    indices: Tuple[int, ...]
    slack: float


@dataclass
class FeasibilityReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def by_constraint(self, name: str) -> List[Violation]:
        return [v for v in self.violations if v.constraint == name]


@dataclass(eq=False)
class Solution:
    assignment: Assignment
    power: PowerPlan
    per_slot_rates: np.ndarray
    capacities: np.ndarray
    objective: float
    aux_metrics: Dict[str, float]
    status: str = 'feasible'
    violations: List[Violation] = field(default_factory=list)
    scheme: str = ''
    trace: List[Dict[str, Any]] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status != 'infeasible'


def interference_weights(scenario: Scenario, eta: float) -> np.ndarray:
    """
    Weight of interferer i on victim j.

    Other beams count fully. Inside a beam the stronger terminals (lower
    index) are not cancelled by a weaker victim, and the weaker ones leave a
    residual fraction eta after SIC.
    """
    idx = np.arange(scenario.K)
    same_beam = scenario.beam_of[:, None] == scenario.beam_of[None, :]
    weights = np.ones((scenario.K, scenario.K))
    weights[same_beam & (idx[:, None] > idx[None, :])] = eta
    np.fill_diagonal(weights, 0.0)
    return weights


def coupling_matrix(scenario: Scenario, eta: float) -> np.ndarray:
    """C[i, j] = weight(i, j) * |h_{b(i) j}|^2, so interference on j is C[:, j] @ p."""
    return interference_weights(scenario, eta) * scenario.channel.gains[scenario.beam_of, :]


def sinr_matrix(scenario: Scenario, assignment: Assignment, power: PowerPlan,
                eval_cfg: Optional[EvalConfig] = None) -> np.ndarray:
    eval_cfg = eval_cfg or EvalConfig()
    scheduled = assignment.scheduled(scenario)
    p_eff = power.p * scheduled
    interference = coupling_matrix(scenario, eval_cfg.sic_error_ratio).T @ p_eff
    signal = scenario.direct_gains[:, None] * p_eff
    return np.where(scheduled, signal / (interference + scenario.noise_power_W), 0.0)


def compute_sinr(scenario: Scenario, assignment: Assignment, power: PowerPlan, t: int, k: int,
                 eval_cfg: Optional[EvalConfig] = None) -> float:
    """SINR of terminal k at slot t; the terminal must be scheduled."""
    if not assignment.scheduled(scenario)[k, t]:
        raise ValueError(f"terminal {k + 1} is not scheduled at slot {t}")
    return float(sinr_matrix(scenario, assignment, power, eval_cfg)[k, t])


def compute_rates(scenario: Scenario, assignment: Assignment, power: PowerPlan,
                  eval_cfg: Optional[EvalConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Per-slot rates W*log2(1+SINR) and their row sums."""
    sinr = sinr_matrix(scenario, assignment, power, eval_cfg)
    rates = scenario.bandwidth_Hz * np.log2(1.0 + sinr)
    rates = np.where(assignment.scheduled(scenario), rates, 0.0)
    return rates, rates.sum(axis=1)


def check_feasibility(scenario: Scenario, assignment: Assignment, power: PowerPlan, capacities: np.ndarray,
                      regime: Optional[ConstraintRegime] = None,
                      tol: float = Config.FEASIBILITY_TOL) -> FeasibilityReport:
    """List every violated constraint with its indices and slack."""
    regime = regime or ConstraintRegime()
    report = FeasibilityReport()
    P = scenario.P_beam_W
    power_tol = 1e-9 * P
    alpha, beta, p = assignment.alpha, assignment.beta, power.p

    for b, members in enumerate(scenario.members):
        if len(members) == 0:
            continue
        beam_power = p[members, :].sum(axis=0)
        for t in np.flatnonzero(beam_power > P + power_tol):
            report.violations.append(Violation('beam_power', (b, int(t)), float(P - beam_power[t])))
        counts = beta[members, :].sum(axis=0)
        limit = scenario.K0 * alpha[b, :]
        for t in np.flatnonzero(counts > limit):
            report.violations.append(Violation('multiplexing', (b, int(t)), float(limit[t] - counts[t])))

    if regime.beam_cap:
        active = alpha.sum(axis=0)
        for t in np.flatnonzero(active > scenario.B0):
            report.violations.append(Violation('active_beams', (int(t),), float(scenario.B0 - active[t])))

    over = p > P * beta + power_tol
    for k, t in zip(*np.nonzero(over)):
        report.violations.append(Violation('power_gate', (int(k), int(t)), float(P * beta[k, t] - p[k, t])))

    rmin = scenario.min_rates
    short = capacities < rmin * (1.0 - tol)
    for k in np.flatnonzero(short):
        report.violations.append(Violation('min_rate', (int(k),), float(capacities[k] - rmin[k])))

    if regime.conflicts:
        for a, b in sorted(scenario.conflict_set):
            for t in np.flatnonzero(alpha[a, :] & alpha[b, :]):
                report.violations.append(Violation('conflict', (a, b, int(t)), -1.0))

    if report.violations:
        logger.debug(f"Feasibility check found {len(report.violations)} violations")
    return report


def score(scenario: Scenario, capacities: np.ndarray, metric: str) -> float:
    """Evaluate a capacity vector against demands, in Mbps units."""
    capacities = np.asarray(capacities, dtype=float)
    demands = scenario.demands
    if metric == 'sum_squared_gap':
        return float(np.sum(((capacities - demands) / MBPS) ** 2))
    if metric == 'worst_octr':
        served = demands > 0
        if not np.any(served):
            return 1.0
        return float(np.min(capacities[served] / demands[served]))
    if metric == 'unmet':
        return float(np.sum(np.maximum(demands - capacities, 0.0)) / MBPS)
    raise ValueError(f"Unknown metric '{metric}'; expected one of {', '.join(METRICS)}")


def evaluate_solution(scenario: Scenario, assignment: Assignment, power: PowerPlan,
                      eval_cfg: Optional[EvalConfig] = None, regime: Optional[ConstraintRegime] = None,
                      scheme: str = '', trace: Optional[List[Dict[str, Any]]] = None) -> Solution:
    """Rates, metrics and a feasibility verdict for a schedule and power plan."""
    rates, capacities = compute_rates(scenario, assignment, power, eval_cfg)
    report = check_feasibility(scenario, assignment, power, capacities, regime)
    scheduled = assignment.scheduled(scenario)
    per_beam_slot = np.zeros((scenario.B, scenario.T), dtype=int)
    np.add.at(per_beam_slot, scenario.beam_of, scheduled.astype(int))
    aux = {
        'sum_squared_gap': score(scenario, capacities, 'sum_squared_gap'),
        'worst_octr': score(scenario, capacities, 'worst_octr'),
        'unmet': score(scenario, capacities, 'unmet'),
        'total_power_W': power.total_W,
        'active_beam_slots': int(assignment.alpha.sum()),
        'multiplexed_slots': int(np.sum(per_beam_slot >= 2)),
    }
    return Solution(assignment=assignment, power=power, per_slot_rates=rates, capacities=capacities,
                    objective=aux['sum_squared_gap'], aux_metrics=aux,
                    status='feasible' if report.feasible else 'infeasible',
                    violations=report.violations, scheme=scheme, trace=list(trace or []))


def write_solution_csv(path: str, scenario: Scenario, solution: Solution,
                       eval_cfg: Optional[EvalConfig] = None) -> None:
    """Dump slot,beam,terminal,power_W,sinr,rate_bps rows; idle active beams get an empty terminal."""
    sinr = sinr_matrix(scenario, solution.assignment, solution.power, eval_cfg)
    scheduled = solution.assignment.scheduled(scenario)
    rows = []
    for t in range(scenario.T):
        for b in range(scenario.B):
            if not solution.assignment.alpha[b, t]:
                continue
            members = [k for k in scenario.members[b] if scheduled[k, t]]
            if not members:
                rows.append({'slot': t, 'beam': b + 1, 'terminal': '', 'power_W': '', 'sinr': '', 'rate_bps': ''})
            for k in members:
                rows.append({'slot': t, 'beam': b + 1, 'terminal': int(k) + 1,
                             'power_W': repr(float(solution.power.p[k, t])),
                             'sinr': repr(float(sinr[k, t])),
                             'rate_bps': repr(float(solution.per_slot_rates[k, t]))})
    write_csv(path, ['slot', 'beam', 'terminal', 'power_W', 'sinr', 'rate_bps'], rows)


def write_metrics_csv(path: str, solution: Solution) -> None:
    rows = [{'metric': 'status', 'value': solution.status}]
    for name in ('sum_squared_gap', 'worst_octr', 'unmet', 'total_power_W',
                 'active_beam_slots', 'multiplexed_slots'):
        rows.append({'metric': name, 'value': repr(solution.aux_metrics[name])})
    rows.append({'metric': 'runtime_s', 'value': repr(float(solution.runtime_s))})
    write_csv(path, ['metric', 'value'], rows)


def load_solution_csv(path: str, scenario: Scenario) -> Tuple[Assignment, PowerPlan]:
    """Rebuild the schedule and power plan from a solution dump."""
    alpha = np.zeros((scenario.B, scenario.T), bool)
    beta = np.zeros((scenario.K, scenario.T), bool)
    p = np.zeros((scenario.K, scenario.T))
    with open(path, 'r', encoding='utf-8', newline='') as handle:
        for line, row in enumerate(csv.DictReader(handle), start=2):
            try:
                t, b = int(row['slot']), int(row['beam']) - 1
                alpha[b, t] = True
                if row['terminal']:
                    k = int(row['terminal']) - 1
                    beta[k, t] = True
                    p[k, t] = float(row['power_W'])
            except (KeyError, ValueError, IndexError) as e:
                raise ValueError(f"{path}:{line}: malformed solution row ({e})")
    return Assignment(alpha, beta), PowerPlan(p)
