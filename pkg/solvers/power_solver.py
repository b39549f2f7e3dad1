"""
Power allocation for a fixed schedule.

With the auxiliary theta held fixed, the quadratic transform
W*log2(1 + 2*theta*sqrt(g*p) - theta^2*(I + sigma^2)) is concave in the
powers, so closing the demand gap becomes a convex program. The outer loop
alternates theta updates with barrier solves of that program; afterwards a
Levenberg-Marquardt pass trims over-served terminals down to their demand.

Internally powers are x = p / P, SNR gains a = |h|^2 P / sigma^2 and rates are
in bit/s/Hz.
"""

import math
import logging
from dataclasses import dataclass, fields
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np

from config import Config, ConfigError
from model.scenario import Scenario
from model.linkmodel import Assignment, PowerPlan, EvalConfig, coupling_matrix, compute_rates, MBPS
from solvers.barrier import BarrierProblem, BarrierSettings, minimize, phase_one

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
OBJECTIVES = ('sum_squared_gap', 'max_min_octr', 'min_unmet')
MAX_TRIM_ROUNDS = 5


class PowerInfeasibleError(Exception):
    """No power plan meets every minimum rate under the given schedule."""

    def __init__(self, terminal: int, shortfall_bps: float, power: Optional[PowerPlan] = None):
        self.terminal = terminal
        self.shortfall_bps = shortfall_bps
        self.power = power
        super().__init__(f"terminal {terminal + 1} misses its minimum rate by {shortfall_bps:.6g} bps")


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = Config.ALG1_MAX_ITERS
    convergence_tol: float = Config.CONVERGENCE_TOL
    inner_tol: float = Config.INNER_TOL
    lm_tol: float = Config.LM_TOL
    lm_max_iters: int = Config.LM_MAX_ITERS
    barrier_mu: float = Config.BARRIER_MU
    barrier_t0: float = Config.BARRIER_T0
    max_newton_iters: int = Config.MAX_NEWTON_ITERS
    log_floor: float = Config.LOG_FLOOR
    slack_penalty: float = Config.SLACK_PENALTY
    feasibility_tol: float = Config.FEASIBILITY_TOL
    interior_mix: float = Config.INTERIOR_MIX
    sic_error_ratio: float = Config.SIC_ERROR_RATIO

    def validate(self) -> None:
        if self.max_outer_iters < 1 or self.lm_max_iters < 1 or self.max_newton_iters < 1:
            raise ConfigError("iteration limits must be at least 1")
        for name in ('convergence_tol', 'inner_tol', 'lm_tol', 'log_floor', 'slack_penalty',
                     'feasibility_tol', 'barrier_t0'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver.{name} must be positive (got {getattr(self, name)})")
        if self.barrier_mu <= 1:
            raise ConfigError(f"solver.barrier_mu must exceed 1 (got {self.barrier_mu})")
        if not 0 < self.interior_mix < 1:
            raise ConfigError(f"solver.interior_mix must lie in (0, 1) (got {self.interior_mix})")
        self.eval_config().validate()

    def barrier_settings(self) -> BarrierSettings:
        return BarrierSettings(mu=self.barrier_mu, t0=self.barrier_t0, tol=self.inner_tol,
                               max_newton_iters=self.max_newton_iters)

    def eval_config(self) -> EvalConfig:
        return EvalConfig(sic_error_ratio=self.sic_error_ratio)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SolverConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown solver settings: {', '.join(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class RateTargets:
    """Per-terminal demand and floor the power program works towards (bps)."""
    demands_bps: np.ndarray
    min_rates_bps: np.ndarray
    objective: str = 'sum_squared_gap'

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"Unknown objective '{self.objective}'; expected one of {', '.join(OBJECTIVES)}")
        object.__setattr__(self, 'demands_bps', np.asarray(self.demands_bps, dtype=float))
        object.__setattr__(self, 'min_rates_bps', np.asarray(self.min_rates_bps, dtype=float))

    @classmethod
    def from_scenario(cls, scenario: Scenario, objective: str = 'sum_squared_gap') -> 'RateTargets':
        return cls(scenario.demands, scenario.min_rates, objective)


def free_terminals(scenario: Scenario) -> np.ndarray:
    """Terminals whose power is a decision variable; the rest stay at zero."""
    wants_rate = (scenario.demands > 0) | (scenario.min_rates > 0)
    return (scenario.direct_gains > 0) & wants_rate


class PairLayout:
    """Free (terminal, slot) pairs of one power problem, in normalized units."""

    def __init__(self, scenario: Scenario, mask: np.ndarray, eta: float):
        self.scenario = scenario
        self.k, self.t = np.nonzero(mask)
        self.N = len(self.k)
        scale = scenario.P_beam_W / scenario.noise_power_W
        self.a = scenario.direct_gains[self.k] * scale
        coupling = coupling_matrix(scenario, eta) * scale
        same_slot = self.t[:, None] == self.t[None, :]
        # cross[m, n]: interference of pair m on pair n
        self.cross = np.where(same_slot, coupling[np.ix_(self.k, self.k)], 0.0)
        self.member = (np.arange(scenario.K)[:, None] == self.k[None, :]).astype(float)

        beams = scenario.beam_of[self.k]
        keys = sorted(set(zip(beams.tolist(), self.t.tolist())))
        self.group_of = np.zeros(self.N, dtype=int)
        self.groups = np.zeros((len(keys), self.N))
        for g, (b, t) in enumerate(keys):
            inside = (beams == b) & (self.t == t)
            self.groups[g, inside] = 1.0
            self.group_of[inside] = g

    @classmethod
    def from_assignment(cls, scenario: Scenario, assignment: Assignment, eta: float) -> 'PairLayout':
        mask = assignment.scheduled(scenario) & free_terminals(scenario)[:, None]
        return cls(scenario, mask, eta)

    def normalize(self, power: PowerPlan) -> np.ndarray:
        return power.p[self.k, self.t] / self.scenario.P_beam_W

    def to_power(self, x: np.ndarray) -> PowerPlan:
        p = np.zeros((self.scenario.K, self.scenario.T))
        p[self.k, self.t] = np.clip(x, 0.0, 1.0) * self.scenario.P_beam_W
        return PowerPlan(p)

    def centre(self) -> np.ndarray:
        """Centre of each {x >= 0, sum x <= 1} simplex."""
        sizes = self.groups.sum(axis=1)
        return 1.0 / (sizes[self.group_of] + 1.0)

    def interior(self, x: np.ndarray, mix: float) -> np.ndarray:
        return (1.0 - mix) * np.clip(x, 0.0, 1.0) + mix * self.centre()

    def project(self, x: np.ndarray, movable: Optional[np.ndarray] = None) -> np.ndarray:
        """Clip to the box and shrink movable pairs until every beam-slot budget holds."""
        x = np.clip(x, 0.0, 1.0)
        movable = np.ones(self.N, dtype=bool) if movable is None else movable
        for g in np.flatnonzero(self.groups @ x > 1.0):
            inside = self.group_of == g
            free = inside & movable
            room = max(1.0 - float(x[inside & ~movable].sum()), 0.0)
            total = float(x[free].sum())
            if total > 0:
                x[free] *= room / total
        return x

    def interference(self, x: np.ndarray) -> np.ndarray:
        return self.cross.T @ x

    def theta(self, x: np.ndarray) -> np.ndarray:
        """Optimal auxiliary variable for the current powers."""
        return np.sqrt(self.a * np.maximum(x, 0.0)) / (self.interference(x) + 1.0)

    def pair_rates(self, x: np.ndarray) -> np.ndarray:
        return np.log2(1.0 + self.a * x / (self.interference(x) + 1.0))

    def capacities(self, x: np.ndarray) -> np.ndarray:
        """Per-terminal capacity in bit/s/Hz."""
        return self.member @ self.pair_rates(x)

    def capacity_jacobian(self, x: np.ndarray) -> np.ndarray:
        denom = self.interference(x) + 1.0
        gamma = self.a * x / denom
        d_rates = np.diag(self.a / denom) - (self.a * x / denom ** 2)[:, None] * self.cross.T
        d_rates /= (LN2 * (1.0 + gamma))[:, None]
        return self.member @ d_rates

    def transform(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Log argument of the transformed rate."""
        root = np.sqrt(self.a * np.maximum(x, 0.0))
        return 1.0 + 2.0 * theta * root - theta ** 2 * (self.interference(x) + 1.0)

    def transform_derivatives(self, theta: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Log argument u, its Jacobian (row n = grad of u_n) and its negated own curvature.

        Only the sqrt term is nonlinear, so the Hessian of u_n has a single
        nonzero entry at (n, n).
        """
        u = self.transform(theta, x)
        grad_u = -(theta ** 2)[:, None] * self.cross.T
        sqrt_a = np.sqrt(self.a)
        grad_u[np.arange(self.N), np.arange(self.N)] += theta * sqrt_a / np.sqrt(x)
        curvature = theta * sqrt_a / (2.0 * x ** 1.5)
        return u, grad_u, curvature


class TransformProgram(BarrierProblem):
    """
    Convex power program at fixed theta.

    Variables are [x, aux, slack]. The minimum-rate floors carry an l1 slack
    so the program stays feasible while theta is poor; a slack left at the
    optimum means the floor cannot be met.
    """

    def __init__(self, layout: PairLayout, theta: np.ndarray, demands: np.ndarray, min_rates: np.ndarray,
                 objective: str, config: SolverConfig):
        self.layout = layout
        self.theta = theta
        self.demands = demands
        self.min_rates = min_rates
        self.objective_kind = objective
        self.config = config

        has_pairs = layout.member.sum(axis=1) > 0
        self.served = np.flatnonzero(has_pairs & (demands > 0))
        self.floored = np.flatnonzero(has_pairs & (min_rates > 0))
        N = layout.N
        if objective == 'max_min_octr':
            self.n_aux = 1 if len(self.served) else 0
        else:
            self.n_aux = len(self.served)
        self.xs = slice(0, N)
        self.aux = slice(N, N + self.n_aux)
        self.slack = slice(N + self.n_aux, N + self.n_aux + len(self.floored))
        self.size = N + self.n_aux + len(self.floored)

    def _rate_terms(self, x: np.ndarray):
        u, grad_u, curvature = self.layout.transform_derivatives(self.theta, x)
        capacity = self.layout.member @ (np.log(u) / LN2)
        capacity_jac = self.layout.member @ (grad_u / (u * LN2)[:, None])
        return u, grad_u, curvature, capacity, capacity_jac

    def objective(self, z):
        grad = np.zeros(self.size)
        hess = np.zeros((self.size, self.size))
        slack = z[self.slack]
        value = self.config.slack_penalty * float(slack.sum())
        grad[self.slack] = self.config.slack_penalty
        aux = z[self.aux]
        if self.objective_kind == 'sum_squared_gap':
            value += float(aux @ aux)
            grad[self.aux] = 2.0 * aux
            idx = np.arange(self.aux.start, self.aux.stop)
            hess[idx, idx] = 2.0
        elif self.objective_kind == 'min_unmet':
            value += float(aux.sum())
            grad[self.aux] = 1.0
        elif self.n_aux:
            value -= float(aux[0])
            grad[self.aux] = -1.0
        return value, grad, hess

    def constraints(self, z):
        layout, N = self.layout, self.layout.N
        x = z[self.xs]
        u, grad_u, _, capacity, capacity_jac = self._rate_terms(x)
        rows: List[np.ndarray] = []
        values: List[np.ndarray] = []

        block = np.zeros((N, self.size))
        block[:, self.xs] = -np.eye(N)
        rows.append(block)
        values.append(-x)

        block = np.zeros((len(layout.groups), self.size))
        block[:, self.xs] = layout.groups
        rows.append(block)
        values.append(layout.groups @ x - 1.0)

        block = np.zeros((N, self.size))
        block[:, self.xs] = -grad_u
        rows.append(block)
        values.append(self.config.log_floor - u)

        aux = z[self.aux]
        served = self.served
        block = np.zeros((len(served), self.size))
        block[:, self.xs] = -capacity_jac[served]
        if self.objective_kind == 'max_min_octr':
            if self.n_aux:
                block[:, self.aux.start] = self.demands[served]
                values.append(aux[0] * self.demands[served] - capacity[served])
            else:
                values.append(np.zeros(0))
        else:
            block[np.arange(len(served)), self.aux.start + np.arange(len(served))] = -1.0
            values.append(self.demands[served] - capacity[served] - aux)
        rows.append(block)

        if self.objective_kind != 'max_min_octr':
            block = np.zeros((self.n_aux, self.size))
            block[np.arange(self.n_aux), self.aux.start + np.arange(self.n_aux)] = -1.0
            rows.append(block)
            values.append(-aux)

        floored = self.floored
        slack = z[self.slack]
        block = np.zeros((len(floored), self.size))
        block[:, self.xs] = -capacity_jac[floored]
        block[np.arange(len(floored)), self.slack.start + np.arange(len(floored))] = -1.0
        rows.append(block)
        values.append(self.min_rates[floored] - capacity[floored] - slack)

        block = np.zeros((len(floored), self.size))
        block[np.arange(len(floored)), self.slack.start + np.arange(len(floored))] = -1.0
        rows.append(block)
        values.append(-slack)

        return np.concatenate(values), np.vstack(rows)

    def constraint_hessian(self, z, weights):
        layout, N = self.layout, self.layout.N
        x = z[self.xs]
        u, grad_u, curvature = layout.transform_derivatives(self.theta, x)
        G = len(layout.groups)
        floor_weights = weights[N + G:2 * N + G]
        offset = 2 * N + G
        served_weights = weights[offset:offset + len(self.served)]
        offset += len(self.served)
        if self.objective_kind != 'max_min_octr':
            offset += self.n_aux
        floored_weights = weights[offset:offset + len(self.floored)]

        per_terminal = np.zeros(self.layout.scenario.K)
        np.add.at(per_terminal, self.served, served_weights)
        np.add.at(per_terminal, self.floored, floored_weights)
        per_pair = per_terminal[layout.k]

        hess = np.zeros((self.size, self.size))
        block = (grad_u.T * (per_pair / (u ** 2 * LN2))) @ grad_u
        block[np.arange(N), np.arange(N)] += floor_weights * curvature + per_pair * curvature / (u * LN2)
        hess[self.xs, self.xs] = block
        return hess

    def in_domain(self, z):
        if not np.all(np.isfinite(z)):
            return False
        x = z[self.xs]
        if np.any(x <= 0):
            return False
        return bool(np.all(self.layout.transform(self.theta, x) > 0))

    def start(self, x: np.ndarray) -> np.ndarray:
        """Extend powers with auxiliaries and slacks that are strictly feasible for them."""
        z = np.zeros(self.size)
        z[self.xs] = x
        u = self.layout.transform(self.theta, x)
        capacity = self.layout.member @ (np.log(np.maximum(u, self.config.log_floor)) / LN2)
        if self.objective_kind == 'max_min_octr':
            if self.n_aux:
                z[self.aux] = float(np.min(capacity[self.served] / self.demands[self.served])) - 1.0
        else:
            z[self.aux] = np.maximum(self.demands[self.served] - capacity[self.served], 0.0) + 1.0
        z[self.slack] = np.maximum(self.min_rates[self.floored] - capacity[self.floored], 0.0) + 1.0
        return z


@dataclass
class ProgramOutcome:
    x: np.ndarray
    slack: Dict[int, float]
    gap_bound: float
    status: str


def _solve_program(layout: PairLayout, theta: np.ndarray, demands: np.ndarray, min_rates: np.ndarray,
                   objective: str, config: SolverConfig, x_start: np.ndarray) -> ProgramOutcome:
    if layout.N == 0:
        return ProgramOutcome(x=np.zeros(0), slack={}, gap_bound=0.0, status='optimal')
    program = TransformProgram(layout, theta, demands, min_rates, objective, config)
    z0 = program.start(layout.interior(x_start, config.interior_mix))
    if not program.in_domain(z0):
        raise ValueError("starting power lies outside the transform domain for this theta")
    settings = config.barrier_settings()
    if not program.strictly_feasible(z0):
        z0 = phase_one(program, z0, settings)
        if z0 is None:
            raise ValueError("no interior point keeps every transformed rate above the log floor")
    result = minimize(program, z0, settings)
    slack = {int(k): float(s) for k, s in zip(program.floored, result.z[program.slack])}
    return ProgramOutcome(x=result.z[program.xs], slack=slack, gap_bound=result.gap_bound, status=result.status)


def _check_reachable(layout: PairLayout, min_rates: np.ndarray, bandwidth_Hz: float) -> None:
    """Reject floors above the interference-free full-power capacity."""
    bound = layout.member @ np.log2(1.0 + layout.a)
    short = min_rates - bound
    if np.any((min_rates > 0) & (short > 0)):
        k = int(np.argmax(np.where(min_rates > 0, short, -np.inf)))
        raise PowerInfeasibleError(k, float(short[k] * bandwidth_Hz))


def _trace_objective(objective: str, demands_bps: np.ndarray, capacities_bps: np.ndarray) -> float:
    """Minimization-form value of the program objective on true rates."""
    shortfall = np.maximum(demands_bps - capacities_bps, 0.0) / MBPS
    if objective == 'sum_squared_gap':
        return float(np.sum(shortfall ** 2))
    if objective == 'min_unmet':
        return float(np.sum(shortfall))
    served = demands_bps > 0
    if not np.any(served):
        return -1.0
    return -float(np.min(capacities_bps[served] / demands_bps[served]))


def equal_split_power(scenario: Scenario, assignment: Assignment) -> PowerPlan:
    """Each active beam splits P evenly over its scheduled free terminals."""
    free = assignment.scheduled(scenario) & free_terminals(scenario)[:, None]
    counts = np.zeros((scenario.B, scenario.T))
    np.add.at(counts, scenario.beam_of, free.astype(float))
    shares = np.divide(scenario.P_beam_W, counts, out=np.zeros_like(counts), where=counts > 0)
    return PowerPlan(np.where(free, shares[scenario.beam_of, :], 0.0))


def update_theta(power: PowerPlan, scenario: Scenario, assignment: Assignment,
                 eval_cfg: Optional[EvalConfig] = None) -> np.ndarray:
    """theta = sqrt(|h|^2 p) / (I_intra + I_inter + sigma^2) on scheduled pairs, else 0."""
    eval_cfg = eval_cfg or EvalConfig()
    scheduled = assignment.scheduled(scenario)
    p = power.p * scheduled
    interference = coupling_matrix(scenario, eval_cfg.sic_error_ratio).T @ p
    theta = np.sqrt(scenario.direct_gains[:, None] * p) / (interference + scenario.noise_power_W)
    return np.where(scheduled, theta, 0.0)


def transformed_rate(theta: np.ndarray, power: PowerPlan, scenario: Scenario, assignment: Assignment,
                     k: int, t: int, eval_cfg: Optional[EvalConfig] = None,
                     log_floor: float = Config.LOG_FLOOR) -> Tuple[float, bool]:
    """
    Transformed rate of terminal k at slot t in bps.

    Returns:
        (rate, clamped) where clamped tells whether the log argument hit the floor
    """
    theta_kt = float(theta[k, t])
    if theta_kt < 0:
        raise ValueError(f"theta must be nonnegative (got {theta_kt} at terminal {k + 1}, slot {t})")
    eval_cfg = eval_cfg or EvalConfig()
    scheduled = assignment.scheduled(scenario)
    if not scheduled[k, t]:
        return 0.0, False
    p = power.p[:, t] * scheduled[:, t]
    interference = float(coupling_matrix(scenario, eval_cfg.sic_error_ratio)[:, k] @ p)
    argument = (1.0 + 2.0 * theta_kt * math.sqrt(scenario.direct_gains[k] * p[k])
                - theta_kt ** 2 * (interference + scenario.noise_power_W))
    clamped = argument < log_floor
    if clamped:
        logger.warning(f"Transformed rate of terminal {k + 1} at slot {t} clamped (argument {argument:.3e})")
    return scenario.bandwidth_Hz * math.log2(max(argument, log_floor)), clamped


def solve_convex_subproblem(theta: np.ndarray, scenario: Scenario, assignment: Assignment,
                            config: Optional[SolverConfig] = None, targets: Optional[RateTargets] = None,
                            start: Optional[PowerPlan] = None) -> Tuple[PowerPlan, np.ndarray]:
    """
    Solve the convex power program with theta fixed.

    Args:
        theta: K x T auxiliary variables
        start: starting powers (equal split when omitted)

    Returns:
        (power, delta) with delta the per-terminal transformed shortfall in bps

    Raises:
        PowerInfeasibleError: when a minimum rate cannot be met
    """
    config = config or SolverConfig()
    targets = targets or RateTargets.from_scenario(scenario)
    W = scenario.bandwidth_Hz
    layout = PairLayout.from_assignment(scenario, assignment, config.sic_error_ratio)
    demands, min_rates = targets.demands_bps / W, targets.min_rates_bps / W
    _check_reachable(layout, min_rates, W)

    x_start = layout.normalize(start or equal_split_power(scenario, assignment))
    theta_n = np.asarray(theta, dtype=float)[layout.k, layout.t] * math.sqrt(scenario.noise_power_W)
    outcome = _solve_program(layout, theta_n, demands, min_rates, targets.objective, config, x_start)
    power = layout.to_power(outcome.x)

    for k, s in outcome.slack.items():
        if s > config.feasibility_tol * min_rates[k]:
            worst = max(outcome.slack, key=lambda j: outcome.slack[j] / min_rates[j])
            raise PowerInfeasibleError(worst, outcome.slack[worst] * W, power)

    transformed = layout.member @ np.log2(np.maximum(layout.transform(theta_n, outcome.x), config.log_floor))
    delta = np.maximum(demands - transformed, 0.0) * W
    return power, delta


def _equalize(layout: PairLayout, x: np.ndarray, over: np.ndarray, demands: np.ndarray,
              config: SolverConfig) -> Tuple[np.ndarray, str]:
    """Levenberg-Marquardt on R_k(x) / D_k - 1 = 0 over the powers of the over-served terminals."""
    movable = np.isin(layout.k, over)
    variables = np.flatnonzero(movable)

    def residual(v):
        return layout.capacities(v)[over] / demands[over] - 1.0

    r = residual(x)
    regularization = 1e-3
    for iteration in range(config.lm_max_iters):
        if np.max(np.abs(r)) <= config.lm_tol:
            return x, 'converged'
        J = layout.capacity_jacobian(x)[np.ix_(over, variables)] / demands[over][:, None]
        normal = J.T @ J
        while regularization < 1e12:
            step = np.linalg.lstsq(normal + regularization * np.eye(len(variables)), J.T @ r, rcond=None)[0]
            trial = x.copy()
            trial[variables] -= step
            trial = layout.project(trial, movable)
            r_trial = residual(trial)
            if np.linalg.norm(r_trial) < np.linalg.norm(r):
                x, r = trial, r_trial
                regularization = max(regularization * 0.3, 1e-12)
                break
            regularization *= 10.0
        else:
            break
    if np.max(np.abs(r)) <= config.lm_tol:
        return x, 'converged'
    logger.warning(f"Levenberg-Marquardt stopped with residual {np.max(np.abs(r)):.3e} "
                   f"on {len(over)} over-served terminals")
    return x, 'max_iters'


def equalize_overserved(scenario: Scenario, assignment: Assignment, power: PowerPlan,
                        overserved_set: Sequence[int], config: Optional[SolverConfig] = None,
                        targets: Optional[RateTargets] = None) -> Tuple[PowerPlan, str]:
    """
    Bring over-served terminals to R_k = D_k, all other powers frozen.

    Returns:
        (power, status) with status 'converged' or 'max_iters'
    """
    config = config or SolverConfig()
    targets = targets or RateTargets.from_scenario(scenario)
    over = np.array(sorted(set(int(k) for k in overserved_set)), dtype=int)
    if len(over) == 0:
        return power, 'converged'
    layout = PairLayout.from_assignment(scenario, assignment, config.sic_error_ratio)
    demands = targets.demands_bps / scenario.bandwidth_Hz
    x, status = _equalize(layout, layout.normalize(power), over, demands, config)
    return layout.to_power(x), status


def scale_overserved_powers(scenario: Scenario, assignment: Assignment, power: PowerPlan, t: int, zeta: float,
                            eval_cfg: Optional[EvalConfig] = None) -> PowerPlan:
    """Scale slot t's powers of terminals with R_k > D_k by zeta."""
    _, capacities = compute_rates(scenario, assignment, power, eval_cfg)
    over = (capacities > scenario.demands) & assignment.scheduled(scenario)[:, t]
    p = np.array(power.p)
    p[over, t] *= zeta
    return PowerPlan(p)


def run_alg1(scenario: Scenario, assignment: Assignment, init_power: Optional[PowerPlan] = None,
             config: Optional[SolverConfig] = None,
             targets: Optional[RateTargets] = None) -> Tuple[PowerPlan, np.ndarray, List[Dict[str, Any]]]:
    """
    Iterative power allocation for a fixed schedule.

    Alternates theta updates with convex solves until the relative objective
    change drops below convergence_tol or max_outer_iters is reached, then
    trims over-served terminals to their demand.

    Returns:
        (power, delta, trace) with delta = [D - R]+ in bps and one trace row
        (iter, objective, max_kkt_residual, clamped_terms) per iteration

    Raises:
        PowerInfeasibleError: when a minimum rate is unreachable
    """
    config = config or SolverConfig()
    targets = targets or RateTargets.from_scenario(scenario)
    W = scenario.bandwidth_Hz
    layout = PairLayout.from_assignment(scenario, assignment, config.sic_error_ratio)
    demands, min_rates = targets.demands_bps / W, targets.min_rates_bps / W
    _check_reachable(layout, min_rates, W)

    if init_power is None:
        init_power = equal_split_power(scenario, assignment)
    x = layout.project(layout.normalize(init_power))
    previous = _trace_objective(targets.objective, targets.demands_bps, layout.capacities(x) * W)
    trace: List[Dict[str, Any]] = []

    for iteration in range(1, config.max_outer_iters + 1 if layout.N else 1):
        theta = layout.theta(x)
        outcome = _solve_program(layout, theta, demands, min_rates, targets.objective, config, x)
        clamped = int(np.sum(layout.transform(theta, outcome.x) < config.log_floor))
        x = outcome.x
        value = _trace_objective(targets.objective, targets.demands_bps, layout.capacities(x) * W)
        trace.append({'iter': iteration, 'objective': value, 'max_kkt_residual': outcome.gap_bound,
                      'clamped_terms': clamped})
        logger.debug(f"Power iteration {iteration}: objective {value:.6g}, gap bound {outcome.gap_bound:.2e}")
        converged = abs(previous - value) <= config.convergence_tol * max(abs(previous), 1e-300)
        previous = value
        if converged:
            break

    if targets.objective != 'max_min_octr':
        for _ in range(MAX_TRIM_ROUNDS):
            capacities = layout.capacities(x)
            over = np.flatnonzero((demands > 0) & (capacities > demands * (1.0 + config.lm_tol)))
            if len(over) == 0:
                break
            x, _ = _equalize(layout, x, over, demands, config)

    power = layout.to_power(x)
    capacities = layout.capacities(x) * W
    shortfall = np.where(targets.min_rates_bps > 0,
                         (targets.min_rates_bps - capacities) / np.maximum(targets.min_rates_bps, 1e-300), -np.inf)
    if np.any(shortfall > config.feasibility_tol):
        k = int(np.argmax(shortfall))
        raise PowerInfeasibleError(k, float(targets.min_rates_bps[k] - capacities[k]), power)

    if trace:
        logger.debug(f"Power allocation finished after {len(trace)} iterations (objective {trace[-1]['objective']:.6g})")
    return power, np.maximum(targets.demands_bps - capacities, 0.0), trace
