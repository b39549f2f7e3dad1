"""
Integer search over beam illumination and terminal-slot assignment.

UBA improves a feasible schedule by swap matching: a beam swap moves one
illuminated (beam, slot) elsewhere, a terminal swap moves one scheduled
(terminal, slot) within its beam, and a swap is kept only when the power
allocation on the new sets lowers the objective. E-JPBT instead builds the
schedule slot by slot from a relaxed per-slot program.
"""

import itertools
import logging
from dataclasses import dataclass, field, fields
from typing import Callable, Dict, Any, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from config import Config, ConfigError
from model.scenario import Scenario, build_beam_groups, validate_triples
from model.linkmodel import (Assignment, PowerPlan, Solution, check_feasibility,
                             compute_rates, evaluate_solution, MBPS)
from solvers.barrier import BarrierProblem, minimize
from solvers.power_solver import (SolverConfig, RateTargets, PairLayout, PowerInfeasibleError, free_terminals,
                                  run_alg1, LN2, OBJECTIVES)

logger = logging.getLogger(__name__)

BeamSelector = Callable[[int, np.ndarray], Sequence[int]]
EXHAUSTIVE_LIMIT = 200000


class SchedulingInfeasibleError(Exception):
    """No schedule satisfying every constraint was found."""


@dataclass(frozen=True)
class SchedulerConfig:
    max_iters: int = Config.UBA_MAX_ITERS
    max_swap_evaluations: Optional[int] = None
    objective: str = 'sum_squared_gap'
    solver: SolverConfig = field(default_factory=SolverConfig)

    def validate(self) -> None:
        if self.max_iters < 1:
            raise ConfigError(f"scheduler.max_iters must be at least 1 (got {self.max_iters})")
        if self.max_swap_evaluations is not None and self.max_swap_evaluations < 1:
            raise ConfigError("scheduler.max_swap_evaluations must be positive when set")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"scheduler.objective must be one of {', '.join(OBJECTIVES)} (got '{self.objective}')")
        self.solver.validate()

    @classmethod
    def from_dict(cls, data: Dict[str, Any], solver: Optional[SolverConfig] = None) -> 'SchedulerConfig':
        known = {f.name for f in fields(cls)} - {'solver'}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown scheduler settings: {', '.join(unknown)}")
        return cls(solver=solver or SolverConfig(), **data)


@dataclass(frozen=True)
class EjpbtConfig:
    penalty_factors: Optional[Tuple[float, ...]] = None  # phi_k; default PENALTY_SCALE * residual demand
    penalty_scale: float = Config.PENALTY_SCALE
    softplus_sharpness: float = Config.SOFTPLUS_SHARPNESS  # per bit/s/Hz
    stage_iters: int = Config.STAGE_ITERS
    stage_solver: SolverConfig = field(default_factory=SolverConfig)

    def validate(self) -> None:
        if self.penalty_factors is not None and any(not phi > 0 for phi in self.penalty_factors):
            raise ConfigError("ejpbt.penalty_factors must all be positive")
        if self.penalty_scale <= 0 or self.softplus_sharpness <= 0:
            raise ConfigError("ejpbt.penalty_scale and ejpbt.softplus_sharpness must be positive")
        if self.stage_iters < 1:
            raise ConfigError(f"ejpbt.stage_iters must be at least 1 (got {self.stage_iters})")
        self.stage_solver.validate()

    @classmethod
    def from_dict(cls, data: Dict[str, Any], solver: Optional[SolverConfig] = None) -> 'EjpbtConfig':
        known = {f.name for f in fields(cls)} - {'stage_solver'}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown ejpbt settings: {', '.join(unknown)}")
        data = dict(data)
        if data.get('penalty_factors') is not None:
            data['penalty_factors'] = tuple(float(v) for v in data['penalty_factors'])
        return cls(stage_solver=solver or SolverConfig(), **data)


@dataclass(frozen=True, eq=False)
class MatchingState:
    M: FrozenSet[Tuple[int, int]]
    N: FrozenSet[Tuple[int, int]]
    cached_objective: float
    cached_power: PowerPlan
    solution: Solution

    def assignment(self, scenario: Scenario) -> Assignment:
        return Assignment.from_sets(scenario, self.M, self.N)


@dataclass(frozen=True)
class SwapMove:
    kind: str  # 'beam' | 'terminal'
    remove: Tuple[int, int]
    add: Tuple[int, int]

    def describe(self) -> str:
        return f"{self.kind} ({self.remove[0] + 1},{self.remove[1]})->({self.add[0] + 1},{self.add[1]})"


def objective_score(solution: Solution, objective: str) -> float:
    """Minimization-form score a scheduler compares solutions by."""
    if objective == 'max_min_octr':
        return -solution.aux_metrics['worst_octr']
    if objective == 'min_unmet':
        return solution.aux_metrics['unmet']
    return solution.aux_metrics['sum_squared_gap']


def _improves(new: float, old: float) -> bool:
    return new < old - 1e-9 * max(abs(old), 1e-12)


def _demands_met(scenario: Scenario, solution: Solution, tol: float) -> bool:
    return bool(np.all(np.abs(solution.capacities - scenario.demands) <= tol * np.maximum(scenario.demands, 1.0)))


def evaluate_assignment(scenario: Scenario, assignment: Assignment, config: SchedulerConfig,
                        scheme: str = '') -> Optional[Solution]:
    """Power-allocate a schedule from equal split; None when it cannot be made feasible."""
    targets = RateTargets.from_scenario(scenario, config.objective)
    try:
        power, _, power_trace = run_alg1(scenario, assignment, None, config.solver, targets)
    except PowerInfeasibleError as e:
        logger.debug(f"Schedule rejected: {e}")
        return None
    except ValueError as e:
        logger.debug(f"Schedule rejected, power program failed: {e}")
        return None
    solution = evaluate_solution(scenario, assignment, power, config.solver.eval_config(),
                                 scheme=scheme, trace=power_trace)
    return solution if solution.feasible else None


def _state_from_solution(solution: Solution, objective: str) -> MatchingState:
    return MatchingState(M=frozenset(solution.assignment.beam_slots()),
                         N=frozenset(solution.assignment.terminal_slots()),
                         cached_objective=objective_score(solution, objective),
                         cached_power=solution.power, solution=solution)


def _priority(scenario: Scenario, residual: np.ndarray, floor_left: np.ndarray, k: int) -> Tuple:
    """Terminals still short of their floor first, then larger residual demand, then lower index."""
    return (0 if floor_left[k] > 0 else 1, -float(residual[k]), k)


def _pick_terminals(scenario: Scenario, b: int, residual: np.ndarray, floor_left: np.ndarray) -> List[int]:
    free = free_terminals(scenario)
    members = [int(k) for k in scenario.members[b] if free[k]]
    members.sort(key=lambda k: _priority(scenario, residual, floor_left, k))
    return members[:scenario.K0]


def _structurally_valid(scenario: Scenario, assignment: Assignment) -> bool:
    report = check_feasibility(scenario, assignment, PowerPlan.zeros(scenario),
                               np.maximum(scenario.min_rates, 0.0) + 1.0)
    return report.feasible


def round_robin_assignment(scenario: Scenario, groups: List[Tuple[int, ...]], offset: int) -> Assignment:
    alpha = np.zeros((scenario.B, scenario.T), dtype=bool)
    beta = np.zeros((scenario.K, scenario.T), dtype=bool)
    residual = scenario.demands.copy()
    floor_left = scenario.min_rates.copy()
    W, P, noise = scenario.bandwidth_Hz, scenario.P_beam_W, scenario.noise_power_W
    for t in range(scenario.T):
        group = groups[(t + offset) % len(groups)]
        for b in group:
            picks = _pick_terminals(scenario, b, residual, floor_left)
            if not picks:
                continue
            alpha[b, t] = True
            estimate = W * np.log2(1.0 + scenario.direct_gains[picks] * P / (len(picks) * noise))
            for k, rate in zip(picks, estimate):
                beta[k, t] = True
                residual[k] = max(residual[k] - rate, 0.0)
                floor_left[k] = max(floor_left[k] - rate, 0.0)
    return Assignment(alpha, beta)


def initial_solution(scenario: Scenario, config: Optional[SchedulerConfig] = None,
                     hint: Optional[Assignment] = None) -> MatchingState:
    """
    Feasible starting state for swap matching.

    Beam groups are illuminated round-robin over the slots and each lit beam
    takes its K0 most under-served terminals. The rotation offset is advanced
    until power allocation succeeds. A hint assignment replaces the
    construction.

    Raises:
        SchedulingInfeasibleError: if no rotation (or the hint) is feasible
    """
    config = config or SchedulerConfig()
    if hint is not None:
        if hint.alpha.shape != (scenario.B, scenario.T) or hint.beta.shape != (scenario.K, scenario.T):
            raise ValueError("hint assignment does not match the scenario dimensions")
        if not _structurally_valid(scenario, hint):
            raise SchedulingInfeasibleError("hint assignment violates beam, multiplexing or conflict limits")
        solution = evaluate_assignment(scenario, hint, config)
        if solution is None:
            raise SchedulingInfeasibleError("no power plan makes the hint assignment feasible")
        return _state_from_solution(solution, config.objective)

    groups = build_beam_groups(scenario)
    for offset in range(len(groups)):
        assignment = round_robin_assignment(scenario, groups, offset)
        solution = evaluate_assignment(scenario, assignment, config)
        if solution is not None:
            logger.info(f"Initial schedule found at rotation {offset} (objective {objective_score(solution, config.objective):.6g})")
            return _state_from_solution(solution, config.objective)
        logger.debug(f"Rotation {offset} of {len(groups)} beam groups is infeasible")
    raise SchedulingInfeasibleError(f"no feasible schedule after rotating {len(groups)} beam groups")


def enumerate_beam_swaps(state: MatchingState, scenario: Scenario) -> List[SwapMove]:
    """Beam swaps whose post-move illumination respects B0 and the conflict set."""
    active_at: Dict[int, set] = {t: set() for t in range(scenario.T)}
    for b, t in state.M:
        active_at[t].add(b)
    moves = []
    for b, t in sorted(state.M, key=lambda bt: (bt[1], bt[0])):
        for t2 in range(scenario.T):
            others = active_at[t2] - ({b} if t2 == t else set())
            if len(others) + 1 > scenario.B0:
                continue
            for b2 in range(scenario.B):
                if (b2, t2) in state.M:
                    continue
                if any(scenario.conflicts(b2, o) for o in others):
                    continue
                moves.append(SwapMove('beam', (b, t), (b2, t2)))
    return moves


def enumerate_terminal_swaps(state: MatchingState, scenario: Scenario) -> List[SwapMove]:
    """Same-beam terminal swaps over the beam's lit slots, respecting K0."""
    counts: Dict[Tuple[int, int], int] = {}
    for k, t in state.N:
        key = (int(scenario.beam_of[k]), t)
        counts[key] = counts.get(key, 0) + 1
    moves = []
    for k, t in sorted(state.N, key=lambda kt: (kt[1], kt[0])):
        b = int(scenario.beam_of[k])
        lit = sorted(s for (bb, s) in state.M if bb == b)
        for t2 in lit:
            for k2 in scenario.members[b]:
                k2 = int(k2)
                if (k2, t2) in state.N:
                    continue
                after = counts.get((b, t2), 0) - (1 if t2 == t else 0) + 1
                if after > scenario.K0:
                    continue
                moves.append(SwapMove('terminal', (k, t), (k2, t2)))
    return moves


def apply_swap(state: MatchingState, move: SwapMove, scenario: Scenario) -> Assignment:
    """
    Sets after a swap.

    A beam swap also drops the removed beam's terminals at that slot and
    gives the added beam-slot its K0 most under-served terminals.
    """
    M, N = set(state.M), set(state.N)
    if move.kind == 'beam':
        (b, t), (b2, t2) = move.remove, move.add
        M.discard((b, t))
        M.add((b2, t2))
        N = {(k, s) for (k, s) in N if not (s == t and scenario.beam_of[k] == b)}
        residual = np.maximum(scenario.demands - state.solution.capacities, 0.0)
        floor_left = np.maximum(scenario.min_rates - state.solution.capacities, 0.0)
        for k in _pick_terminals(scenario, b2, residual, floor_left):
            N.add((k, t2))
    else:
        N.discard(move.remove)
        N.add(move.add)
    return Assignment.from_sets(scenario, M, N)


def run_uba(scenario: Scenario, init_state: Optional[MatchingState] = None,
            config: Optional[SchedulerConfig] = None) -> Solution:
    """
    Swap-matching search.

    Each iteration runs one beam phase then one terminal phase. Candidates
    are scored in lexicographic order and the first strictly improving swap
    of a phase is accepted. Stops after max_iters iterations, when neither
    phase improves, or once every demand is met.
    """
    config = config or SchedulerConfig()
    config.validate()
    state = init_state or initial_solution(scenario, config)
    trace: List[Dict[str, Any]] = []
    phases = (('beam', enumerate_beam_swaps), ('terminal', enumerate_terminal_swaps))

    for iteration in range(1, config.max_iters + 1):
        improved = False
        for phase, enumerate_moves in phases:
            evaluations = 0
            for move in enumerate_moves(state, scenario):
                if config.max_swap_evaluations is not None and evaluations >= config.max_swap_evaluations:
                    break
                evaluations += 1
                candidate = apply_swap(state, move, scenario)
                solution = evaluate_assignment(scenario, candidate, config)
                after = objective_score(solution, config.objective) if solution is not None else float('inf')
                accepted = _improves(after, state.cached_objective)
                trace.append({'iter': iteration, 'phase': phase, 'move': move.describe(),
                              'objective_before': state.cached_objective, 'objective_after': after,
                              'accepted': accepted})
                if accepted:
                    logger.debug(f"Accepted {move.describe()}: {state.cached_objective:.6g} -> {after:.6g}")
                    state = _state_from_solution(solution, config.objective)
                    improved = True
                    break
        if not improved or _demands_met(scenario, state.solution, config.solver.feasibility_tol):
            break

    accepted = sum(1 for row in trace if row['accepted'])
    logger.info(f"UBA finished: {accepted} accepted swaps, objective {state.cached_objective:.6g}")
    result = state.solution
    result.trace = trace
    result.scheme = 'uba'
    return result


class StageProgram(BarrierProblem):
    """
    Relaxed single-slot program: illumination and scheduling in [0, 1].

    Variables are [x, beta, alpha, delta]; alpha is absent when the lit beams
    are fixed in advance. Powers couple to the relaxed binaries through
    x <= beta and sum_b x <= alpha_b.
    """

    def __init__(self, layout: PairLayout, theta: np.ndarray, demands: np.ndarray, floors: np.ndarray,
                 phi: np.ndarray, conflicts: List[Tuple[int, int]], B0: int, K0: int, fixed_beams: bool,
                 sharpness: float, log_floor: float):
        self.layout = layout
        self.theta = theta
        self.demands = demands
        self.floors = floors
        self.phi = phi
        self.conflicts = conflicts
        self.B0, self.K0 = B0, K0
        self.fixed = fixed_beams
        self.sharpness = sharpness
        self.log_floor = log_floor

        n, nb = layout.N, len(layout.groups)
        self.n, self.nb = n, nb
        self.served = np.flatnonzero(demands > 0)
        self.penalized = np.flatnonzero(floors > 0)
        self.xs = slice(0, n)
        self.betas = slice(n, 2 * n)
        self.alphas = slice(2 * n, 2 * n + (0 if fixed_beams else nb))
        self.deltas = slice(self.alphas.stop, self.alphas.stop + len(self.served))
        self.size = self.deltas.stop
        # row offsets of the transform-floor and demand blocks
        self.floor_rows = 3 * n
        after_floor = 4 * n + nb
        if not fixed_beams:
            after_floor += nb + 1
        after_floor += nb
        if not fixed_beams:
            after_floor += len(conflicts)
        self.demand_rows = after_floor

    def _rates(self, x):
        u, grad_u, curvature = self.layout.transform_derivatives(self.theta, x)
        rates = np.log(u) / LN2
        grad_rates = grad_u / (u * LN2)[:, None]
        return u, grad_u, curvature, rates, grad_rates

    def _neg_rate_hessian(self, u, grad_u, curvature, weights):
        """Sum of weights[p] times the Hessian of -rate_p over x."""
        hess = (grad_u.T * (weights / (u ** 2 * LN2))) @ grad_u
        hess[np.arange(self.n), np.arange(self.n)] += weights * curvature / (u * LN2)
        return hess

    def objective(self, z):
        x = z[self.xs]
        delta = z[self.deltas]
        grad = np.zeros(self.size)
        hess = np.zeros((self.size, self.size))
        value = float(delta @ delta)
        grad[self.deltas] = 2.0 * delta
        idx = np.arange(self.deltas.start, self.deltas.stop)
        hess[idx, idx] = 2.0

        if len(self.penalized):
            u, grad_u, curvature, rates, grad_rates = self._rates(x)
            p = self.penalized
            arg = self.sharpness * (self.floors[p] - rates[p])
            slope = expit(arg)
            value += float(np.sum(self.phi[p] * np.logaddexp(0.0, arg) / self.sharpness))
            grad[self.xs] -= grad_rates[p].T @ (self.phi[p] * slope)
            weights = np.zeros(self.n)
            weights[p] = self.phi[p] * slope
            bend = self.phi[p] * self.sharpness * slope * (1.0 - slope)
            hess[self.xs, self.xs] += (grad_rates[p].T * bend) @ grad_rates[p]
            hess[self.xs, self.xs] += self._neg_rate_hessian(u, grad_u, curvature, weights)
        return value, grad, hess

    def constraints(self, z):
        n, nb, layout = self.n, self.nb, self.layout
        x, beta, alpha, delta = z[self.xs], z[self.betas], z[self.alphas], z[self.deltas]
        u, grad_u, _, rates, grad_rates = self._rates(x)
        rows, values = [], []

        def block(count):
            return np.zeros((count, self.size))

        eye = np.eye(n)
        r = block(n)
        r[:, self.xs] = -eye
        rows.append(r)
        values.append(-x)

        r = block(n)
        r[:, self.xs] = eye
        r[:, self.betas] = -eye
        rows.append(r)
        values.append(x - beta)

        r = block(n)
        r[:, self.betas] = eye
        rows.append(r)
        values.append(beta - 1.0)

        r = block(n)
        r[:, self.xs] = -grad_u
        rows.append(r)
        values.append(self.log_floor - u)

        r = block(nb)
        r[:, self.xs] = layout.groups
        if self.fixed:
            values.append(layout.groups @ x - 1.0)
        else:
            r[:, self.alphas] = -np.eye(nb)
            values.append(layout.groups @ x - alpha)
        rows.append(r)

        if not self.fixed:
            r = block(nb)
            r[:, self.alphas] = np.eye(nb)
            rows.append(r)
            values.append(alpha - 1.0)

            r = block(1)
            r[0, self.alphas] = 1.0
            rows.append(r)
            values.append(np.array([alpha.sum() - self.B0]))

        r = block(nb)
        r[:, self.betas] = layout.groups
        if self.fixed:
            values.append(layout.groups @ beta - self.K0)
        else:
            r[:, self.alphas] = -self.K0 * np.eye(nb)
            values.append(layout.groups @ beta - self.K0 * alpha)
        rows.append(r)

        if not self.fixed:
            r = block(len(self.conflicts))
            for i, (g1, g2) in enumerate(self.conflicts):
                r[i, self.alphas.start + g1] = 1.0
                r[i, self.alphas.start + g2] = 1.0
            rows.append(r)
            values.append(np.array([alpha[g1] + alpha[g2] - 1.0 for g1, g2 in self.conflicts]))

        s = self.served
        r = block(len(s))
        r[:, self.xs] = -grad_rates[s]
        r[np.arange(len(s)), self.deltas.start + np.arange(len(s))] = -1.0
        rows.append(r)
        values.append(self.demands[s] - rates[s] - delta)

        r = block(len(s))
        r[np.arange(len(s)), self.deltas.start + np.arange(len(s))] = -1.0
        rows.append(r)
        values.append(-delta)

        return np.concatenate(values), np.vstack(rows)

    def constraint_hessian(self, z, weights):
        x = z[self.xs]
        u, grad_u, curvature = self.layout.transform_derivatives(self.theta, x)
        floor_weights = weights[self.floor_rows:self.floor_rows + self.n]
        demand_weights = np.zeros(self.n)
        demand_weights[self.served] = weights[self.demand_rows:self.demand_rows + len(self.served)]
        hess = np.zeros((self.size, self.size))
        block = self._neg_rate_hessian(u, grad_u, curvature, demand_weights)
        block[np.arange(self.n), np.arange(self.n)] += floor_weights * curvature
        hess[self.xs, self.xs] = block
        return hess

    def in_domain(self, z):
        if not np.all(np.isfinite(z)):
            return False
        x = z[self.xs]
        return bool(np.all(x > 0) and np.all(self.layout.transform(self.theta, x) > 0))

    def start(self, previous: Optional[np.ndarray] = None) -> np.ndarray:
        z = np.zeros(self.size)
        if previous is not None:
            z[:self.deltas.start] = previous[:self.deltas.start]
        else:
            sizes = self.layout.groups.sum(axis=1)
            per_pair = sizes[self.layout.group_of]
            alpha = np.ones(self.nb) if self.fixed else np.full(self.nb, 0.4 * min(1.0, self.B0 / self.nb))
            beta = np.minimum(0.5, 0.5 * self.K0 * alpha[self.layout.group_of] / per_pair)
            z[self.betas] = beta
            z[self.xs] = 0.5 * np.minimum(beta, alpha[self.layout.group_of] / per_pair)
            z[self.alphas] = alpha[:self.alphas.stop - self.alphas.start]
        rates = np.log2(np.maximum(self.layout.transform(self.theta, z[self.xs]), self.log_floor))
        z[self.deltas] = np.maximum(self.demands[self.served] - rates[self.served], 0.0) + 1.0
        return z


def _relaxed_stage(scenario: Scenario, t: int, candidates: np.ndarray, residual_bps: np.ndarray,
                   floor_left_bps: np.ndarray, config: EjpbtConfig,
                   fixed_beams: bool) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve the relaxed slot-t program by alternating theta updates and barrier solves.

    Returns:
        (alpha_bar per beam, beta_bar per terminal)
    """
    solver = config.stage_solver
    mask = np.zeros((scenario.K, scenario.T), dtype=bool)
    mask[:, t] = candidates
    layout = PairLayout(scenario, mask, solver.sic_error_ratio)
    W = scenario.bandwidth_Hz
    beams = sorted(set(scenario.beam_of[layout.k].tolist()))
    position = {b: g for g, b in enumerate(beams)}
    conflicts = sorted((position[a], position[b]) for a, b in scenario.conflict_set
                       if a in position and b in position)

    demands = residual_bps[layout.k] / W
    floors = floor_left_bps[layout.k] / W
    if config.penalty_factors is not None:
        phi = np.asarray(config.penalty_factors, dtype=float)[layout.k]
    else:
        phi = np.maximum(config.penalty_scale * demands, 1e-6)

    def program_at(theta):
        return StageProgram(layout, theta, demands, floors, phi, conflicts, scenario.B0, scenario.K0,
                            fixed_beams, config.softplus_sharpness, solver.log_floor)

    program = program_at(np.zeros(layout.N))
    z = program.start()
    for _ in range(config.stage_iters):
        program = program_at(layout.theta(z[program.xs]))
        z = minimize(program, program.start(z), solver.barrier_settings()).z

    alpha_bar = np.zeros(scenario.B)
    if fixed_beams:
        alpha_bar[beams] = 1.0
    else:
        alpha_bar[beams] = z[program.alphas]
    beta_bar = np.zeros(scenario.K)
    beta_bar[layout.k] = z[program.betas]
    return alpha_bar, beta_bar


def _slot_assignment(scenario: Scenario, t: int, beams: Sequence[int], terminals: Sequence[int]) -> Assignment:
    alpha = np.zeros((scenario.B, scenario.T), dtype=bool)
    beta = np.zeros((scenario.K, scenario.T), dtype=bool)
    alpha[list(beams), t] = True
    beta[list(terminals), t] = True
    return Assignment(alpha, beta)


def _gap(residual_bps: np.ndarray) -> float:
    return float(np.sum((residual_bps / MBPS) ** 2))


def run_ejpbt(scenario: Scenario, config: Optional[EjpbtConfig] = None,
              beam_selector: Optional[BeamSelector] = None, scheme: str = 'ejpbt') -> Solution:
    """
    Slot-by-slot greedy schedule.

    For each slot: solve the relaxed program, light the beam group with the
    largest relaxed illumination (lowest index on ties), schedule each lit
    beam's K0 terminals with the largest relaxed scheduling values, allocate
    slot power against residual demand, then carry the residual forward.
    A full-horizon power allocation on the final schedule closes the run.

    Args:
        beam_selector: optional (slot, residual demands) -> beams to light,
            replacing the group choice
    """
    config = config or EjpbtConfig()
    config.validate()
    solver = config.stage_solver
    eval_cfg = solver.eval_config()
    free = free_terminals(scenario)
    groups = build_beam_groups(scenario)
    residual = scenario.demands.copy()
    delivered = np.zeros(scenario.K)
    alpha = np.zeros((scenario.B, scenario.T), dtype=bool)
    beta = np.zeros((scenario.K, scenario.T), dtype=bool)
    stage_power = np.zeros((scenario.K, scenario.T))
    trace: List[Dict[str, Any]] = []

    for t in range(scenario.T):
        before = _gap(residual)
        floor_left = np.maximum(scenario.min_rates - delivered, 0.0)
        candidates = free & ((residual > 0) | (floor_left > 0))
        selected = None
        if beam_selector is not None:
            selected = sorted(set(int(b) for b in beam_selector(t, residual.copy())))
            candidates &= np.isin(scenario.beam_of, selected)
        if not candidates.any():
            trace.append({'iter': t, 'phase': 'stage', 'move': 'idle', 'objective_before': before,
                          'objective_after': before, 'accepted': True})
            continue

        try:
            alpha_bar, beta_bar = _relaxed_stage(scenario, t, candidates, residual, floor_left, config,
                                                 fixed_beams=selected is not None)
        except ValueError as e:
            logger.warning(f"Stage {t} relaxation failed ({e}); slot left idle")
            trace.append({'iter': t, 'phase': 'stage', 'move': 'idle', 'objective_before': before,
                          'objective_after': before, 'accepted': False})
            continue

        if selected is None:
            scores = np.round([alpha_bar[list(g)].sum() for g in groups], 9)
            chosen = groups[int(np.argmax(scores))]
        else:
            chosen = selected
        lit, scheduled = [], []
        for b in chosen:
            members = [int(k) for k in scenario.members[b] if candidates[k]]
            picks = sorted(members, key=lambda k: (-round(float(beta_bar[k]), 9), k))[:scenario.K0]
            if picks:
                lit.append(b)
                scheduled.extend(picks)
        if not lit:
            trace.append({'iter': t, 'phase': 'stage', 'move': 'idle', 'objective_before': before,
                          'objective_after': before, 'accepted': True})
            continue

        slot = _slot_assignment(scenario, t, lit, scheduled)
        targets = RateTargets(residual, np.zeros(scenario.K))
        try:
            power, _, _ = run_alg1(scenario, slot, None, solver, targets)
        except (PowerInfeasibleError, ValueError) as e:
            logger.warning(f"Stage {t} power allocation failed ({e}); slot left idle")
            trace.append({'iter': t, 'phase': 'stage', 'move': 'idle', 'objective_before': before,
                          'objective_after': before, 'accepted': False})
            continue

        rates, _ = compute_rates(scenario, slot, power, eval_cfg)
        alpha[lit, t] = True
        beta[scheduled, t] = True
        stage_power[:, t] = power.p[:, t]
        residual = np.maximum(residual - rates[:, t], 0.0)
        delivered += rates[:, t]
        trace.append({'iter': t, 'phase': 'stage', 'move': 'beams ' + ','.join(str(b + 1) for b in lit),
                      'objective_before': before, 'objective_after': _gap(residual), 'accepted': True})

    assignment = Assignment(alpha, beta)
    try:
        power, _, _ = run_alg1(scenario, assignment, None, solver)
    except PowerInfeasibleError as e:
        logger.warning(f"Final power allocation infeasible: {e}")
        power = e.power if e.power is not None else PowerPlan(stage_power)
    solution = evaluate_solution(scenario, assignment, power, eval_cfg, scheme=scheme, trace=trace)
    logger.info(f"{scheme} finished: objective {solution.objective:.6g}, status {solution.status}")
    return solution


def _slot_configurations(scenario: Scenario) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """Every single-slot (lit beams, scheduled terminals) pair meeting B0, K0 and the conflict set."""
    free = free_terminals(scenario)
    per_beam = []
    for b in range(scenario.B):
        members = [int(k) for k in scenario.members[b] if free[k]]
        options = []
        for size in range(1, min(scenario.K0, len(members)) + 1):
            options.extend(itertools.combinations(members, size))
        per_beam.append(options)

    configs = [((), ())]
    for size in range(1, scenario.B0 + 1):
        for beams in itertools.combinations(range(scenario.B), size):
            if any(scenario.conflicts(a, b) for a, b in itertools.combinations(beams, 2)):
                continue
            if any(not per_beam[b] for b in beams):
                continue
            for choice in itertools.product(*(per_beam[b] for b in beams)):
                configs.append((beams, tuple(k for group in choice for k in group)))
    return configs


def exhaustive_search(scenario: Scenario, config: Optional[SchedulerConfig] = None) -> Solution:
    """
    Best schedule by full enumeration, for micro instances.

    Slots are interchangeable, so multisets of slot configurations are
    enumerated; candidates leaving a floored terminal unscheduled are skipped.

    Raises:
        SchedulingInfeasibleError: if no schedule is feasible
        ValueError: if the instance is too large to enumerate
    """
    config = config or SchedulerConfig()
    configs = _slot_configurations(scenario)
    total = 1
    for i in range(scenario.T):
        total = total * (len(configs) + i) // (i + 1)
    if total > EXHAUSTIVE_LIMIT:
        raise ValueError(f"{total} candidate schedules exceed the exhaustive-search limit of {EXHAUSTIVE_LIMIT}")

    needed = set(np.flatnonzero(scenario.min_rates > 0).tolist())
    best: Optional[Solution] = None
    best_score = float('inf')
    evaluated = 0
    for combo in itertools.combinations_with_replacement(range(len(configs)), scenario.T):
        covered = set()
        for index in combo:
            covered.update(configs[index][1])
        if not needed <= covered:
            continue
        alpha = np.zeros((scenario.B, scenario.T), dtype=bool)
        beta = np.zeros((scenario.K, scenario.T), dtype=bool)
        for t, index in enumerate(combo):
            beams, terminals = configs[index]
            alpha[list(beams), t] = True
            beta[list(terminals), t] = True
        solution = evaluate_assignment(scenario, Assignment(alpha, beta), config, scheme='exhaustive')
        evaluated += 1
        if solution is None:
            continue
        score = objective_score(solution, config.objective)
        if score < best_score:
            best, best_score = solution, score

    logger.info(f"Exhaustive search evaluated {evaluated} schedules")
    if best is None:
        raise SchedulingInfeasibleError("no feasible schedule exists")
    return best


def matching_schedule(scenario: Scenario, matching_triples: Sequence[Tuple[int, int, int]],
                      config: Optional[SchedulerConfig] = None) -> Solution:
    """
    Feasible schedule for a hardness instance whose slots follow a matching.

    Slot x may only light the pair (y, B/2 + z) of a triple (x, y, z). Every
    choice of B/2 triples with pairwise distinct x, y and z is tried, and
    the first one power allocation makes feasible is returned.

    Raises:
        SchedulingInfeasibleError: if no matching of the family is feasible
        ValueError: if the scenario is not shaped like a hardness instance
    """
    config = config or SchedulerConfig()
    half = scenario.B // 2
    if scenario.B % 2 or scenario.T != half or scenario.K != scenario.B:
        raise ValueError("matching schedules need an even B, T = B/2 and one terminal per beam")
    triples = validate_triples(matching_triples, scenario.B)
    terminal_of = [int(scenario.members[b][0]) for b in range(scenario.B)]

    tried = 0
    for chosen in itertools.combinations(triples, half):
        if any(len({triple[i] for triple in chosen}) < half for i in range(3)):
            continue
        beam_slots = [(b, x) for x, y, z in chosen for b in (y, half + z)]
        assignment = Assignment.from_sets(scenario, beam_slots, [(terminal_of[b], t) for b, t in beam_slots])
        tried += 1
        solution = evaluate_assignment(scenario, assignment, config, scheme='matching')
        if solution is not None:
            logger.info(f"Matching {sorted(chosen)} is feasible")
            return solution
    raise SchedulingInfeasibleError(f"none of {tried} matchings in the family is feasible")
