"""
Interference-free lower bound (LBA).

Dropping inter-beam interference and assuming perfect SIC lets each beam's
power be written in closed form from its terminals' rates, so the per-beam
budget becomes a sum of exponentials in the rates. With the binaries relaxed
that is a convex program; branch-and-bound over the binaries gives a lower
bound on the best achievable demand gap.
"""

import heapq
import logging
from dataclasses import dataclass, field, fields
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np

from config import Config, ConfigError
from model.scenario import Scenario
from model.linkmodel import Assignment, PowerPlan, Solution, score, MBPS
from model.scenario_io import write_csv
from solvers.barrier import BarrierProblem, minimize, phase_one
from solvers.power_solver import SolverConfig, free_terminals, LN2
from solvers.schedulers import SchedulerConfig, run_uba

logger = logging.getLogger(__name__)

BOUND_REPORT_HEADER = ['scenario_id', 'lower', 'upper', 'rel_gap', 'nodes_explored', 'status']


class _Contradiction(Exception):
    pass


def interference_free_powers(gains: Sequence[float], rates_bps: Sequence[float], noise_power_W: float,
                             bandwidth_Hz: float) -> np.ndarray:
    """
    Powers that deliver the given rates in one beam under perfect SIC.

    Terminals are in decoding order (strongest first); each one sees only
    the power of the stronger terminals plus noise.
    """
    gains = np.asarray(gains, dtype=float)
    rates = np.asarray(rates_bps, dtype=float)
    powers = np.zeros(len(gains))
    stronger = 0.0
    for k in range(len(gains)):
        need = 2.0 ** (rates[k] / bandwidth_Hz) - 1.0
        if need > 0:
            powers[k] = need * (stronger + noise_power_W / gains[k])
        stronger += powers[k]
    return powers


def power_budget_lhs(gains: Sequence[float], rates_bps: Sequence[float], noise_power_W: float,
                     bandwidth_Hz: float) -> float:
    """Total power of interference_free_powers written as a sum of exponentials of rate tails."""
    gains = np.asarray(gains, dtype=float)
    rates = np.asarray(rates_bps, dtype=float)
    if len(gains) == 0:
        return 0.0
    c = noise_power_W / gains
    weights = np.diff(np.concatenate(([0.0], c)))
    tails = np.cumsum(rates[::-1])[::-1] / bandwidth_Hz
    return float(np.sum(weights * 2.0 ** tails) - c[-1])


def compute_rmax(scenario: Scenario) -> np.ndarray:
    """Interference-free full-power single-slot rate of every terminal (bps)."""
    snr = scenario.direct_gains * scenario.P_beam_W / scenario.noise_power_W
    return scenario.bandwidth_Hz * np.log2(1.0 + snr)


@dataclass(frozen=True)
class LbaConfig:
    node_budget: int = Config.NODE_BUDGET
    integrality_tol: float = 1e-4
    solver: SolverConfig = field(default_factory=SolverConfig)

    def validate(self) -> None:
        if self.node_budget < 1:
            raise ConfigError(f"lba.node_budget must be at least 1 (got {self.node_budget})")
        if not 0 < self.integrality_tol < 0.5:
            raise ConfigError(f"lba.integrality_tol must lie in (0, 0.5) (got {self.integrality_tol})")
        self.solver.validate()

    @classmethod
    def from_dict(cls, data: Dict[str, Any], solver: Optional[SolverConfig] = None) -> 'LbaConfig':
        known = {f.name for f in fields(cls)} - {'solver'}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown lba settings: {', '.join(unknown)}")
        return cls(solver=solver or SolverConfig(), **data)


@dataclass
class BnBNode:
    fixed: np.ndarray  # NaN where the variable is free
    relaxation_value: float
    depth: int
    point: np.ndarray


@dataclass
class LbaResult:
    lower_bound: float  # Mbps^2
    nodes_explored: int
    status: str  # 'optimal' | 'incomplete' | 'infeasible'
    solution: Optional[Solution] = None
    branching: List[Tuple[int, int]] = field(default_factory=list)  # (depth, variable) per split


@dataclass
class _Chain:
    t: int
    r_index: np.ndarray  # in decoding order
    weights: np.ndarray
    c_last: float


class LbaModel:
    """
    Variable layout and constraint data of the relaxed program.

    Variables (normalized rates r, binaries beta and alpha, gaps delta) are
    stacked as [r (K x T), beta (K x T), alpha (B x T), delta (K)].
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        K, T, B = scenario.K, scenario.T, scenario.B
        self.K, self.T, self.B = K, T, B
        W = scenario.bandwidth_Hz
        self.free = free_terminals(scenario)
        a = scenario.direct_gains * scenario.P_beam_W / scenario.noise_power_W
        self.rmax = np.where(self.free, np.log2(1.0 + a), 0.0)
        self.demands = scenario.demands / W
        self.floors = scenario.min_rates / W
        self.size = 2 * K * T + B * T + K

        self.base = np.full(self.size, np.nan)
        for k in np.flatnonzero(~self.free):
            for t in range(T):
                self.base[self.r(k, t)] = 0.0
                self.base[self.beta(k, t)] = 0.0
        for k in np.flatnonzero(self.demands <= 0):
            self.base[self.delta(k)] = 0.0

        free_members = [[int(k) for k in scenario.members[b] if self.free[k]] for b in range(B)]
        self.free_members = free_members
        self.partners = [[o for o in range(B) if o != b and scenario.conflicts(b, o)] for b in range(B)]
        self.binaries = np.array([self.alpha(b, t) for b in range(B) for t in range(T)] +
                                 [self.beta(k, t) for k in np.flatnonzero(self.free) for t in range(T)], dtype=int)
        self._build_linear(scenario)
        self._build_chains(a)

    def r(self, k, t):
        return k * self.T + t

    def beta(self, k, t):
        return self.K * self.T + k * self.T + t

    def alpha(self, b, t):
        return 2 * self.K * self.T + b * self.T + t

    def delta(self, k):
        return 2 * self.K * self.T + self.B * self.T + k

    def _build_linear(self, scenario: Scenario) -> None:
        rows: List[Dict[int, float]] = []
        rhs: List[float] = []

        def add(coeffs, bound):
            rows.append(coeffs)
            rhs.append(bound)

        K0, B0 = scenario.K0, scenario.B0
        for k in np.flatnonzero(self.free):
            for t in range(self.T):
                add({self.r(k, t): 1.0, self.beta(k, t): -self.rmax[k]}, 0.0)
                add({self.r(k, t): -1.0}, 0.0)
                add({self.beta(k, t): 1.0}, 1.0)
                add({self.beta(k, t): -1.0}, 0.0)
        for b in range(self.B):
            for t in range(self.T):
                add({self.alpha(b, t): 1.0}, 1.0)
                add({self.alpha(b, t): -1.0}, 0.0)
                coeffs = {self.beta(k, t): 1.0 for k in self.free_members[b]}
                coeffs[self.alpha(b, t)] = -float(K0)
                add(coeffs, 0.0)
        for t in range(self.T):
            add({self.alpha(b, t): 1.0 for b in range(self.B)}, float(B0))
            for a, b in sorted(scenario.conflict_set):
                add({self.alpha(a, t): 1.0, self.alpha(b, t): 1.0}, 1.0)
        for k in range(self.K):
            if self.demands[k] > 0:
                coeffs = {self.r(k, t): -1.0 for t in range(self.T)}
                coeffs[self.delta(k)] = -1.0
                add(coeffs, -self.demands[k])
                add({self.delta(k): -1.0}, 0.0)
            if self.floors[k] > 0:
                add({self.r(k, t): -1.0 for t in range(self.T)}, -self.floors[k])

        self.A = np.zeros((len(rows), self.size))
        for i, coeffs in enumerate(rows):
            for j, value in coeffs.items():
                self.A[i, j] = value
        self.b = np.array(rhs)

    def _build_chains(self, a: np.ndarray) -> None:
        self.chains: List[_Chain] = []
        for b in range(self.B):
            members = sorted(self.free_members[b], key=lambda k: (1.0 / a[k], k))
            if not members:
                continue
            c = 1.0 / a[members]
            weights = np.diff(np.concatenate(([0.0], c)))
            for t in range(self.T):
                self.chains.append(_Chain(t, np.array([self.r(k, t) for k in members]), weights, float(c[-1])))

    def start(self) -> np.ndarray:
        scenario = self.scenario
        v = np.zeros(self.size)
        alpha = 0.4 * min(1.0, scenario.B0 / self.B)
        for b in range(self.B):
            n = max(len(self.free_members[b]), 1)
            beta = min(0.5, 0.5 * scenario.K0 * alpha / n)
            for t in range(self.T):
                v[self.alpha(b, t)] = alpha
                for k in self.free_members[b]:
                    v[self.beta(k, t)] = beta
                    v[self.r(k, t)] = 1e-3 * self.rmax[k] * beta
        for k in range(self.K):
            v[self.delta(k)] = self.demands[k] + 1.0
        return v


class LbaRelaxation(BarrierProblem):
    """Relaxed program over the free variables of one branch-and-bound node."""

    def __init__(self, model: LbaModel, fixed: np.ndarray):
        self.model = model
        self.free = np.isnan(fixed)
        self.point = np.where(self.free, 0.0, fixed)
        self.size = int(self.free.sum())
        rhs = model.b - model.A[:, ~self.free] @ self.point[~self.free]
        A = model.A[:, self.free]
        active = np.any(A != 0, axis=1)
        self.contradiction = bool(np.any(rhs[~active] < -1e-12))
        self.A, self.rhs = A[active], rhs[active]

        self.position = np.full(model.size, -1)
        self.position[self.free] = np.arange(self.size)
        self.chains = []
        for chain in model.chains:
            if np.any(self.free[chain.r_index]):
                self.chains.append(chain)
            elif self._chain_value(chain, self.point) > 1e-12:
                self.contradiction = True
        self.deltas = np.array([model.delta(k) for k in range(model.K) if model.demands[k] > 0], dtype=int)

    def full(self, z: np.ndarray) -> np.ndarray:
        v = self.point.copy()
        v[self.free] = z
        return v

    @staticmethod
    def _chain_value(chain: _Chain, v: np.ndarray) -> float:
        tails = np.cumsum(v[chain.r_index][::-1])[::-1]
        return float(np.sum(chain.weights * 2.0 ** tails) - chain.c_last - 1.0)

    def _chain_terms(self, chain: _Chain, v: np.ndarray):
        tails = np.cumsum(v[chain.r_index][::-1])[::-1]
        terms = chain.weights * 2.0 ** tails
        # d/dr_i of sum_j w_j 2^{tail_j} collects every j <= i
        return float(terms.sum() - chain.c_last - 1.0), np.cumsum(terms)

    def objective(self, z):
        v = self.full(z)
        grad_full = np.zeros(self.model.size)
        grad_full[self.deltas] = 2.0 * v[self.deltas]
        value = float(np.sum(v[self.deltas] ** 2))
        hess = np.zeros((self.size, self.size))
        pos = self.position[self.deltas]
        pos = pos[pos >= 0]
        hess[pos, pos] = 2.0
        return value, grad_full[self.free], hess

    def constraints(self, z):
        v = self.full(z)
        values = [self.A @ z - self.rhs]
        jac = [self.A]
        if self.chains:
            rows = np.zeros((len(self.chains), self.size))
            chain_values = np.zeros(len(self.chains))
            for i, chain in enumerate(self.chains):
                chain_values[i], partial = self._chain_terms(chain, v)
                pos = self.position[chain.r_index]
                keep = pos >= 0
                rows[i, pos[keep]] = LN2 * partial[keep]
            values.append(chain_values)
            jac.append(rows)
        return np.concatenate(values), np.vstack(jac)

    def constraint_hessian(self, z, weights):
        v = self.full(z)
        hess = np.zeros((self.size, self.size))
        offset = len(self.rhs)
        for i, chain in enumerate(self.chains):
            _, partial = self._chain_terms(chain, v)
            n = len(chain.r_index)
            idx = np.arange(n)
            block = LN2 ** 2 * partial[np.minimum.outer(idx, idx)]
            pos = self.position[chain.r_index]
            keep = pos >= 0
            hess[np.ix_(pos[keep], pos[keep])] += weights[offset + i] * block[np.ix_(keep, keep)]
        return hess


def _propagate(model: LbaModel, fixed: np.ndarray) -> Optional[np.ndarray]:
    """Apply the fixings binary values imply; None on contradiction."""
    fixed = fixed.copy()
    scenario = model.scenario

    def assign(i, value):
        current = fixed[i]
        if np.isnan(current):
            fixed[i] = value
            return True
        if current != value:
            raise _Contradiction()
        return False

    try:
        changed = True
        while changed:
            changed = False
            for k in np.flatnonzero(model.free):
                for t in range(model.T):
                    beta = fixed[model.beta(k, t)]
                    if beta == 0.0:
                        changed |= assign(model.r(k, t), 0.0)
                    elif beta == 1.0:
                        changed |= assign(model.alpha(int(scenario.beam_of[k]), t), 1.0)
            for t in range(model.T):
                for b in range(model.B):
                    alpha = fixed[model.alpha(b, t)]
                    if alpha == 0.0:
                        for k in model.free_members[b]:
                            changed |= assign(model.beta(k, t), 0.0)
                    elif alpha == 1.0:
                        for o in model.partners[b]:
                            changed |= assign(model.alpha(o, t), 0.0)
                    ones = sum(1 for k in model.free_members[b] if fixed[model.beta(k, t)] == 1.0)
                    if ones > scenario.K0:
                        raise _Contradiction()
                    if ones == scenario.K0:
                        for k in model.free_members[b]:
                            if np.isnan(fixed[model.beta(k, t)]):
                                changed |= assign(model.beta(k, t), 0.0)
                lit = sum(1 for b in range(model.B) if fixed[model.alpha(b, t)] == 1.0)
                if lit > scenario.B0:
                    raise _Contradiction()
                if lit == scenario.B0:
                    for b in range(model.B):
                        if np.isnan(fixed[model.alpha(b, t)]):
                            changed |= assign(model.alpha(b, t), 0.0)
    except _Contradiction:
        return None
    return fixed


def _solve_node(model: LbaModel, fixed: np.ndarray, config: LbaConfig) -> Optional[Tuple[float, float, np.ndarray]]:
    """Relaxation value, its duality-gap bound and the full point; None if the node is empty."""
    problem = LbaRelaxation(model, fixed)
    if problem.contradiction:
        return None
    if problem.size == 0:
        value, _, _ = problem.objective(np.zeros(0))
        g, _ = problem.constraints(np.zeros(0))
        return (value, 0.0, problem.point) if np.all(g <= 1e-12) else None
    settings = config.solver.barrier_settings()
    z = phase_one(problem, model.start()[problem.free], settings)
    if z is None:
        return None
    result = minimize(problem, z, settings)
    return result.value, result.gap_bound, problem.full(result.z)


def _round(model: LbaModel, v: np.ndarray, tol: float) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Smallest binaries carrying the node's rates, if they satisfy every structural limit."""
    scenario = model.scenario
    K, T = model.K, model.T
    rates = v[:K * T].reshape(K, T)
    beta = rates > tol * model.rmax[:, None]
    rates = np.where(beta, rates, 0.0)
    alpha = np.zeros((model.B, T), dtype=bool)
    for b in range(model.B):
        members = model.free_members[b]
        if members:
            alpha[b] = beta[members].any(axis=0)
            if np.any(beta[members].sum(axis=0) > scenario.K0):
                return None
    if np.any(alpha.sum(axis=0) > scenario.B0):
        return None
    for a, b in scenario.conflict_set:
        if np.any(alpha[a] & alpha[b]):
            return None
    return alpha, beta, rates


def _minimal_binaries(model: LbaModel, v: np.ndarray) -> np.ndarray:
    """Least binary values the node's rates need, in model.binaries order."""
    K, T = model.K, model.T
    rates = v[:K * T].reshape(K, T)
    beta = np.where(model.rmax[:, None] > 0, rates / np.maximum(model.rmax[:, None], 1e-300), 0.0)
    values = np.zeros(model.size)
    for b in range(model.B):
        members = model.free_members[b]
        for t in range(T):
            need = max([beta[k, t] for k in members] + [sum(beta[k, t] for k in members) / model.scenario.K0, 0.0])
            values[model.alpha(b, t)] = need
        for k in members:
            values[[model.beta(k, t) for t in range(T)]] = beta[k]
    return np.clip(values[model.binaries], 0.0, 1.0)


def _branch_variable(model: LbaModel, fixed: np.ndarray, v: np.ndarray, tol: float) -> Optional[int]:
    open_mask = np.isnan(fixed[model.binaries])
    for values in (_minimal_binaries(model, v), v[model.binaries]):
        fraction = np.round(np.minimum(values, 1.0 - values), 9)
        fraction[~open_mask] = -1.0
        best = int(np.argmax(fraction))
        if fraction[best] > tol:
            return int(model.binaries[best])
    return None


def _gap_value(model: LbaModel, rates: np.ndarray) -> float:
    return float(np.sum(np.maximum(model.demands - rates.sum(axis=1), 0.0) ** 2))


def _relaxed_solution(scenario: Scenario, model: LbaModel, alpha: np.ndarray, beta: np.ndarray,
                      rates: np.ndarray, lower_mbps2: float) -> Solution:
    W = scenario.bandwidth_Hz
    rates_bps = rates * W
    p = np.zeros((scenario.K, scenario.T))
    for b in range(scenario.B):
        members = sorted(model.free_members[b], key=lambda k: (-scenario.direct_gains[k], k))
        if not members:
            continue
        for t in range(scenario.T):
            p[members, t] = interference_free_powers(scenario.direct_gains[members], rates_bps[members, t],
                                                     scenario.noise_power_W, W)
    capacities = rates_bps.sum(axis=1)
    power = PowerPlan(p)
    aux = {'sum_squared_gap': score(scenario, capacities, 'sum_squared_gap'),
           'worst_octr': score(scenario, capacities, 'worst_octr'),
           'unmet': score(scenario, capacities, 'unmet'),
           'total_power_W': power.total_W,
           'active_beam_slots': int(alpha.sum()),
           'multiplexed_slots': int(sum(np.sum(beta[model.free_members[b]].sum(axis=0) >= 2)
                                        for b in range(scenario.B) if model.free_members[b]))}
    return Solution(assignment=Assignment(alpha, beta), power=power, per_slot_rates=rates_bps,
                    capacities=capacities, objective=lower_mbps2, aux_metrics=aux, status='relaxed', scheme='lba')


def solve_lba(scenario: Scenario, config: Optional[LbaConfig] = None) -> LbaResult:
    """
    Branch-and-bound on the interference-free program.

    Nodes are explored best-bound first and split on the most fractional
    binary (lowest index on ties). A node whose rates fit a structurally
    valid schedule is closed with that schedule as incumbent. When the node
    budget runs out the smallest open bound is returned and flagged
    incomplete.
    """
    config = config or LbaConfig()
    config.validate()
    model = LbaModel(scenario)
    scale = (scenario.bandwidth_Hz / MBPS) ** 2
    tol = config.integrality_tol

    root_fixed = _propagate(model, model.base)
    root = _solve_node(model, root_fixed, config) if root_fixed is not None else None
    nodes = 1
    branching: List[Tuple[int, int]] = []
    if root is None:
        logger.warning(f"Relaxation of {scenario.scenario_id} is infeasible")
        return LbaResult(lower_bound=float('inf'), nodes_explored=nodes, status='infeasible', branching=branching)

    incumbent_value = float('inf')
    incumbent = None
    closed_bound = float('inf')
    heap: List[Tuple[float, int, BnBNode]] = []
    counter = 0

    def consider(fixed, solved, depth, parent_bound):
        nonlocal incumbent_value, incumbent, closed_bound, counter
        value, gap, v = solved
        bound = max(value - gap, parent_bound)
        rounded = _round(model, v, tol)
        if rounded is not None:
            closed_bound = min(closed_bound, bound)
            candidate = _gap_value(model, rounded[2])
            if candidate < incumbent_value:
                incumbent_value, incumbent = candidate, rounded
                logger.debug(f"New incumbent {candidate * scale:.6g} Mbps^2 at depth {depth}")
            return
        counter += 1
        heapq.heappush(heap, (bound, counter, BnBNode(fixed, bound, depth, v)))

    consider(root_fixed, root, 0, 0.0)
    status = 'optimal'
    while heap:
        bound, _, node = heapq.heappop(heap)
        if bound >= incumbent_value * (1.0 - 1e-9) - Config.GAP_FLOOR / scale:
            heap.clear()
            break
        index = _branch_variable(model, node.fixed, node.point, tol)
        if index is None:
            closed_bound = min(closed_bound, bound)
            continue
        if nodes >= config.node_budget:
            heapq.heappush(heap, (bound, 0, node))
            status = 'incomplete'
            break
        branching.append((node.depth, index))
        for value in (0.0, 1.0):
            child = node.fixed.copy()
            child[index] = value
            child = _propagate(model, child)
            if child is None:
                continue
            solved = _solve_node(model, child, config)
            nodes += 1
            if solved is not None:
                consider(child, solved, node.depth + 1, node.relaxation_value)

    open_bound = min((entry[0] for entry in heap), default=float('inf'))
    lower = max(min(incumbent_value, closed_bound, open_bound), 0.0) * scale
    if not np.isfinite(lower):
        logger.warning(f"No branch of {scenario.scenario_id} is feasible")
        return LbaResult(lower_bound=float('inf'), nodes_explored=nodes, status='infeasible', branching=branching)
    if status == 'incomplete':
        logger.warning(f"LBA stopped at the node budget ({nodes} nodes); bound {lower:.6g} Mbps^2 is conservative")
    else:
        logger.info(f"LBA finished after {nodes} nodes: lower bound {lower:.6g} Mbps^2")
    if incumbent is None:
        incumbent = (np.zeros((scenario.B, scenario.T), dtype=bool), np.zeros((scenario.K, scenario.T), dtype=bool),
                     np.zeros((scenario.K, scenario.T)))
    solution = _relaxed_solution(scenario, model, incumbent[0], incumbent[1], incumbent[2], lower)
    return LbaResult(lower_bound=lower, nodes_explored=nodes, status=status, solution=solution,
                     branching=branching)


@dataclass
class SandwichReport:
    scenario_id: str
    lower: float
    upper: float
    rel_gap: float
    nodes_explored: int
    status: str

    def as_row(self) -> Dict[str, Any]:
        return {'scenario_id': self.scenario_id, 'lower': repr(self.lower), 'upper': repr(self.upper),
                'rel_gap': repr(self.rel_gap), 'nodes_explored': self.nodes_explored, 'status': self.status}


def relative_gap(lower: float, upper: float) -> float:
    return (upper - lower) / max(lower, Config.GAP_FLOOR)


def sandwich_report(scenario: Scenario, config: Optional[LbaConfig] = None,
                    upper_solution: Optional[Solution] = None, lba: Optional[LbaResult] = None) -> SandwichReport:
    """
    Pair the LBA lower bound with a UBA upper bound.

    An incomplete LBA keeps status 'incomplete'; its gap is then an
    overestimate.
    """
    config = config or LbaConfig()
    lba = lba or solve_lba(scenario, config)
    if upper_solution is None:
        upper_solution = run_uba(scenario, config=SchedulerConfig(solver=config.solver))
    upper = upper_solution.objective
    report = SandwichReport(scenario_id=scenario.scenario_id, lower=lba.lower_bound, upper=upper,
                            rel_gap=relative_gap(lba.lower_bound, upper), nodes_explored=lba.nodes_explored,
                            status=lba.status)
    logger.info(f"Sandwich for {scenario.scenario_id}: [{report.lower:.6g}, {report.upper:.6g}] "
                f"gap {report.rel_gap:.3%}")
    return report


def write_bound_report(path: str, reports: Sequence[SandwichReport]) -> None:
    write_csv(path, BOUND_REPORT_HEADER, [report.as_row() for report in reports])
