"""
Reference schemes the BH-NOMA schedulers are compared against.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import networkx as nx

from model.scenario import Scenario, conflict_graph
from model.linkmodel import ConstraintRegime, Solution, evaluate_solution
from solvers.power_solver import PowerInfeasibleError, free_terminals, run_alg1
from solvers.schedulers import (SchedulerConfig, EjpbtConfig, run_uba, run_ejpbt, round_robin_assignment)

logger = logging.getLogger(__name__)

COLOR_COUNTS = (1, 2, 4)
ALWAYS_ON = ConstraintRegime(beam_cap=False, conflicts=False)


@dataclass(frozen=True)
class ColorPlan:
    colors_per_beam: Tuple[int, ...]
    color_count: int
    per_color_bandwidth_Hz: float

    def orthogonal(self, a: int, b: int) -> bool:
        return self.colors_per_beam[a] != self.colors_per_beam[b]

    def apply(self, scenario: Scenario) -> Scenario:
        """Scenario with all beams lit, orthogonal colors decoupled and the per-color bandwidth."""
        gains = np.array(scenario.channel.gains)
        colors = np.asarray(self.colors_per_beam)
        gains[colors[:, None] != colors[scenario.beam_of][None, :]] = 0.0
        channel = replace(scenario.channel, gains=gains, bandwidth_Hz=self.per_color_bandwidth_Hz)
        return replace(scenario, channel=channel, B0=scenario.B, conflict_set=frozenset())


def build_color_plan(scenario: Scenario, color_count: int) -> ColorPlan:
    """
    Assign frequency/polarization colors so conflicting beams differ.

    One color reuses the full band everywhere; two colors are the two
    polarizations over the full band; four colors split the band in two
    segments, each with both polarizations.

    Raises:
        ValueError: for an unsupported count or an uncolorable conflict graph
    """
    if color_count not in COLOR_COUNTS:
        raise ValueError(f"color_count must be one of {COLOR_COUNTS} (got {color_count})")
    graph = conflict_graph(scenario)
    if color_count == 1:
        colors = {b: 0 for b in graph.nodes}
    elif color_count == 2:
        if not nx.is_bipartite(graph):
            raise ValueError("conflict graph is not two-colorable")
        colors = nx.bipartite.color(graph)
    else:
        colors = nx.greedy_color(graph, strategy='largest_first')
        if max(colors.values(), default=0) >= color_count:
            raise ValueError(f"greedy coloring needs more than {color_count} colors")
    bandwidth = scenario.bandwidth_Hz / 2.0 if color_count == 4 else scenario.bandwidth_Hz
    return ColorPlan(tuple(int(colors[b]) for b in range(scenario.B)), color_count, bandwidth)


def run_bh_oma(scenario: Scenario, config: Optional[SchedulerConfig] = None) -> Solution:
    """Beam hopping without multiplexing: UBA with one terminal per beam-slot."""
    solution = run_uba(scenario.with_limits(K0=1), config=config)
    solution.scheme = 'bh-oma'
    return solution


def run_color_noma(scenario: Scenario, color_count: int, config: Optional[SchedulerConfig] = None) -> Solution:
    """Always-on NOMA under a frequency-reuse pattern; no beam hopping."""
    config = config or SchedulerConfig()
    plan = build_color_plan(scenario, color_count)
    colored = plan.apply(scenario)
    assignment = round_robin_assignment(colored, [tuple(range(colored.B))], 0)
    scheme = f"{color_count}c-noma"
    try:
        power, _, trace = run_alg1(colored, assignment, None, config.solver)
    except PowerInfeasibleError as e:
        logger.warning(f"{scheme}: {e}")
        power, trace = e.power, []
    solution = evaluate_solution(colored, assignment, power, config.solver.eval_config(), ALWAYS_ON,
                                 scheme=scheme, trace=trace)
    logger.info(f"{scheme}: objective {solution.objective:.6g}, power {solution.aux_metrics['total_power_W']:.4g} W")
    return solution


def largest_remainder(weights: Sequence[float], total: int, cap: int) -> np.ndarray:
    """Integer split of ``total`` proportional to ``weights`` with per-entry cap; ties to the lower index."""
    weights = np.asarray(weights, dtype=float)
    counts = np.zeros(len(weights), dtype=int)
    open_ = weights > 0
    remaining = total
    while remaining > 0 and open_.any():
        quota = remaining * np.where(open_, weights, 0.0) / weights[open_].sum()
        share = np.floor(quota).astype(int)
        leftover = remaining - share.sum()
        order = sorted(np.flatnonzero(open_), key=lambda b: (-(quota[b] - share[b]), b))
        for b in order[:leftover]:
            share[b] += 1
        counts += share
        excess = np.maximum(counts - cap, 0)
        counts -= excess
        open_ &= counts < cap
        remaining = int(excess.sum())
    return counts


def pack_slots(scenario: Scenario, counts: Sequence[int]) -> List[List[int]]:
    """
    Place each beam's slot count greedily, respecting B0 and the conflict set.

    Beams with more slots go first; each takes the least loaded admissible
    slots, lowest index on ties.
    """
    lit: List[List[int]] = [[] for _ in range(scenario.T)]
    for b in sorted(range(scenario.B), key=lambda b: (-counts[b], b)):
        admissible = [t for t in range(scenario.T)
                      if len(lit[t]) < scenario.B0 and not any(scenario.conflicts(b, o) for o in lit[t])]
        admissible.sort(key=lambda t: (len(lit[t]), t))
        chosen = admissible[:counts[b]]
        if len(chosen) < counts[b]:
            logger.warning(f"RA packing placed {len(chosen)} of {counts[b]} slots for beam {b + 1}")
        for t in chosen:
            lit[t].append(b)
    return [sorted(beams) for beams in lit]


def _beam_residual(scenario: Scenario, residual: np.ndarray) -> np.ndarray:
    per_beam = np.zeros(scenario.B)
    np.add.at(per_beam, scenario.beam_of, residual * free_terminals(scenario))
    return per_beam


def run_ra(scenario: Scenario, config: Optional[EjpbtConfig] = None) -> Solution:
    """Slots per beam proportional to beam demand; terminals and powers by the E-JPBT stages."""
    demand = _beam_residual(scenario, scenario.demands)
    counts = largest_remainder(demand, scenario.T * min(scenario.B0, scenario.B), scenario.T)
    lit = pack_slots(scenario, counts)
    logger.info(f"RA slot counts per beam: {counts.tolist()}")

    def selector(t: int, residual: np.ndarray) -> List[int]:
        remaining = _beam_residual(scenario, residual)
        return [b for b in lit[t] if remaining[b] > 0]

    return run_ejpbt(scenario, config, beam_selector=selector, scheme='ra')


def _representatives(scenario: Scenario, residual: np.ndarray) -> dict:
    """Strongest terminal of each beam that still has residual demand."""
    free = free_terminals(scenario)
    reps = {}
    for b in range(scenario.B):
        for k in scenario.members[b]:
            if free[k] and residual[k] > 0:
                reps[b] = int(k)
                break
    return reps


def _greedy_beams(scenario: Scenario, residual: np.ndarray, criterion: str) -> List[int]:
    reps = _representatives(scenario, residual)
    gains = scenario.channel.gains
    P, noise = scenario.P_beam_W, scenario.noise_power_W
    beam_residual = _beam_residual(scenario, residual)
    chosen: List[int] = []

    def sinr_sum(beams):
        total = 0.0
        for b in beams:
            k = reps[b]
            interference = sum(gains[o, k] * P for o in beams if o != b)
            total += gains[b, k] * P / (noise + interference)
        return total

    def cci(beams):
        return sum(gains[o, reps[b]] * P for b in beams for o in beams if o != b)

    while len(chosen) < scenario.B0:
        eligible = [b for b in reps if b not in chosen and not any(scenario.conflicts(b, o) for o in chosen)]
        if not eligible:
            break
        if criterion == 'maxsinr':
            key = lambda b: (-sinr_sum(chosen + [b]), -beam_residual[b], b)
        else:
            key = lambda b: (cci(chosen + [b]), -beam_residual[b], b)
        chosen.append(min(eligible, key=key))
    return sorted(chosen)


def run_maxsinr(scenario: Scenario, config: Optional[EjpbtConfig] = None) -> Solution:
    """Per slot, light the beams with the largest estimated SINR."""
    return run_ejpbt(scenario, config, beam_selector=lambda t, r: _greedy_beams(scenario, r, 'maxsinr'),
                     scheme='maxsinr')


def run_mincci(scenario: Scenario, config: Optional[EjpbtConfig] = None) -> Solution:
    """Per slot, light the beams with the least mutual co-channel interference."""
    return run_ejpbt(scenario, config, beam_selector=lambda t, r: _greedy_beams(scenario, r, 'mincci'),
                     scheme='mincci')


def run_alt_objective(scenario: Scenario, objective: str, config: Optional[SchedulerConfig] = None) -> Solution:
    """
    UBA driven by another fairness criterion.

    ``max_min_octr`` maximizes the worst served fraction R_k/D_k and
    ``min_unmet`` minimizes the total unmet rate.
    """
    if objective not in ('max_min_octr', 'min_unmet'):
        raise ValueError(f"objective must be 'max_min_octr' or 'min_unmet' (got '{objective}')")
    config = config or SchedulerConfig()
    solution = run_uba(scenario, config=replace(config, objective=objective))
    solution.scheme = 'scheme1' if objective == 'max_min_octr' else 'scheme2'
    return solution
