#!/usr/bin/env python3
"""
bhnoma command line

Generates scenarios, runs one solver scheme on a scenario, and sweeps schemes
over seeded scenario batches.

    bhnoma.py generate --spec SPEC.json --out scenario.json [--seed N]
    bhnoma.py solve --scenario FILE_OR_URL --algo uba --out DIR [--config CFG.json] [--gains FILE_OR_URL]
    bhnoma.py sweep --spec EXPERIMENT.json --out DIR [--seeds N] [--jobs N] [--config CFG.json]
"""

import os
import sys
import json
import logging
import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional, Dict, Any, List, Tuple

import numpy as np
from dotenv import load_dotenv

from config import Config, ConfigError
from model.scenario import ScenarioSpec, ScenarioError, generate_scenario
from model.scenario_io import load_scenario, load_gain_table, save_scenario, read_source, write_rows, write_csv
from model.linkmodel import write_solution_csv, write_metrics_csv
from solvers.power_solver import PowerInfeasibleError
from solvers.schedulers import SchedulingInfeasibleError
from solvers.bounding import sandwich_report, write_bound_report
from schemes import SCHEME_CLASSES, create_scheme

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ('demand_mean', 'eta', 'K0', 'B0')
ROW_FIELDS = ['scheme', 'parameter', 'value', 'seed', 'sum_sq_gap_Mbps2', 'worst_octr', 'unmet_Mbps',
              'total_power_W', 'runtime_s', 'status', 'error']
AGGREGATE_FIELDS = ['scheme', 'parameter', 'value', 'n', 'mean_sum_sq_gap_Mbps2', 'stderr_sum_sq_gap_Mbps2',
                    'mean_worst_octr', 'mean_unmet_Mbps', 'mean_total_power_W']
METRIC_FIELDS = ['scheme', 'n', 'mean_sum_sq_gap_Mbps2', 'mean_worst_octr', 'mean_unmet_Mbps']
POWER_TRACE_FIELDS = ['iter', 'objective', 'max_kkt_residual', 'clamped_terms']


def configure_logging() -> None:
    """Send log records to the console and bhnoma.log at the configured level."""
    logging.basicConfig(
        level=Config.get_log_level(),
        format=Config.LOG_FORMAT,
        handlers=[
            logging.FileHandler(Config.LOG_FILE),
            logging.StreamHandler(sys.stdout)
        ]
    )


def generator_spec(data: Dict[str, Any]) -> ScenarioSpec:
    """ScenarioSpec from a preset ('desk' or 'full') plus explicit field overrides."""
    data = dict(data)
    preset = data.pop('preset', 'desk')
    data.pop('seed', None)
    if preset == 'desk':
        settings = Config.desk_spec()
    elif preset == 'full':
        settings = Config.full_scale_spec()
    else:
        raise ScenarioError(f"unknown preset '{preset}' (expected 'desk' or 'full')", "spec.preset")
    settings.update(data)
    spec = ScenarioSpec.from_dict(settings)
    spec.validate()
    return spec


@dataclass
class ExperimentSpec:
    generator: Dict[str, Any]
    schemes: List[str]
    parameter: str
    values: List[float]
    seeds: int = 1
    base_seed: int = 0
    overrides: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        unknown = [name for name in self.schemes if name not in SCHEME_CLASSES]
        if not self.schemes or unknown:
            raise ConfigError(f"schemes must be a nonempty list of known names (unknown: {', '.join(unknown)})")
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep.parameter must be one of {', '.join(SWEEP_PARAMETERS)} (got '{self.parameter}')")
        if not self.values:
            raise ConfigError("sweep.values must not be empty")
        if self.seeds < 0:
            raise ConfigError(f"seeds must be nonnegative (got {self.seeds})")
        generator_spec(self.generator)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentSpec':
        try:
            sweep = data['sweep']
            spec = cls(generator=dict(data.get('generator', {})), schemes=list(data['schemes']),
                       parameter=sweep['parameter'], values=list(sweep['values']),
                       seeds=int(data.get('seeds', 1)), base_seed=int(data.get('base_seed', 0)),
                       overrides=dict(data.get('config', {})))
        except (KeyError, TypeError) as e:
            raise ConfigError(f"experiment spec is missing or mistypes {e}")
        spec.validate()
        return spec


def sweep_point(generator: Dict[str, Any], overrides: Dict[str, Any], parameter: str,
                value: float) -> Tuple[ScenarioSpec, Dict[str, Any]]:
    """Generator spec and solver overrides for one sweep value."""
    spec = generator_spec(generator)
    overrides = json.loads(json.dumps(overrides))
    if parameter == 'eta':
        overrides.setdefault('eval', {})['sic_error_ratio'] = float(value)
    elif parameter == 'K0':
        spec = ScenarioSpec(**dict(asdict(spec), max_multiplexed=int(value)))
    elif parameter == 'B0':
        spec = ScenarioSpec(**dict(asdict(spec), max_active_beams=int(value)))
    else:
        factor = float(value) / (0.5 * (spec.demand_min_bps + spec.demand_max_bps))
        spec = ScenarioSpec(**dict(asdict(spec), demand_min_bps=spec.demand_min_bps * factor,
                                   demand_max_bps=spec.demand_max_bps * factor))
    spec.validate()
    return spec, overrides


def run_sweep_job(job: Dict[str, Any]) -> Dict[str, Any]:
    """One (scheme, sweep value, seed) row; failures are recorded, not raised."""
    row = {'scheme': job['scheme'], 'parameter': job['parameter'], 'value': job['value'], 'seed': job['seed'],
           'sum_sq_gap_Mbps2': '', 'worst_octr': '', 'unmet_Mbps': '', 'total_power_W': '', 'runtime_s': '',
           'status': 'error', 'error': ''}
    try:
        spec, overrides = sweep_point(job['generator'], job['overrides'], job['parameter'], job['value'])
        scenario = generate_scenario(spec, job['seed'])
        solution = create_scheme(job['scheme'], overrides).run(scenario)
        row.update({'sum_sq_gap_Mbps2': solution.aux_metrics['sum_squared_gap'],
                    'worst_octr': solution.aux_metrics['worst_octr'],
                    'unmet_Mbps': solution.aux_metrics['unmet'],
                    'total_power_W': solution.aux_metrics['total_power_W'],
                    'runtime_s': solution.runtime_s, 'status': solution.status})
    except (SchedulingInfeasibleError, PowerInfeasibleError) as e:
        row.update({'status': 'infeasible', 'error': str(e)})
    except Exception as e:
        row['error'] = f"{type(e).__name__}: {e}"
    return row


def aggregate_rows(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Mean and standard error per (scheme, parameter, value), skipping failed runs."""
    groups: Dict[tuple, List[Dict[str, Any]]] = {}
    for row in rows:
        if row['status'] == 'error' or row['sum_sq_gap_Mbps2'] == '':
            continue
        groups.setdefault((row['scheme'], row['parameter'], row['value']), []).append(row)
    aggregate = []
    for (scheme, parameter, value), members in groups.items():
        gaps = np.array([float(r['sum_sq_gap_Mbps2']) for r in members])
        n = len(gaps)
        aggregate.append({
            'scheme': scheme, 'parameter': parameter, 'value': value, 'n': n,
            'mean_sum_sq_gap_Mbps2': float(gaps.mean()),
            'stderr_sum_sq_gap_Mbps2': float(gaps.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            'mean_worst_octr': float(np.mean([float(r['worst_octr']) for r in members])),
            'mean_unmet_Mbps': float(np.mean([float(r['unmet_Mbps']) for r in members])),
            'mean_total_power_W': float(np.mean([float(r['total_power_W']) for r in members])),
        })
    return aggregate


def metric_matrix(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """All three metrics averaged per scheme over every successful row."""
    matrix = []
    for scheme in dict.fromkeys(row['scheme'] for row in rows):
        members = [r for r in rows if r['scheme'] == scheme and r['sum_sq_gap_Mbps2'] != '']
        if not members:
            continue
        matrix.append({'scheme': scheme, 'n': len(members),
                       'mean_sum_sq_gap_Mbps2': float(np.mean([float(r['sum_sq_gap_Mbps2']) for r in members])),
                       'mean_worst_octr': float(np.mean([float(r['worst_octr']) for r in members])),
                       'mean_unmet_Mbps': float(np.mean([float(r['unmet_Mbps']) for r in members]))})
    return matrix


class ExperimentRunner:
    """Runs the generate, solve and sweep commands."""

    def __init__(self, overrides: Optional[Dict[str, Any]] = None, jobs: int = 1):
        self.overrides = overrides or {}
        self.jobs = max(int(jobs), 1)

    def cmd_generate(self, spec_source: str, out_file: str, seed: Optional[int] = None) -> int:
        data = json.loads(read_source(spec_source))
        if not isinstance(data, dict):
            raise ScenarioError("spec must be a JSON object", spec_source)
        seed = int(data.get('seed', 0)) if seed is None else seed
        scenario = generate_scenario(generator_spec(data), seed)
        save_scenario(scenario, out_file)
        logger.info(f"Wrote scenario {scenario.scenario_id} ({scenario.B} beams, {scenario.K} terminals) to {out_file}")
        return Config.EXIT_OK

    def cmd_solve(self, scenario_source: str, algo: str, out_dir: str, gains_source: Optional[str] = None) -> int:
        scenario = load_scenario(scenario_source)
        if gains_source:
            scenario = load_gain_table(gains_source, scenario)
        scheme = create_scheme(algo, self.overrides)
        if not scheme.validate_config():
            return Config.EXIT_ERROR

        solution = scheme.run(scenario)
        os.makedirs(out_dir, exist_ok=True)
        eval_cfg = scheme.solver_config().eval_config()
        write_solution_csv(os.path.join(out_dir, 'solution.csv'), scheme.evaluation_scenario(scenario),
                           solution, eval_cfg)
        write_metrics_csv(os.path.join(out_dir, 'metrics.csv'), solution)
        trace_fields = list(solution.trace[0].keys()) if solution.trace else POWER_TRACE_FIELDS
        write_rows(os.path.join(out_dir, 'trace.csv'), solution.trace, trace_fields)

        if algo == 'lba':
            upper = create_scheme('uba', self.overrides).run(scenario)
            report = sandwich_report(scenario, scheme.lba_config(), upper_solution=upper, lba=scheme.result)
            write_bound_report(os.path.join(out_dir, 'bound.csv'), [report])

        if not solution.feasible:
            logger.warning(f"{algo} returned an infeasible solution ({len(solution.violations)} violations)")
            return Config.EXIT_INFEASIBLE
        logger.info(f"Results written to {out_dir}")
        return Config.EXIT_OK

    def cmd_sweep(self, spec_source: str, out_dir: str, seeds: Optional[int] = None) -> int:
        data = json.loads(read_source(spec_source))
        experiment = ExperimentSpec.from_dict(data)
        if seeds is not None:
            experiment.seeds = seeds
        overrides = dict(self.overrides)
        overrides.update(experiment.overrides)

        jobs = [{'scheme': scheme, 'parameter': experiment.parameter, 'value': value,
                 'seed': experiment.base_seed ^ i, 'generator': experiment.generator, 'overrides': overrides}
                for value in experiment.values for scheme in experiment.schemes for i in range(experiment.seeds)]
        logger.info(f"Sweeping {experiment.parameter} over {len(experiment.values)} values: "
                    f"{len(jobs)} runs on {self.jobs} workers")
        if self.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                rows = list(pool.map(run_sweep_job, jobs))
        else:
            rows = [run_sweep_job(job) for job in jobs]

        failed = [row for row in rows if row['status'] == 'error']
        for row in failed:
            logger.error(f"{row['scheme']} at {row['parameter']}={row['value']}, seed {row['seed']}: {row['error']}")
        write_csv(os.path.join(out_dir, 'rows.csv'), ROW_FIELDS, rows)
        write_csv(os.path.join(out_dir, 'aggregate.csv'), AGGREGATE_FIELDS, aggregate_rows(rows))
        write_csv(os.path.join(out_dir, 'metrics.csv'), METRIC_FIELDS, metric_matrix(rows))
        logger.info(f"Sweep finished: {len(rows) - len(failed)} of {len(rows)} runs succeeded")
        return Config.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='bhnoma', description='Beam-hopping NOMA resource allocation')
    commands = parser.add_subparsers(dest='command', required=True)

    generate = commands.add_parser('generate', help='synthesize a scenario file')
    generate.add_argument('--spec', required=True, help='generator spec JSON (path or URL)')
    generate.add_argument('--out', required=True, help='scenario JSON to write')
    generate.add_argument('--seed', type=int, help='overrides the seed in the spec')

    solve = commands.add_parser('solve', help='run one scheme on a scenario')
    solve.add_argument('--scenario', required=True, help='scenario JSON (path or URL)')
    solve.add_argument('--algo', required=True, choices=list(SCHEME_CLASSES))
    solve.add_argument('--gains', help='beam_id,terminal_id,gain_linear table (path or URL)')
    solve.add_argument('--config', help='JSON settings overrides')
    solve.add_argument('--out', required=True, help='output directory')

    sweep = commands.add_parser('sweep', help='run schemes over a seeded parameter sweep')
    sweep.add_argument('--spec', required=True, help='experiment spec JSON (path or URL)')
    sweep.add_argument('--config', help='JSON settings overrides')
    sweep.add_argument('--seeds', type=int, help='overrides the seed count in the spec')
    sweep.add_argument('--jobs', type=int, help='worker processes (default BHNOMA_JOBS or 1)')
    sweep.add_argument('--out', required=True, help='output directory')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        configure_logging()
    except ConfigError as e:
        print(f"bhnoma: {e}", file=sys.stderr)
        return Config.EXIT_ERROR

    env_vars = Config.get_environment_variables()
    try:
        config_path = getattr(args, 'config', None) or env_vars['BHNOMA_CONFIG']
        overrides = Config.load_overrides(config_path) if config_path else {}
        jobs = getattr(args, 'jobs', None) or int(env_vars['BHNOMA_JOBS'] or 1)
        runner = ExperimentRunner(overrides, jobs)

        if args.command == 'generate':
            return runner.cmd_generate(args.spec, args.out, args.seed)
        if args.command == 'solve':
            return runner.cmd_solve(args.scenario, args.algo, args.out, args.gains)
        return runner.cmd_sweep(args.spec, args.out, args.seeds)

    except (SchedulingInfeasibleError, PowerInfeasibleError) as e:
        logger.error(f"Infeasible: {e}")
        return Config.EXIT_INFEASIBLE
    except (ValueError, OSError) as e:
        logger.error(f"{e}")
        return Config.EXIT_ERROR
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        return Config.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
