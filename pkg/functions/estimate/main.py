"""
Kernel estimates at registered query points
pdmp-rate estimate --config run.json   (config key 'queries')
"""

import logging
import os
import sys
import time

# Add parent directory to path for shared modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared import config
from shared.artifacts import save_report, write_rows_csv
from shared.errors import ConfigError, PdmpError, error_response
from shared.estimators import QueryPoint, StreamingEstimator, survival_flags
from shared.kernels import BandwidthSchedule, check_initial_bandwidths
from shared.pipeline import build_scenario, chain_data
from shared.run_config import load_run_config

logger = logging.getLogger(__name__)


def estimate(args):
    """
    Stream the main chain through F-hat, G-hat and nu-hat at the configured queries

    Bandwidth exponents are alpha_f and beta_f from the config.
    """
    start_time = time.time()

    try:
        run = load_run_config(args.config, args.seed, args.jobs, args.out)
        if run.alpha_f is None or run.beta_f is None:
            raise ConfigError("estimate needs 'alpha_f' and 'beta_f' in the config")
        scenario = build_scenario(run)
        queries = _parse_queries(run.queries, scenario.est_dim)

        data = chain_data(scenario, 0, need_validation=False)
        schedule = BandwidthSchedule(run.v0, run.w0, run.alpha_f, run.beta_f, scenario.est_dim)
        estimator = StreamingEstimator(schedule, scenario.spatial_kernel, scenario.time_kernel, queries,
                                       scenario.periodic_axes)
        estimator.accumulate_all(data.main)

        results = []
        for q in queries:
            raw = estimator.eval_raw(q)
            survival = estimator.estimate_G(q)
            entry = {
                'x': list(q.x),
                't': q.t,
                'F': raw.F,
                'G': raw.G,
                'nu': raw.nu,
                'conditional_density': estimator.estimate_f(q),
                'conditional_survival': survival,
                'rate_along_flow': estimator.estimate_lambda_phi(q),
                'flags': survival_flags(survival),
            }
            if scenario.name != 'crack':
                entry['feasible'] = check_initial_bandwidths(scenario.model, q.x, q.t, run.v0, run.w0,
                                                             scenario.delta)
            results.append(entry)

        report = {
            'kind': 'estimate',
            'model': scenario.name,
            'seed': run.seed,
            'config': run.to_dict(),
            'results': results,
            'snapshot': estimator.to_snapshot(),
            'flags': sorted(set(data.flags).union(*(r['flags'] for r in results))),
        }
        path = save_report(report, os.path.join(run.output_dir, 'estimates.json'))
        csv_path = write_rows_csv(os.path.join(run.output_dir, 'estimates.csv'), _csv_header(scenario.est_dim),
                                  [_csv_row(r) for r in results])

        return {
            'status': 'success',
            'model': scenario.name,
            'count': estimator.count,
            'results': results,
            'flags': report['flags'],
            'outputs': {'report': path, 'estimates': csv_path},
            'processing_time_ms': int((time.time() - start_time) * 1000),
        }, config.EXIT_OK

    except PdmpError as e:
        logger.error(f"Estimation failed: {e.message}")
        return e.to_response(), e.exit_code

    except Exception as e:
        logger.exception("Unexpected error during estimation")
        return error_response('INTERNAL_ERROR', 'Unexpected error occurred', {'error': str(e)}), \
            config.EXIT_INTERNAL_ERROR


def _parse_queries(queries, dim):
    """
    Accepts {"x": [...], "t": value} objects or flat [x_1, ..., x_d, t] lists

    Returns:
        list of QueryPoint
    """
    if not queries:
        raise ConfigError("'queries' must list the (x, t) points to estimate at")
    parsed = []
    for k, q in enumerate(queries):
        if isinstance(q, dict):
            x, t = q.get('x'), q.get('t')
        elif isinstance(q, (list, tuple)) and len(q) >= 2:
            x, t = list(q[:-1]), q[-1]
        else:
            x, t = None, None
        if x is None or t is None or len(x) != dim:
            raise ConfigError(f"Query {k} must give {dim} coordinates and a time", {'query': q})
        parsed.append(QueryPoint.of(x, t))
    return parsed


def _csv_header(dim):
    return [*[f'x_{k + 1}' for k in range(dim)], 't', 'F', 'G', 'nu', 'conditional_density',
            'conditional_survival', 'rate_along_flow', 'feasible', 'g_out_of_range']


def _csv_row(entry):
    return [*entry['x'], entry['t'], entry['F'], entry['G'], entry['nu'], entry['conditional_density'],
            entry['conditional_survival'], entry['rate_along_flow'], entry.get('feasible', ''),
            'g_out_of_range' in entry['flags']]
