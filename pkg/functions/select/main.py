"""
Selection of the minimum-variance node along the reverse curve
pdmp-rate select --config configs/tcp.json
"""

import logging
import os
import sys
import time

# Add parent directory to path for shared modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared import config
from shared.artifacts import save_report, write_rows_csv
from shared.errors import PdmpError, error_response
from shared.estimators import BatchEstimator
from shared.kernels import BandwidthSchedule
from shared.pipeline import build_geometry, build_scenario, chain_data, select_target, target_states
from shared.run_config import load_run_config
from shared.selector import finalize_report

logger = logging.getLogger(__name__)


def select(args):
    """
    Maximize the estimated criterion along C_x at the first configured target

    alpha^G is cross-validated when the config asks for it. When alpha_f and
    beta_f are configured the rate estimate is attached as well.
    """
    start_time = time.time()

    try:
        run = load_run_config(args.config, args.seed, args.jobs, args.out)
        scenario = build_scenario(run)
        label, x = target_states(scenario)[0]
        geometry = build_geometry(scenario, x)
        data = chain_data(scenario, 0)

        selection, gstate, cv_g = select_target(scenario, data, geometry, run.jobs)
        if run.alpha_f is not None and run.beta_f is not None:
            schedule = BandwidthSchedule(run.v0, run.w0, run.alpha_f, run.beta_f, scenario.est_dim)
            fstate = BatchEstimator(schedule, scenario.spatial_kernel, scenario.time_kernel, data.main,
                                    scenario.periodic_axes)
            finalize_report(selection, fstate, gstate, run.alpha_f, run.beta_f, len(data.main))

        curve = geometry.curve
        d = curve.dim
        rows = [[j, float(curve.taus[j]), *map(float, curve.nodes[j]), float(selection.kappa_values[j]),
                 bool(selection.feasible[j]) if selection.feasible is not None else True]
                for j in range(len(curve))]
        csv_path = write_rows_csv(os.path.join(run.output_dir, 'kappa_curve.csv'),
                                  ['j', 'tau', *[f'xi_{k + 1}' for k in range(d)], 'kappa', 'feasible'], rows)

        report = {
            'kind': 'select',
            'model': scenario.name,
            'seed': run.seed,
            'config': run.to_dict(),
            'results': [{
                'target': label,
                'x': x.tolist(),
                'alpha_g': selection.params['alpha_g'],
                'alpha_f': run.alpha_f,
                'beta_f': run.beta_f,
                'selection': selection.to_dict(),
                'cv_g': cv_g.to_dict() if cv_g is not None else None,
            }],
            'flags': sorted(set(data.flags) | set(selection.flags)),
        }
        path = save_report(report, os.path.join(run.output_dir, 'selection.json'))

        return {
            'status': 'success',
            'target': label,
            'xi_star': selection.xi_star.tolist(),
            'tau_star': selection.tau_star,
            'lambda_hat': selection.lambda_hat,
            'local_maxima': selection.local_maxima,
            'flags': report['flags'],
            'outputs': {'report': path, 'kappa_curve': csv_path},
            'processing_time_ms': int((time.time() - start_time) * 1000),
        }, config.EXIT_OK

    except PdmpError as e:
        logger.error(f"Selection failed: {e.message}")
        return e.to_response(), e.exit_code

    except Exception as e:
        logger.exception("Unexpected error during selection")
        return error_response('INTERNAL_ERROR', 'Unexpected error occurred', {'error': str(e)}), \
            config.EXIT_INTERNAL_ERROR
