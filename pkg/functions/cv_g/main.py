"""
Cross-validation of the G-hat bandwidth exponent
pdmp-rate cv-g --config configs/tcp.json
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
from shared.pipeline import build_geometry, build_scenario, chain_data, cross_validate_G, target_states
from shared.run_config import load_run_config

logger = logging.getLogger(__name__)


def cv_g(args):
    """alpha^G at the first configured target, with the error-vs-alpha CSV"""
    start_time = time.time()

    try:
        run = load_run_config(args.config, args.seed, args.jobs, args.out)
        scenario = build_scenario(run)
        label, x = target_states(scenario)[0]
        geometry = build_geometry(scenario, x, with_tubes=True)
        data = chain_data(scenario, 0, need_validation=True)

        cv = cross_validate_G(scenario, data, geometry, run.jobs)
        csv_path = write_rows_csv(os.path.join(run.output_dir, 'cv_g.csv'),
                                  ['alpha', 'error', 'first_term', 'second_term'], cv.to_rows())
        report = {
            'kind': 'cv-g',
            'model': scenario.name,
            'seed': run.seed,
            'config': run.to_dict(),
            'results': [{'target': label, 'x': x.tolist(), 'alpha_g': cv.chosen[0], 'cv_g': cv.to_dict()}],
            'flags': sorted(set(data.flags) | set(cv.flags)),
        }
        path = save_report(report, os.path.join(run.output_dir, 'cv_g.json'))

        return {
            'status': 'success',
            'target': label,
            'alpha_g': cv.chosen[0],
            'hit_count': cv.hit_count,
            'flags': report['flags'],
            'outputs': {'report': path, 'errors': csv_path},
            'processing_time_ms': int((time.time() - start_time) * 1000),
        }, config.EXIT_OK

    except PdmpError as e:
        logger.error(f"Cross-validation of G failed: {e.message}")
        return e.to_response(), e.exit_code

    except Exception as e:
        logger.exception("Unexpected error during cross-validation of G")
        return error_response('INTERNAL_ERROR', 'Unexpected error occurred', {'error': str(e)}), \
            config.EXIT_INTERNAL_ERROR
