"""
Full estimation pipeline over every replicate and target
pdmp-rate full-run --config configs/tcp.json --jobs 4
"""

import logging
import os
import sys
import time

# Add parent directory to path for shared modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared import config
from shared.errors import PdmpError, error_response
from shared.pipeline import full_run as run_pipeline
from shared.run_config import load_run_config

logger = logging.getLogger(__name__)


def full_run(args):
    """Simulate, cross-validate, select and estimate; writes report.json and the plot CSVs"""
    start_time = time.time()

    try:
        run = load_run_config(args.config, args.seed, args.jobs, args.out)
        report = run_pipeline(run)

        return {
            'status': 'success',
            'model': report['model'],
            'replicates': run.replicates,
            'summary': report['summary'],
            'flags': report['flags'],
            'outputs': {name: os.path.join(run.output_dir, file) for name, file in report['outputs'].items()},
            'report': os.path.join(run.output_dir, 'report.json'),
            'processing_time_ms': int((time.time() - start_time) * 1000),
        }, config.EXIT_OK

    except PdmpError as e:
        logger.error(f"Full run failed: {e.message}")
        return e.to_response(), e.exit_code

    except Exception as e:
        logger.exception("Unexpected error during the full run")
        return error_response('INTERNAL_ERROR', 'Unexpected error occurred', {'error': str(e)}), \
            config.EXIT_INTERNAL_ERROR
