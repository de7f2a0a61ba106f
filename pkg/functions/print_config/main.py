"""
Print the effective run configuration
pdmp-rate print-config [--config PATH]
"""

import json
import logging
import os
import sys

# Add parent directory to path for shared modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared import config
from shared.errors import PdmpError, error_response
from shared.run_config import load_run_config

logger = logging.getLogger(__name__)


def print_config(args):
    """Embedded defaults merged with the config file and flags"""
    try:
        run = load_run_config(args.config, args.seed, args.jobs, args.out)
        return {
            'status': 'success',
            'config': run.to_dict(),
            'text': json.dumps(run.to_dict(), indent=2, sort_keys=True),
        }, config.EXIT_OK

    except PdmpError as e:
        return e.to_response(), e.exit_code

    except Exception as e:
        logger.exception("Unexpected error while printing the config")
        return error_response('INTERNAL_ERROR', 'Unexpected error occurred', {'error': str(e)}), \
            config.EXIT_INTERNAL_ERROR
