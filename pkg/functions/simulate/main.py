"""
Embedded-chain simulation
pdmp-rate simulate --config configs/tcp.json
"""

import logging
import os
import sys
import time

# Add parent directory to path for shared modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared import config, rng
from shared.artifacts import write_chain
from shared.errors import PdmpError, error_response
from shared.models import build_model, default_start
from shared.pdmp import simulate_chain
from shared.run_config import load_run_config

logger = logging.getLogger(__name__)


def simulate(args):
    """
    Simulate the main chain (and the validation chain when n_val > 0)

    Uses the replicate-0 streams, so the files match what full-run simulates.
    """
    start_time = time.time()

    try:
        run = load_run_config(args.config, args.seed, args.jobs, args.out)
        model = build_model(run.model_name, run.model_params)
        x0 = run.x0 if run.x0 is not None else default_start(model)

        outputs = {}
        chains = {}
        for role, name, n in ((rng.ROLE_MAIN, 'chain', run.n), (rng.ROLE_VALIDATION, 'chain_validation', run.n_val)):
            if role == rng.ROLE_VALIDATION and n == 0:
                continue
            seed = rng.derived_seed(run.seed, 0, role)
            chain = simulate_chain(model, x0, n, rng.stream(run.seed, 0, role), run.sampler, seed=seed)
            csv_path, meta_path = write_chain(chain, os.path.join(run.output_dir, f'{name}.csv'))
            outputs[name] = csv_path
            outputs[f'{name}_metadata'] = meta_path
            chains[name] = {'n': len(chain), 'seed': seed, 'boundary_jumps': int(chain.boundary.sum())}

        logger.info(f"Chains written to {run.output_dir}")
        return {
            'status': 'success',
            'model': model.name,
            'master_seed': run.seed,
            'chains': chains,
            'outputs': outputs,
            'processing_time_ms': int((time.time() - start_time) * 1000),
        }, config.EXIT_OK

    except PdmpError as e:
        logger.error(f"Simulation failed: {e.message}")
        return e.to_response(), e.exit_code

    except Exception as e:
        logger.exception("Unexpected error during simulation")
        return error_response('INTERNAL_ERROR', 'Unexpected error occurred', {'error': str(e)}), \
            config.EXIT_INTERNAL_ERROR
