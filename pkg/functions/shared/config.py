"""
Configuration module for the PDMP jump-rate toolkit
Loads solver, estimation and run defaults from environment variables
"""

import os

# Simulation
EXIT_TIME_HORIZON = float(os.getenv('PDMP_EXIT_HORIZON', '1e6'))
EXIT_TIME_TOL = float(os.getenv('PDMP_EXIT_TOL', '1e-10'))
EXIT_INITIAL_STEP = 1e-3
INVERSION_RTOL = 1e-8
HAZARD_QUAD_LIMIT = 200
THINNING_WINDOW = 1.0
FLOW_TOL = 1e-9

# Reverse curves and tubes
CURVE_MIN_NODES = 100
CURVE_TIME_CAP = float(os.getenv('PDMP_CURVE_CAP', '10.0'))
FD_STEP = 1e-6
DISC_MESH_PER_AXIS = 5
TUBE_TIME_FACTOR = 2.0

# Estimation
G_RATIO_LIMIT = 1.05
BALL_INFIMUM_SHRINK = 0.95
STREAMING_CHUNK = 2_000_000  # kernel evaluations per batch block

# Cross-validation
DEFAULT_ALPHA_GRID = [round(0.05 * k, 2) for k in range(1, 11)]
DEFAULT_BETA_GRID = [round(0.05 * k, 2) for k in range(1, 11)]
VALIDATION_SPLIT_DIVISOR = 11

# Paris / Forman integration
RK4_STEPS_PER_FLOW = 200
CRACK_SINGULARITY_MARGIN = 1e-6

# Runtime
DEFAULT_SEED = int(os.getenv('PDMP_SEED', '20240101'))
DEFAULT_JOBS = int(os.getenv('PDMP_JOBS', '1'))
OUTPUT_DIR = os.getenv('PDMP_OUTPUT_DIR', 'runs')
LOG_LEVEL = os.getenv('PDMP_LOG_LEVEL', 'INFO')
REPORT_BACKUP_DIR = 'backups'

# Exit codes
EXIT_OK = 0
EXIT_INTERNAL_ERROR = 1
EXIT_INPUT_ERROR = 2
EXIT_SIMULATION_ERROR = 3
EXIT_ESTIMATION_IMPOSSIBLE = 4

# Supported models
SUPPORTED_MODELS = {
    'tcp': {'dim': 2, 'description': 'TCP-like window process on (0,1)^2'},
    'bacteria': {'dim': 3, 'description': 'Run-and-tumble bacteria in the unit disc'},
    'crack': {'dim': 3, 'description': 'Fatigue crack growth, Paris regime until switch'},
    'oracle': {'dim': None, 'description': 'Constant rate, x-free Beta(2,2) kernel'},
}

# Kernels shipped
SUPPORTED_KERNELS = ('epanechnikov', 'biweight', 'uniform')

# Default run configuration (TCP scenario)
DEFAULT_RUN_CONFIG = {
    'model': {'name': 'tcp', 'params': {}},
    'seed': DEFAULT_SEED,
    'n': 10000,
    'n_val': 1000,
    'x0': None,
    'target_x': [0.75, 0.5],
    'curve_step': None,
    'rho': 0.01,
    'rho1': 0.1,
    'rho2': 0.1,
    'alpha_grid': DEFAULT_ALPHA_GRID,
    'beta_grid': DEFAULT_BETA_GRID,
    'alpha_g': None,
    'alpha_f': None,
    'beta_f': None,
    'cross_validate': True,
    'v0': 0.1,
    'w0': 0.1,
    'delta': None,
    'kernel': 'epanechnikov',
    'time_kernel': 'epanechnikov',
    'sampler': 'inversion',
    'strict_feasibility': False,
    'replicates': 1,
    'jobs': DEFAULT_JOBS,
    'output_dir': OUTPUT_DIR,
    'chain_path': None,
    'queries': None,
    'targets': None,
    'angles': 16,
    'split_validation': False,
}
