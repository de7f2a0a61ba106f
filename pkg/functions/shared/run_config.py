"""
Run configuration: one JSON file merged over the embedded defaults
"""

import copy
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from . import config
from .errors import ConfigError, InputError
from .kernels import PROFILES

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    model: dict
    seed: int
    n: int
    n_val: int
    x0: Optional[List[float]]
    target_x: Optional[List[float]]
    curve_step: Optional[float]
    rho: float
    rho1: float
    rho2: float
    alpha_grid: List[float]
    beta_grid: List[float]
    alpha_g: Optional[float]
    alpha_f: Optional[float]
    beta_f: Optional[float]
    cross_validate: bool
    v0: float
    w0: float
    delta: Optional[float]
    kernel: str
    time_kernel: str
    sampler: str
    strict_feasibility: bool
    replicates: int
    jobs: int
    output_dir: str
    chain_path: Optional[str]
    queries: Optional[list]
    targets: Optional[list]
    angles: int
    split_validation: bool
    extra: dict = field(default_factory=dict)

    @property
    def model_name(self):
        return self.model.get('name')

    @property
    def model_params(self):
        return self.model.get('params', {}) or {}

    def to_dict(self):
        data = asdict(self)
        data.pop('extra')
        return data


def validate_run_config(data):
    """
    Validate a merged configuration dictionary

    Returns:
        tuple: (is_valid, errors)
    """
    errors = []

    model = data.get('model')
    if not isinstance(model, dict) or 'name' not in model:
        errors.append("Missing 'model.name'")
    elif model['name'] not in config.SUPPORTED_MODELS:
        errors.append(f"Unknown model '{model['name']}' (supported: {', '.join(sorted(config.SUPPORTED_MODELS))})")

    for key in ('seed', 'n', 'n_val', 'replicates', 'jobs', 'angles'):
        value = data.get(key)
        if not isinstance(value, int) or isinstance(value, bool):
            errors.append(f"'{key}' must be an integer")
    if isinstance(data.get('n'), int) and data['n'] < 0:
        errors.append("'n' must be non-negative")
    if isinstance(data.get('n_val'), int) and data['n_val'] < 0:
        errors.append("'n_val' must be non-negative")
    if isinstance(data.get('replicates'), int) and data['replicates'] < 1:
        errors.append("'replicates' must be at least 1")
    if isinstance(data.get('jobs'), int) and data['jobs'] < 1:
        errors.append("'jobs' must be at least 1")

    for key in ('v0', 'w0', 'rho', 'rho1', 'rho2'):
        value = data.get(key)
        if not isinstance(value, (int, float)) or value <= 0:
            errors.append(f"'{key}' must be a positive number")

    for key in ('alpha_grid', 'beta_grid'):
        grid = data.get(key)
        if not isinstance(grid, list) or not grid:
            errors.append(f"'{key}' must be a non-empty list")
        elif any(not isinstance(v, (int, float)) or v <= 0 for v in grid):
            errors.append(f"'{key}' values must be positive numbers")

    for key in ('alpha_g', 'alpha_f', 'beta_f', 'curve_step', 'delta'):
        value = data.get(key)
        if value is not None and (not isinstance(value, (int, float)) or value <= 0):
            errors.append(f"'{key}' must be a positive number or null")

    if not data.get('cross_validate', True):
        for key in ('alpha_g', 'alpha_f', 'beta_f'):
            if data.get(key) is None:
                errors.append(f"'{key}' is required when cross_validate is false")

    for key in ('kernel', 'time_kernel'):
        if data.get(key) not in PROFILES:
            errors.append(f"Unknown {key} '{data.get(key)}'")
    if data.get('kernel') == 'uniform':
        errors.append("Spatial kernel must be Lipschitz, 'uniform' is only allowed in time")

    if data.get('sampler') not in ('inversion', 'thinning'):
        errors.append(f"Unknown sampler '{data.get('sampler')}'")

    return len(errors) == 0, errors


def merge_config(overrides):
    """Deep-copy the defaults and apply a dictionary of overrides"""
    merged = copy.deepcopy(config.DEFAULT_RUN_CONFIG)
    for key, value in (overrides or {}).items():
        if key == 'model' and isinstance(value, dict):
            merged['model'] = {'name': value.get('name', merged['model']['name']),
                               'params': dict(value.get('params', {}) or {})}
        else:
            merged[key] = value
    return merged


def load_run_config(path=None, seed=None, jobs=None, output_dir=None):
    """
    Load a RunConfig from a JSON file and command-line overrides

    Raises:
        InputError: the file is missing or not valid JSON
        ConfigError: the merged configuration is invalid
    """
    data = {}
    if path:
        if not os.path.exists(path):
            raise InputError(f"Config file not found: {path}", {'path': path})
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f"Config file {path} is not valid JSON: {e}", {'path': path}) from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object", {'path': path})

    merged = merge_config(data)
    if seed is not None:
        merged['seed'] = int(seed)
    if jobs is not None:
        merged['jobs'] = int(jobs)
    if output_dir is not None:
        merged['output_dir'] = output_dir

    is_valid, errors = validate_run_config(merged)
    if not is_valid:
        raise ConfigError("Invalid run configuration", {'errors': errors})

    known = set(RunConfig.__dataclass_fields__) - {'extra'}
    extra = {k: v for k, v in merged.items() if k not in known}
    if extra:
        logger.warning(f"Ignoring unknown config keys: {', '.join(sorted(extra))}")
    return RunConfig(**{k: v for k, v in merged.items() if k in known}, extra=extra)
