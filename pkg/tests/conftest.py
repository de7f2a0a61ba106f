import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'functions'))

from shared.kernels import build_kernel  # noqa: E402
from shared.models import CrackParameters, build_bacteria, build_oracle, build_tcp  # noqa: E402
from shared.pdmp import PdmpModel  # noqa: E402

DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the scale-level acceptance tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: scale-level acceptance run, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def line_model(rate=0.0, analytic=False):
    """E = (0, 1), Phi(x, t) = x + t, uniform post-jump law"""
    def flow(x, t):
        return np.asarray(x, dtype=float) + t

    return PdmpModel(
        name='line',
        dim=1,
        flow=flow,
        rate=lambda x: float(rate),
        kernel_sampler=lambda pre, rng: np.array([rng.uniform(0.05, 0.95)]),
        in_domain=lambda x: bool(0.0 < x[0] < 1.0),
        analytic_exit_fwd=(lambda x: 1.0 - float(x[0])) if analytic else None,
        analytic_exit_bwd=(lambda x: float(x[0])) if analytic else None,
    )


class FixedLevel:
    """Stand-in generator whose exponential draws are a fixed hazard level"""

    def __init__(self, level):
        self.level = level

    def exponential(self, scale=1.0):
        return self.level * scale


@pytest.fixture
def tcp():
    return build_tcp()


@pytest.fixture
def bacteria():
    return build_bacteria(1.0)


@pytest.fixture
def oracle1():
    return build_oracle(lambda_const=1.0, dim=1)


@pytest.fixture
def oracle2():
    return build_oracle(lambda_const=1.0, dim=2)


@pytest.fixture
def crack_params():
    return CrackParameters()


@pytest.fixture
def epan1():
    return build_kernel('epanechnikov', 1)


@pytest.fixture
def epan2():
    return build_kernel('epanechnikov', 2)


@pytest.fixture
def write_config(tmp_path):
    """Write a RunConfig JSON into tmp_path and return its path"""
    def _write(payload, name='run.json'):
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return str(path)
    return _write
