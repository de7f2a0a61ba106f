import os

import pytest

from shared import config
from shared.errors import ConfigError, InputError
from shared.run_config import load_run_config, merge_config, validate_run_config

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', 'configs')


def test_defaults_are_valid():
    is_valid, errors = validate_run_config(merge_config({}))
    assert is_valid, errors


def test_defaults_describe_tcp():
    run = load_run_config()
    assert run.model_name == 'tcp'
    assert run.target_x == [0.75, 0.5]
    assert run.n == 10000
    assert run.alpha_grid == config.DEFAULT_ALPHA_GRID


def test_merge_does_not_touch_defaults():
    merged = merge_config({'model': {'name': 'oracle', 'params': {'dim': 2}}, 'n': 5})
    assert merged['model'] == {'name': 'oracle', 'params': {'dim': 2}}
    assert config.DEFAULT_RUN_CONFIG['model'] == {'name': 'tcp', 'params': {}}
    assert config.DEFAULT_RUN_CONFIG['n'] == 10000


def test_file_and_overrides(write_config, tmp_path):
    path = write_config({'model': {'name': 'oracle', 'params': {'dim': 1}}, 'n': 500, 'seed': 3})
    run = load_run_config(path, seed=9, jobs=2, output_dir=str(tmp_path / 'out'))
    assert run.model_name == 'oracle'
    assert run.model_params == {'dim': 1}
    assert run.n == 500
    assert run.seed == 9
    assert run.jobs == 2
    assert run.output_dir == str(tmp_path / 'out')


def test_unknown_keys_are_kept_aside(write_config):
    run = load_run_config(write_config({'colour': 'blue'}))
    assert run.extra == {'colour': 'blue'}
    assert 'extra' not in run.to_dict()


@pytest.mark.parametrize('payload, message', [
    ({'model': {'name': 'queue'}}, "Unknown model"),
    ({'n': -1}, "'n' must be non-negative"),
    ({'n': 2.5}, "'n' must be an integer"),
    ({'seed': True}, "'seed' must be an integer"),
    ({'rho': 0}, "'rho' must be a positive number"),
    ({'alpha_grid': []}, "'alpha_grid' must be a non-empty list"),
    ({'beta_grid': [0.1, -0.2]}, "'beta_grid' values must be positive"),
    ({'cross_validate': False}, "'alpha_g' is required"),
    ({'kernel': 'uniform'}, "Lipschitz"),
    ({'time_kernel': 'gaussian'}, "Unknown time_kernel"),
    ({'sampler': 'rejection'}, "Unknown sampler"),
    ({'replicates': 0}, "'replicates' must be at least 1"),
])
def test_invalid_configs(write_config, payload, message):
    with pytest.raises(ConfigError) as exc:
        load_run_config(write_config(payload))
    assert any(message in e for e in exc.value.details['errors'])
    assert exc.value.exit_code == config.EXIT_INPUT_ERROR


def test_uniform_time_kernel_is_allowed(write_config):
    assert load_run_config(write_config({'time_kernel': 'uniform'})).time_kernel == 'uniform'


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_run_config(str(tmp_path / 'absent.json'))


def test_not_json(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text('model: tcp')
    with pytest.raises(InputError):
        load_run_config(str(path))


def test_not_an_object(write_config):
    with pytest.raises(ConfigError):
        load_run_config(write_config([1, 2]))


@pytest.mark.parametrize('name', ['tcp.json', 'bacteria.json', 'crack.json', 'oracle.json'])
def test_shipped_configs_load(name):
    run = load_run_config(os.path.join(CONFIG_DIR, name))
    assert run.model_name == name.split('.')[0]
