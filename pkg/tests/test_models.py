import dataclasses
import math

import numpy as np
import pytest

from shared import rng
from shared.errors import ConfigError, EstimationError, SingularityError
from shared.flow_geometry import flow_velocity
from shared.models import (
    aggregate_bacteria_lambda,
    bacteria_angles,
    build_bacteria,
    build_crack,
    build_model,
    build_oracle,
    crack_curve,
    crack_initial_state,
    crack_observations,
    cycles_to_length,
    default_start,
    euler_flow,
    forman_rate,
    length_after_cycles,
    oracle_criterion,
    oracle_invariant_density,
    paris_flow_rk4,
    paris_rate,
    simulate_crack_path,
)
from shared.pdmp import exit_time_forward, flow_at, simulate_chain


@pytest.fixture
def paris(crack_params):
    m = 3.0
    return m, math.exp(crack_params.logc(m))


class TestCrackFlow:
    def test_velocity_is_paris_rate(self, crack_params):
        model = build_crack(crack_params)
        x = crack_initial_state(crack_params)
        expected = paris_rate(x[0], x[1], math.exp(x[2]), crack_params)
        np.testing.assert_allclose(flow_velocity(model, x), [expected, 0.0, 0.0])

    def test_flow_keeps_paris_parameters(self, crack_params):
        model = build_crack(crack_params)
        x = crack_initial_state(crack_params)
        y = flow_at(model, x, 5e4)
        assert y[0] > x[0]
        assert y[1:] == pytest.approx(x[1:])

    def test_rk4_agrees_with_fine_euler(self, crack_params, paris):
        m, C = paris
        rk4 = paris_flow_rk4(9.0, m, C, 1e4, 100.0, crack_params)
        euler = euler_flow(lambda a: paris_rate(a, m, C, crack_params), 9.0, 1e4, 1.0)
        assert abs(rk4 - euler) / rk4 < 1e-6

    def test_rk4_is_fourth_order(self, crack_params, paris):
        m, C = paris
        exact = length_after_cycles(9.0, m, C, 2e5, crack_params)
        coarse = abs(paris_flow_rk4(9.0, m, C, 2e5, 2e4, crack_params) - exact)
        fine = abs(paris_flow_rk4(9.0, m, C, 2e5, 1e4, crack_params) - exact)
        assert 8.0 <= coarse / fine <= 32.0

    def test_backward_integration_returns(self, crack_params, paris):
        m, C = paris
        a = paris_flow_rk4(9.0, m, C, 3e4, 100.0, crack_params)
        assert paris_flow_rk4(a, m, C, -3e4, 100.0, crack_params) == pytest.approx(9.0, abs=1e-8)

    def test_cycles_and_length_are_inverse(self, crack_params, paris):
        m, C = paris
        N = cycles_to_length(9.0, 30.0, m, C, crack_params)
        assert N > 0
        assert length_after_cycles(9.0, m, C, N, crack_params) == pytest.approx(30.0, rel=1e-9)
        assert cycles_to_length(30.0, 9.0, m, C, crack_params) == 0.0

    def test_singularity_at_half_width(self, crack_params, paris):
        m, C = paris
        with pytest.raises(SingularityError):
            paris_flow_rk4(crack_params.omega / 2.0, m, C, 10.0, 1.0, crack_params)
        with pytest.raises(SingularityError):
            length_after_cycles(9.0, m, C, 1e9, crack_params)

    def test_forman_instability(self, crack_params, paris):
        m, C = paris
        weak = dataclasses.replace(crack_params, forman_kc=100.0)
        with pytest.raises(SingularityError):
            forman_rate(20.0, m, C, weak)
        assert forman_rate(20.0, m, C, crack_params) > 0


class TestCrackModel:
    def test_invalid_parameters(self, crack_params):
        with pytest.raises(ConfigError):
            build_crack(dataclasses.replace(crack_params, a0=60.0))
        with pytest.raises(ConfigError):
            build_model('crack', {'stiffness': 1.0})

    def test_chain_restarts_at_initial_length(self, crack_params):
        model = build_crack(crack_params)
        chain = simulate_chain(model, crack_initial_state(crack_params), 10, rng.stream(61, 0))
        np.testing.assert_allclose(chain.z[:, 0], crack_params.a0)
        assert np.all((chain.z[:, 1] >= crack_params.m_low) & (chain.z[:, 1] <= crack_params.m_high))
        np.testing.assert_allclose(chain.z[:, 2], crack_params.logc(chain.z[:, 1]))
        assert np.all(chain.s > 0)

    def test_observations_project_on_exponent(self, crack_params):
        model = build_crack(crack_params)
        obs = simulate_chain(model, crack_initial_state(crack_params), 5, rng.stream(62, 0)).observations()
        projected = crack_observations(obs)
        assert projected.dim == 1
        np.testing.assert_array_equal(projected.z[:, 0], obs.z[:, 1])

    def test_curve_over_exponent(self, crack_params):
        grid = np.linspace(2.8, 3.2, 5)
        curve = crack_curve(crack_params, 30.0, grid)
        assert len(curve) == 5
        np.testing.assert_array_equal(curve.coords, grid)
        np.testing.assert_array_equal(curve.nodes[:, 0], grid)
        for m, t in zip(grid, curve.taus):
            assert t == pytest.approx(cycles_to_length(9.0, 30.0, m, math.exp(crack_params.logc(m)), crack_params))

    def test_curve_rejects_out_of_band(self, crack_params):
        with pytest.raises(ConfigError):
            crack_curve(crack_params, 30.0, [2.5, 3.0])
        with pytest.raises(ConfigError):
            crack_curve(crack_params, 60.0, [3.0])

    def test_plot_path(self, crack_params):
        cycles, lengths = simulate_crack_path(crack_params, 3.0, 25.0, points=20)
        assert len(cycles) == len(lengths)
        assert lengths[0] == crack_params.a0
        assert np.all(np.diff(cycles) > 0)
        assert lengths[-1] <= crack_params.a_final


class TestOracle:
    def test_invariant_density(self):
        model = build_oracle(dim=2)
        assert oracle_invariant_density(model, (0.5, 0.5)) == pytest.approx(2.25)
        assert oracle_criterion(model, (0.5, 0.5), math.log(2.0)) == pytest.approx(1.125)

    def test_by_name(self):
        model = build_model('oracle', {'dim': 2, 'lambda': 2.0, 'q': [2, 5]})
        assert model.dim == 2
        assert model.rate(np.zeros(2)) == 2.0
        assert oracle_invariant_density(model, (0.2, 0.2)) == pytest.approx((30 * 0.2 * 0.8 ** 4) ** 2)

    def test_rate_must_be_positive(self):
        with pytest.raises(ConfigError):
            build_oracle(lambda_const=0.0)


class TestBacteria:
    def test_angles(self):
        angles = bacteria_angles(16)
        assert len(angles) == 16
        assert angles[0] == 0.0
        np.testing.assert_allclose(np.diff(angles), 2 * math.pi / 16)

    def test_aggregate_is_mean(self):
        angles = bacteria_angles(4)
        assert aggregate_bacteria_lambda(dict(zip(angles, [1.0, 2.0, 3.0, 6.0]))) == pytest.approx(3.0)

    def test_aggregate_needs_estimates(self):
        with pytest.raises(EstimationError):
            aggregate_bacteria_lambda({})

    def test_negative_rate(self):
        with pytest.raises(ConfigError):
            build_model('bacteria', {'rate': -1.0})

    def test_boundary_jumps_stay_in_the_disc(self, bacteria):
        x0 = np.array([0.2, -0.1, 0.7])
        chain = simulate_chain(bacteria, x0, 400, rng.stream(61, 0))
        radius = np.hypot(chain.z[:, 0], chain.z[:, 1])
        assert np.all(radius <= 1.0)
        assert 0 < chain.boundary.sum() < len(chain)
        np.testing.assert_allclose(radius[chain.boundary], 1.0, atol=1e-6)
        assert np.all(radius[~chain.boundary] < 1.0)

        previous = np.vstack([x0[None, :], chain.z[:-1]])
        for k in np.flatnonzero(chain.boundary):
            assert chain.s[k] == pytest.approx(exit_time_forward(bacteria, previous[k]), abs=1e-9)

    def test_without_tumbles_every_jump_is_at_the_wall(self):
        still = build_bacteria(0.0)
        chain = simulate_chain(still, np.array([0.0, 0.0, 1.0]), 50, rng.stream(62, 0))
        assert chain.boundary.all()
        assert np.all(np.hypot(chain.z[:, 0], chain.z[:, 1]) <= 1.0)


def test_unknown_model():
    with pytest.raises(ConfigError):
        build_model('queue')


def test_default_starts_are_inside(tcp, bacteria, oracle2, crack_params):
    for model in (tcp, bacteria, oracle2, build_crack(crack_params)):
        assert model.in_domain(default_start(model))
