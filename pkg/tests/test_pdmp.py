import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from conftest import FixedLevel, line_model
from shared import rng
from shared.errors import DimensionMismatchError, DomainError, InputError, ModelContractError, SimulationError
from shared.pdmp import (
    exit_time_backward,
    exit_time_forward,
    flow_at,
    sample_interjump,
    sample_post_jump,
    simulate_chain,
)


class TestFlow:
    def test_tcp_flow_moves_first_coordinate(self, tcp):
        assert flow_at(tcp, (0.2, 0.5), 0.3) == pytest.approx([0.5, 0.5])

    def test_bacteria_flow_follows_heading(self, bacteria):
        assert flow_at(bacteria, (0.0, 0.0, 0.0), 0.5) == pytest.approx([0.5, 0.0, 0.0])

    def test_zero_time_is_identity(self, tcp, bacteria, oracle2):
        for model, x in ((tcp, [0.3, 0.6]), (bacteria, [0.1, -0.2, 1.0]), (oracle2, [0.4, 0.4])):
            np.testing.assert_array_equal(flow_at(model, x, 0.0), x)

    def test_semigroup(self, tcp, bacteria):
        gen = np.random.default_rng(3)
        for model in (tcp, bacteria):
            for _ in range(100):
                x = gen.uniform(-0.5, 0.5, model.dim)
                x[-1] = abs(x[-1])
                s, t = gen.uniform(-1.0, 1.0, 2)
                lhs = flow_at(model, flow_at(model, x, s), t)
                rhs = flow_at(model, x, s + t)
                assert np.linalg.norm(lhs - rhs) <= 1e-9 * (1 + np.linalg.norm(x))

    def test_wrong_dimension(self, tcp):
        with pytest.raises(DimensionMismatchError):
            flow_at(tcp, (0.1, 0.2, 0.3), 1.0)


class TestExitTimes:
    def test_tcp_forward(self, tcp):
        assert exit_time_forward(tcp, (0.25, 0.5)) == pytest.approx(0.75)

    def test_bacteria_forward_from_center(self, bacteria):
        assert exit_time_forward(bacteria, (0.0, 0.0, 0.0)) == pytest.approx(1.0)

    def test_no_boundary_is_infinite(self, oracle1):
        assert exit_time_forward(oracle1, (0.3,)) == math.inf

    def test_tcp_backward(self, tcp):
        assert exit_time_backward(tcp, (0.75, 0.5)) == pytest.approx(0.75)

    def test_bacteria_backward(self, bacteria):
        assert exit_time_backward(bacteria, (0.5, 0.0, 0.0)) == pytest.approx(1.5)

    def test_bisection_backward(self):
        assert exit_time_backward(line_model(), (0.3,)) == pytest.approx(0.3, abs=1e-9)

    def test_bisection_brackets_the_boundary(self):
        model = line_model()
        x = np.array([0.3])
        t_plus = exit_time_forward(model, x)
        eps = 10 * model.exit_tol
        assert model.in_domain(flow_at(model, x, t_plus - eps))
        assert not model.in_domain(flow_at(model, x, t_plus + eps))

    def test_outside_state_space(self, tcp):
        with pytest.raises(DomainError):
            exit_time_forward(tcp, (1.2, 0.5))


class TestInterjump:
    def test_zero_rate_always_jumps_at_boundary(self):
        model = line_model(rate=0.0)
        gen = rng.stream(1, 0)
        for _ in range(10):
            s, boundary = sample_interjump(model, (0.25,), gen)
            assert boundary
            assert s == pytest.approx(0.75, abs=1e-9)

    def test_tcp_closed_form_inversion(self, tcp):
        assert tcp.hazard_inverse(np.array([0.0, 0.0]), 0.5) == pytest.approx(1.0)

    def test_quadrature_inversion_matches_closed_form(self, tcp):
        generic = dataclasses.replace(tcp, hazard_inverse=None)
        s, boundary = sample_interjump(generic, (0.25, 0.25), FixedLevel(0.5))
        assert not boundary
        assert s == pytest.approx(-0.5 + math.sqrt(1.25), rel=1e-7)

    def test_level_above_total_hazard_gives_boundary_jump(self, tcp):
        for model in (tcp, dataclasses.replace(tcp, hazard_inverse=None)):
            s, boundary = sample_interjump(model, (0.25, 0.25), FixedLevel(5.0))
            assert boundary
            assert s == pytest.approx(0.75)

    def test_exponential_mean(self, oracle1):
        gen = rng.stream(11, 0)
        draws = [sample_interjump(oracle1, (0.5,), gen)[0] for _ in range(100_000)]
        assert np.mean(draws) == pytest.approx(1.0, abs=0.02)

    def test_interarrivals_pass_ks_against_exponential(self, oracle1):
        chain = simulate_chain(oracle1, (0.5,), 10_000, rng.stream(2024, 0, rng.ROLE_MAIN))
        assert stats.kstest(chain.s, 'expon').pvalue > 0.01

    def test_inversion_and_thinning_agree(self, tcp):
        x = (0.25, 0.25)
        inv_rng, thin_rng = rng.stream(5, 0), rng.stream(5, 1)
        inversion = [sample_interjump(tcp, x, inv_rng, 'inversion')[0] for _ in range(20_000)]
        thinning = [sample_interjump(tcp, x, thin_rng, 'thinning')[0] for _ in range(20_000)]
        assert stats.ks_2samp(inversion, thinning).statistic < 0.02

    def test_thinning_needs_a_rate_bound(self):
        with pytest.raises(ModelContractError):
            sample_interjump(line_model(rate=1.0), (0.5,), rng.stream(0, 0), 'thinning')

    def test_unknown_sampler(self, tcp):
        with pytest.raises(InputError):
            sample_interjump(tcp, (0.5, 0.5), rng.stream(0, 0), 'rejection')


class TestPostJump:
    def test_tcp_first_coordinate_is_beta(self, tcp):
        gen = rng.stream(8, 0)
        draws = np.array([sample_post_jump(tcp, (0.5, 0.5), gen) for _ in range(3000)])
        assert stats.kstest(draws[:, 0], stats.beta(2.0, 4.0).cdf).pvalue > 1e-3
        assert stats.kstest(draws[:, 1], stats.beta(2.0, 2.0).cdf).pvalue > 1e-3

    def test_bacteria_keeps_position(self, bacteria):
        gen = rng.stream(9, 0)
        draws = np.array([sample_post_jump(bacteria, (0.3, -0.4, 2.0), gen) for _ in range(2000)])
        np.testing.assert_array_equal(draws[:, :2], np.tile([0.3, -0.4], (2000, 1)))
        assert np.all((draws[:, 2] >= 0) & (draws[:, 2] < 2 * math.pi))
        assert stats.kstest(draws[:, 2], stats.uniform(0, 2 * math.pi).cdf).pvalue > 1e-3

    def test_bacteria_boundary_jump_lands_inside(self, bacteria):
        y = sample_post_jump(bacteria, (1.0, 0.0, 0.0), rng.stream(0, 0))
        assert math.hypot(y[0], y[1]) < 1.0

    def test_sampler_leaving_state_space(self):
        model = dataclasses.replace(line_model(), kernel_sampler=lambda pre, gen: np.array([1.5]))
        with pytest.raises(ModelContractError):
            sample_post_jump(model, (0.5,), rng.stream(0, 0))


class TestSimulateChain:
    def test_single_boundary_record(self):
        chain = simulate_chain(line_model(rate=0.0), (0.25,), 1, rng.stream(1, 0))
        assert len(chain) == 1
        assert chain.boundary[0]
        assert chain.s[0] == pytest.approx(0.75, abs=1e-9)
        assert 0.0 < chain.z[0, 0] < 1.0

    def test_same_seed_same_chain(self, tcp):
        a = simulate_chain(tcp, (0.5, 0.5), 200, rng.stream(7, 0, rng.ROLE_MAIN))
        b = simulate_chain(tcp, (0.5, 0.5), 200, rng.stream(7, 0, rng.ROLE_MAIN))
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.s, b.s)
        np.testing.assert_array_equal(a.boundary, b.boundary)

    def test_empty_chain(self, tcp):
        chain = simulate_chain(tcp, (0.5, 0.5), 0, rng.stream(7, 0))
        assert len(chain) == 0
        assert chain.z.shape == (0, 2)
        assert len(chain.observations()) == 0

    def test_boundary_flag_matches_exit_time(self, tcp):
        chain = simulate_chain(tcp, (0.5, 0.5), 500, rng.stream(12, 0))
        previous = np.vstack([chain.x0[None, :], chain.z[:-1]])
        t_plus = 1.0 - previous[:, 0]
        assert chain.boundary.any()
        np.testing.assert_allclose(chain.s[chain.boundary], t_plus[chain.boundary], rtol=0, atol=1e-12)
        assert np.all(chain.s[~chain.boundary] < t_plus[~chain.boundary])

    def test_failure_reports_record_index(self):
        calls = {'n': 0}

        def sampler(pre, gen):
            calls['n'] += 1
            return np.array([0.5 if calls['n'] < 3 else 2.0])

        model = dataclasses.replace(line_model(), kernel_sampler=sampler)
        with pytest.raises(SimulationError) as exc:
            simulate_chain(model, (0.5,), 5, rng.stream(0, 0))
        assert exc.value.index == 2
        assert exc.value.details['cause'] == 'MODEL_CONTRACT_VIOLATION'

    def test_observation_pairs_start_at_x0(self, tcp):
        chain = simulate_chain(tcp, (0.5, 0.5), 50, rng.stream(3, 0))
        obs = chain.observations()
        np.testing.assert_array_equal(obs.z[0], [0.5, 0.5])
        np.testing.assert_array_equal(obs.z[1:], chain.z[:-1])
        np.testing.assert_array_equal(obs.s, chain.s)

    def test_split_takes_leading_eleventh(self, tcp):
        obs = simulate_chain(tcp, (0.5, 0.5), 100, rng.stream(3, 0)).observations()
        main, validation = obs.split_validation()
        assert len(validation) == 10
        assert len(main) == 90
        np.testing.assert_array_equal(validation.s, obs.s[:10])

    def test_oracle_locations_follow_kernel_law(self, oracle1):
        chain = simulate_chain(oracle1, (0.5,), 3000, rng.stream(4, 0))
        assert stats.kstest(chain.z[:, 0], stats.beta(2.0, 2.0).cdf).pvalue > 1e-3


class TestStreams:
    def test_streams_are_reproducible(self):
        assert rng.stream(5, 1, 0).uniform() == rng.stream(5, 1, 0).uniform()

    def test_roles_and_replicates_are_distinct(self):
        seeds = {rng.derived_seed(5, r, role) for r in range(20) for role in (rng.ROLE_MAIN, rng.ROLE_VALIDATION)}
        assert len(seeds) == 40
