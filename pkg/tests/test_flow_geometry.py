import math

import numpy as np
import pytest

from shared.errors import InputError
from shared.flow_geometry import build_tube, disc_measure, line_integral, reverse_curve, tau, tube_hit


@pytest.fixture
def tcp_curve(tcp):
    return reverse_curve(tcp, (0.75, 0.5), step=0.05)


class TestReverseCurve:
    def test_tcp_nodes(self, tcp_curve):
        assert len(tcp_curve) == 15
        assert tcp_curve.taus[-1] == pytest.approx(0.7)
        np.testing.assert_allclose(tcp_curve.nodes[:, 0], 0.75 - tcp_curve.taus)
        np.testing.assert_allclose(tcp_curve.nodes[:, 1], 0.5)
        np.testing.assert_allclose(tcp_curve.speeds, 1.0)

    def test_tau_lookup(self, tcp_curve):
        assert tau(tcp_curve, (0.75, 0.5)) == 0.0
        assert tau(tcp_curve, tcp_curve.nodes[4]) == pytest.approx(0.2)
        np.testing.assert_allclose(tcp_curve.nodes[4], [0.55, 0.5])
        for j in range(len(tcp_curve)):
            assert tau(tcp_curve, tcp_curve.nodes[j]) == tcp_curve.taus[j]

    def test_tau_off_curve(self, tcp_curve):
        with pytest.raises(InputError):
            tau(tcp_curve, (0.55, 0.6))

    def test_default_step(self, bacteria):
        curve = reverse_curve(bacteria, (0.5, 0.0, 0.0))
        assert curve.horizon == pytest.approx(1.5)
        assert curve.step == pytest.approx(1.5 / 101)
        assert len(curve) == 101
        np.testing.assert_allclose(curve.nodes[:, 0], 0.5 - curve.taus)
        np.testing.assert_allclose(curve.speeds, 1.0)

    def test_no_boundary_needs_cap(self, oracle1):
        curve = reverse_curve(oracle1, (0.5,), step=0.1, cap=1.0)
        assert curve.taus[-1] == pytest.approx(1.0)

    def test_rows(self, tcp_curve):
        rows = tcp_curve.to_rows()
        assert rows[4][0] == 4
        assert rows[4][1:] == pytest.approx([0.2, 0.55, 0.5, 1.0])

    def test_invalid_step(self, tcp):
        with pytest.raises(InputError):
            reverse_curve(tcp, (0.75, 0.5), step=-0.1)


class TestLineIntegral:
    def test_constant(self, tcp_curve):
        assert line_integral(tcp_curve, lambda xi, t: 1.0) == pytest.approx(0.75, abs=0.05 + 1e-9)

    def test_linear(self, tcp_curve):
        assert line_integral(tcp_curve, lambda xi, t: xi[0]) == pytest.approx(0.28125, abs=0.1)

    def test_error_halves_with_step(self, tcp):
        errors = []
        for h in (0.05, 0.025):
            curve = reverse_curve(tcp, (0.75, 0.5), step=h)
            errors.append(abs(line_integral(curve, np.ones(len(curve))) - 0.75))
        assert 1.9 <= errors[0] / errors[1] <= 4.1

    def test_value_count_must_match(self, tcp_curve):
        with pytest.raises(InputError):
            line_integral(tcp_curve, np.ones(3))


class TestTube:
    def test_disc_measure(self):
        assert disc_measure(2, 0.01) == pytest.approx(0.02)
        assert disc_measure(3, 0.01) == pytest.approx(math.pi * 1e-4)
        assert disc_measure(1, 0.3) == pytest.approx(1.0)

    def test_frame_is_orthogonal_to_flow(self, tcp, bacteria):
        for model, x in ((tcp, (0.75, 0.5)), (bacteria, (0.2, 0.1, 1.0))):
            tube = build_tube(model, x, 0.05, 0.05)
            np.testing.assert_allclose(tube.normal_frame.T @ tube.direction, 0.0, atol=1e-12)
            offsets = tube.disc_mesh - tube.base[None, :]
            np.testing.assert_allclose(offsets @ tube.direction, 0.0, atol=1e-12)
            assert np.all(np.linalg.norm(offsets, axis=1) <= 0.05 * (1 + 1e-9))

    def test_hit_inside(self, tcp):
        tube = build_tube(tcp, (0.75, 0.5), 0.01, 0.05)
        assert tube_hit(tcp, tube, (0.55, 0.505), 1.0) == pytest.approx(0.2, abs=1e-9)

    def test_miss_outside_radius(self, tcp):
        tube = build_tube(tcp, (0.75, 0.5), 0.01, 0.05)
        assert tube_hit(tcp, tube, (0.55, 0.52), 1.0) is None

    def test_miss_downstream(self, tcp):
        tube = build_tube(tcp, (0.75, 0.5), 0.01, 0.05)
        assert tube_hit(tcp, tube, (0.8, 0.5), 1.0) is None

    def test_miss_beyond_scan_limit(self, tcp):
        tube = build_tube(tcp, (0.75, 0.5), 0.01, 0.05)
        assert tube_hit(tcp, tube, (0.55, 0.5), 0.1) is None

    def test_curve_nodes_hit_at_their_tau(self, tcp, tcp_curve):
        tube = build_tube(tcp, (0.75, 0.5), 0.01, 0.05)
        for j in (1, 5, 9):
            assert tube_hit(tcp, tube, tcp_curve.nodes[j], 2.0) == pytest.approx(tcp_curve.taus[j], abs=1e-9)

    def test_radius_must_be_positive(self, tcp):
        with pytest.raises(InputError):
            build_tube(tcp, (0.75, 0.5), 0.0, 0.05)
