"""Scalar-channel primitives: partition function, denoiser, averages."""

import math

import numpy as np
import pytest

from dlphase.channel import (ChannelParams, QuadratureSpec, average_log_xi,
                             denoiser, denoiser_oracle, double_average,
                             log_xi_plus, nonzero_fraction, xi_parts)


def ch(theta=0.2, sigma_x2=1.0, hq=1.0, hm=1.0, hQ=0.0):
    return ChannelParams(theta=theta, sigma_x2=sigma_x2, hat_q_x=hq,
                         hat_m_x=hm, hat_Q_x=hQ)


class TestChannelParams:
    def test_hat_sigma(self):
        c = ch(hq=1.5, hQ=0.5, sigma_x2=2.0)
        assert c.hat_sigma_x == pytest.approx(1.0 + 2.0 * 2.0)

    @pytest.mark.parametrize("kwargs", [
        dict(theta=-0.1), dict(theta=1.1), dict(sigma_x2=0.0),
        dict(hq=-1.0), dict(hQ=-5.0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ch(**kwargs)


class TestXiParts:
    def test_zero_sparsity_kills_nonzero_branch(self):
        plus, total = xi_parts(0.7, -1.3, ch(theta=0.0))
        assert plus == 0.0 and total == 1.0

    def test_zero_conjugates(self):
        c = ChannelParams(theta=0.3, sigma_x2=2.0, hat_q_x=0.0, hat_m_x=0.0)
        plus, total = xi_parts(1.9, -0.4, c)
        assert plus == pytest.approx(0.3, abs=1e-15)
        assert total == pytest.approx(1.0, abs=1e-15)

    def test_worked_value(self):
        plus, total = xi_parts(0.0, 1.0, ch())
        assert plus == pytest.approx(0.2 / math.sqrt(2.0) * math.exp(0.25),
                                     rel=1e-12)
        assert plus == pytest.approx(0.18158861587115685, rel=1e-12)
        assert total == pytest.approx(0.98158861587115685, rel=1e-12)

    def test_total_is_atom_plus_branch(self):
        c = ch(theta=0.4, hq=2.0, hm=1.5)
        plus, total = xi_parts(0.3, 0.8, c)
        assert total == pytest.approx((1.0 - 0.4) + plus, rel=1e-14)

    def test_overflow_keeps_ratio(self):
        c = ch(hq=1e8, hm=1e8)
        plus, total = xi_parts(0.0, 1.0, c)
        assert np.isfinite(plus) and np.isfinite(total)
        assert plus / total == pytest.approx(1.0, abs=1e-12)
        assert nonzero_fraction(0.0, 1.0, c) == pytest.approx(1.0, abs=1e-12)


class TestDenoiser:
    def test_no_information_returns_prior_mean(self):
        c = ChannelParams(theta=0.3, sigma_x2=1.0, hat_q_x=0.0, hat_m_x=0.0)
        assert denoiser(1.2, -0.7, c) == 0.0
        assert denoiser_oracle(1.2, -0.7, c) == pytest.approx(0.0, abs=1e-14)

    def test_infinite_snr_recovers_truth(self):
        c = ch(theta=0.3, hq=1e8, hm=1e8)
        assert denoiser(0.0, 1.0, c) == pytest.approx(1.0, abs=1e-3)

    def test_worked_value_matches_oracle(self):
        val = float(denoiser(0.5, 1.0, ch()))
        assert val == pytest.approx(0.17759136132586356, rel=1e-12)
        assert val == pytest.approx(float(denoiser_oracle(0.5, 1.0, ch())),
                                    abs=1e-8)

    def test_odd_in_z_at_zero_truth(self):
        c = ch(theta=0.35, hq=2.3, hm=1.1)
        z = np.linspace(0.1, 3.0, 7)
        np.testing.assert_allclose(denoiser(-z, 0.0, c), -denoiser(z, 0.0, c),
                                   atol=1e-15)

    @pytest.mark.parametrize("theta,hq,hm", [
        (0.2, 0.5, 0.5), (0.5, 2.0, 2.0), (0.8, 10.0, 10.0),
    ])
    def test_oracle_agreement_grid(self, theta, hq, hm):
        c = ch(theta=theta, hq=hq, hm=hm)
        zs = np.linspace(-3.0, 3.0, 5)
        zg, xg = np.meshgrid(zs, zs)
        np.testing.assert_allclose(denoiser(zg, xg, c),
                                   denoiser_oracle(zg, xg, c), atol=1e-8)

    def test_oracle_pure_gaussian_prior(self):
        c = ChannelParams(theta=1.0, sigma_x2=1.3, hat_q_x=2.0, hat_m_x=1.7)
        h = math.sqrt(2.0) * 0.4 + 1.7 * 0.9
        expected = 1.3 * h / (1.0 + 2.0 * 1.3)
        assert denoiser_oracle(0.4, 0.9, c) == pytest.approx(expected, rel=1e-10)

    def test_deterministic(self):
        c = ch(theta=0.4, hq=3.0, hm=2.0)
        z = np.linspace(-2, 2, 11)
        a = denoiser(z, z[::-1], c)
        b = denoiser(z, z[::-1], c)
        assert np.array_equal(a, b)


class TestQuadratureSpec:
    @pytest.mark.parametrize("order", [11, 51, 101, 201])
    def test_weights_sum_to_one(self, order):
        q = QuadratureSpec.gauss_hermite(order)
        assert abs(q.z_weights.sum() - 1.0) < 1e-12
        assert abs(q.x_weights.sum() - 1.0) < 1e-12

    @pytest.mark.parametrize("order", [2, 100, 1, -3])
    def test_rejects_even_or_small_orders(self, order):
        with pytest.raises(ValueError):
            QuadratureSpec.gauss_hermite(order)

    def test_zero_is_a_node(self, quad):
        assert 0.0 in quad.z_nodes and 0.0 in quad.x_nodes

    def test_nodes_immutable(self, quad):
        with pytest.raises(ValueError):
            quad.z_nodes[0] = 1.0


class TestDoubleAverage:
    @pytest.mark.parametrize("order", [11, 51, 101, 201])
    def test_normalization(self, order):
        q = QuadratureSpec.gauss_hermite(order)
        val = double_average(lambda z, x0: np.ones_like(z * x0), 0.3, 1.7, q)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_prior_second_moment(self, quad):
        val = double_average(lambda z, x0: x0 ** 2, 0.3, 1.7, quad)
        assert val == pytest.approx(0.3 * 1.7, abs=1e-10)

    def test_unit_field_variance(self, quad):
        val = double_average(lambda z, x0: z ** 2, 0.3, 1.7, quad)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_deterministic(self, quad):
        c = ch(theta=0.3, hq=4.0, hm=4.0)
        f = lambda z, x0: denoiser(z, x0, c) ** 2
        assert double_average(f, 0.2, 1.0, quad) == double_average(f, 0.2, 1.0, quad)


class TestAverageLogXi:
    def test_matches_plain_rule_at_moderate_conjugates(self, quad):
        c = ChannelParams(theta=0.35, sigma_x2=1.4, hat_q_x=2.0,
                          hat_m_x=1.4, hat_Q_x=0.1)
        base = math.log1p(-0.35)
        plain = double_average(
            lambda z, x0: np.logaddexp(base, log_xi_plus(z, x0, c)),
            0.2, 1.4, quad)
        assert average_log_xi(c, 0.2, quad) == pytest.approx(plain, abs=1e-10)

    @pytest.mark.parametrize("hq,truth", [
        # adaptive-integration references for theta = rho = 0.2, sigma_x2 = 1
        (5e2, 48.9691036),
        (5e4, 4998.4326550),
    ])
    def test_matches_brute_force_at_large_conjugates(self, quad, hq, truth):
        c = ch(theta=0.2, hq=hq, hm=hq)
        assert average_log_xi(c, 0.2, quad) == pytest.approx(truth, abs=2e-6)

    def test_order_stability(self, quad, quad201):
        for hq in (0.5, 50.0, 5e4):
            c = ch(theta=0.2, hq=hq, hm=hq)
            v1 = average_log_xi(c, 0.2, quad)
            v2 = average_log_xi(c, 0.2, quad201)
            assert v1 == pytest.approx(v2, abs=1e-9)

    def test_no_spike_at_theta_one(self, quad):
        c = ChannelParams(theta=1.0, sigma_x2=1.0, hat_q_x=3.0, hat_m_x=2.0)
        direct = double_average(lambda z, x0: log_xi_plus(z, x0, c),
                                0.2, 1.0, quad)
        assert average_log_xi(c, 0.2, quad) == pytest.approx(direct, abs=1e-10)


class TestChannelOrderAgreement:
    """Moment integrals agree between orders 101 and 201."""

    @pytest.mark.parametrize("hq", [0.5, 2.0, 20.0])
    def test_mean_sq_denoiser(self, quad, quad201, hq):
        c = ch(theta=0.2, hq=hq, hm=hq)
        f = lambda z, x0: denoiser(z, x0, c) ** 2
        v1 = double_average(f, 0.2, 1.0, quad)
        v2 = double_average(f, 0.2, 1.0, quad201)
        assert v1 == pytest.approx(v2, abs=1e-9)
