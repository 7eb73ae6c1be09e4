"""Fixed-point solver: matched-line branches and the general system."""

import math

import numpy as np
import pytest

from dlphase.channel import denoiser_oracle
from dlphase.entropy import phi_gradient_fd
from dlphase.exceptions import DenominatorVanishes, SuccessBranchAbsent
from dlphase.solver import (Branch, ModelParams, conjugates_from_order,
                            failure_init, general_branches, general_extremize,
                            interior_init, nishimori_update,
                            solve_all_branches, solve_branch,
                            success_fixed_point, success_susceptibilities,
                            OrderParams)


def params(gamma, alpha=0.5, rho=0.2, **kw):
    return ModelParams(alpha=alpha, gamma=gamma, rho=rho,
                       theta=kw.pop("theta", rho), **kw)


class TestModelParams:
    @pytest.mark.parametrize("kwargs", [
        dict(alpha=0.0), dict(gamma=-1.0), dict(rho=0.0), dict(rho=1.0),
        dict(theta=0.0), dict(sigma_x2=0.0), dict(tau=-1e-9),
    ])
    def test_invalid(self, kwargs):
        base = dict(alpha=0.5, gamma=1.0, rho=0.2, theta=0.2)
        base.update(kwargs)
        with pytest.raises(ValueError):
            ModelParams(**base)


class TestNishimoriUpdate:
    def test_origin_is_fixed(self, quad):
        assert nishimori_update(0.0, 0.0, params(3.0), quad) == (0.0, 0.0)

    def test_near_origin_linearization(self, quad):
        p = params(3.0)
        qd, qx = 1e-8, 1e-8
        qd_new, qx_new = nishimori_update(qd, qx, p, quad)
        assert qx_new / qd == pytest.approx(p.rho * p.sigma_x2 * p.alpha,
                                            rel=1e-6)
        assert qd_new / qx == pytest.approx(p.gamma / (p.rho * p.sigma_x2),
                                            rel=1e-6)

    def test_denominator_vanishes(self, quad):
        with pytest.raises(DenominatorVanishes) as err:
            nishimori_update(1.0, 0.2, params(3.0), quad)
        assert err.value.last_iterate == (1.0, 0.2)

    def test_requires_matched_prior(self, quad):
        with pytest.raises(ValueError):
            nishimori_update(0.1, 0.01, params(3.0, theta=0.3), quad)

    def test_oracle_substituted_convergence(self, quad):
        """Iterating with the brute-force posterior mean lands on the same
        fixed point as the closed-form denoiser."""
        p = params(3.0)
        fp = solve_branch((0.5, 0.1), p, quad)
        fp_oracle = solve_branch((0.5, 0.1), p, quad,
                                 denoiser_fn=denoiser_oracle, max_iter=3000)
        assert fp_oracle.order.q_d == pytest.approx(fp.order.q_d, abs=1e-8)
        assert fp_oracle.order.q_x == pytest.approx(fp.order.q_x, abs=1e-8)


class TestSolveBranch:
    def test_failure_below_threshold(self, quad):
        fp = solve_branch((0.01, 0.01), params(1.5), quad)
        assert fp.branch is Branch.FAILURE
        assert fp.order.q_d == 0.0 and fp.order.q_x == 0.0
        assert fp.residual < 1e-10

    def test_origin_escapes_above_threshold(self, quad):
        fp = solve_branch((0.01, 0.01), params(2.5), quad)
        assert fp.branch is not Branch.FAILURE

    def test_middle_exists_at_gamma_three(self, quad):
        fp = solve_branch((0.5, 0.1), params(3.0), quad)
        assert fp.branch is Branch.MIDDLE
        assert 0.0 < fp.order.q_d < 1.0
        assert 0.0 < fp.order.q_x < 0.2
        assert fp.order.q_d == pytest.approx(0.654629, abs=1e-5)
        assert fp.order.q_x == pytest.approx(0.089390, abs=1e-5)

    def test_contraction_both_sides_of_gamma_f(self, quad):
        for gamma, expect_contract in ((1.95, True), (2.05, False)):
            q = (1e-8, 1e-8)
            for _ in range(400):
                q = nishimori_update(q[0], q[1], params(gamma), quad)
            shrunk = max(q) < 1e-8
            assert shrunk == expect_contract

    def test_two_step_gain_is_alpha_gamma(self, quad):
        p = params(2.5)
        q1 = nishimori_update(1e-8, 1e-8, p, quad)
        q2 = nishimori_update(*q1, p, quad)
        assert q2[0] / 1e-8 == pytest.approx(p.alpha * p.gamma, rel=1e-3)

    def test_unconverged_when_budget_exhausted(self, quad):
        fp = solve_branch((0.5, 0.1), params(3.0), quad, max_iter=3)
        assert fp.branch is Branch.UNCONVERGED


class TestSolveAllBranches:
    def test_only_failure_below_gamma_s(self, quad):
        fps = solve_all_branches(params(1.0), quad)
        assert [fp.branch for fp in fps] == [Branch.FAILURE]

    def test_success_and_middle_between_gamma_f_and_gamma_m(self, quad):
        fps = solve_all_branches(params(3.0), quad)
        branches = sorted(fp.branch.value for fp in fps)
        assert branches == ["middle", "success"]

    def test_only_success_above_gamma_m(self, quad):
        fps = solve_all_branches(params(5.0), quad)
        assert [fp.branch for fp in fps] == [Branch.SUCCESS]

    def test_failure_and_success_between_gamma_s_and_gamma_f(self, quad):
        fps = solve_all_branches(params(1.9), quad)
        branches = sorted(fp.branch.value for fp in fps)
        assert branches == ["failure", "success"]

    def test_deterministic_across_runs(self, quad):
        a = solve_all_branches(params(3.0), quad)
        b = solve_all_branches(params(3.0), quad)
        assert a == b


class TestSuccessSusceptibilities:
    def test_worked_example(self):
        s = success_susceptibilities(params(2.0))
        assert s.chi_x == pytest.approx(4.0, rel=1e-14)
        assert s.chi_d == pytest.approx(25.0, rel=1e-14)
        assert s.theta_hat_x == pytest.approx(0.05, rel=1e-14)
        assert s.theta_hat_d == pytest.approx(0.04, rel=1e-14)

    @pytest.mark.parametrize("gamma", [1.8, 2.5, 7.0])
    def test_identities(self, gamma):
        p = params(gamma)
        s = success_susceptibilities(p)
        assert s.chi_x * s.theta_hat_x == pytest.approx(p.rho, rel=1e-15)
        assert s.chi_d * s.theta_hat_d == pytest.approx(1.0, rel=1e-15)

    def test_absent_at_threshold(self):
        with pytest.raises(SuccessBranchAbsent):
            success_susceptibilities(params(5.0 / 3.0))

    def test_absent_when_alpha_not_above_rho(self):
        with pytest.raises(SuccessBranchAbsent):
            success_susceptibilities(params(50.0, alpha=0.2, rho=0.2))

    def test_success_record(self):
        fp = success_fixed_point(params(2.0))
        assert fp.branch is Branch.SUCCESS
        assert fp.order.q_d == 1.0
        assert fp.order.q_x == pytest.approx(0.2)
        assert fp.conj.hat_Q_d == 1.0 and math.isinf(fp.conj.hat_q_x)


class TestGeneralExtremize:
    def test_matched_line_consistency(self, quad):
        p = params(3.0)
        fp = general_extremize(p, interior_init(p, 0.5, 0.5), quad)
        o = fp.order
        assert abs(o.m_d - o.q_d) < 1e-7
        assert abs(o.m_x - o.q_x) < 1e-7
        assert abs(o.Q_x - p.prior_power) < 1e-7
        assert o.q_d == pytest.approx(0.654629, abs=1e-5)

    def test_stationary_gradient(self, quad):
        p = params(3.0)
        fp = general_extremize(p, interior_init(p, 0.5, 0.5), quad)
        grad = phi_gradient_fd(fp.order, fp.conj, p, quad)
        assert np.abs(grad).max() < 1e-6

    def test_failure_point_is_stationary(self, quad):
        p = params(3.0)
        fp = general_extremize(p, failure_init(p), quad)
        assert fp.branch is Branch.FAILURE
        grad = phi_gradient_fd(fp.order, fp.conj, p, quad)
        assert np.abs(grad).max() < 1e-6

    def test_mismatched_prior_branch(self, quad):
        p = ModelParams(alpha=0.5, gamma=3.0, rho=0.2, theta=0.16)
        fps = general_branches(p, quad)
        assert any(fp.branch is Branch.MIDDLE for fp in fps)
        for fp in fps:
            grad = phi_gradient_fd(fp.order, fp.conj, p, quad)
            assert np.abs(grad).max() < 1e-6

    def test_matched_success_scaling_at_small_tau(self, quad):
        p = params(2.0, tau=1e-7)
        s = success_susceptibilities(p)
        qd = 1.0 - p.tau * s.chi_d
        qx = p.prior_power - p.tau * s.chi_x
        order = OrderParams(q_d=qd, m_d=qd, q_x=qx, m_x=qx, Q_x=p.prior_power)
        fp = general_extremize(p, (order, conjugates_from_order(order, p)),
                               quad, damping=0.5)
        assert fp.branch is Branch.SUCCESS
        # matched regularization keeps the matched identities at finite tau
        assert abs(fp.order.m_d - fp.order.q_d) < 1e-9
        assert abs(fp.order.Q_x - p.prior_power) < 1e-7
