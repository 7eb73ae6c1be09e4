"""Replica free-entropy density and branch dominance.

phi is evaluated for arbitrary order/conjugate parameters; the failure and
success branches additionally have closed forms.  In the noiseless limit
the success branch diverges as (g/2) ln(1/tau) with g = (alpha-rho) gamma
- alpha, so free-entropy values are carried as a log-divergence
coefficient plus a finite part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, QuadratureSpec, average_log_xi
from .exceptions import DegenerateDenominator, SuccessBranchAbsent
from .solver import Branch, ConjugateParams, FixedPoint, ModelParams, OrderParams, success_gap


@dataclass(frozen=True)
class PhiValue:
    """Free-entropy value: log_div_coeff * ln(1/tau) + finite_part."""

    log_div_coeff: float
    finite_part: float


def binary_entropy(rho: float) -> float:
    """H(rho) = -(1-rho) ln(1-rho) - rho ln(rho)."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"binary_entropy requires rho in (0, 1), got {rho}")
    return -(1.0 - rho) * math.log1p(-rho) - rho * math.log(rho)


def _avg_log_xi(conj: ConjugateParams, p: ModelParams, quad: QuadratureSpec) -> float:
    ch = ChannelParams(theta=p.theta, sigma_x2=p.sigma_x2,
                       hat_q_x=conj.hat_q_x, hat_m_x=conj.hat_m_x,
                       hat_Q_x=conj.hat_Q_x)
    return average_log_xi(ch, p.rho, quad)


def phi_general(order: OrderParams, conj: ConjugateParams, p: ModelParams,
                quad: QuadratureSpec) -> float:
    """Free-entropy density at an arbitrary (order, conjugate) point.

    The hard constraint tying data to the factor product is regularized by
    a Gaussian of variance tau on both the generated data and the
    likelihood, giving the constraint term the numerator
    tau + q_d q_x - 2 m_d m_x + rho sigma_x2 over the denominator
    tau + Q_x - q_d q_x; tau = 0 is the strict noiseless form.  Raises
    DegenerateDenominator when a denominator is non-positive.
    """
    b = conj.hat_Q_d + conj.hat_q_d
    if b <= 0.0:
        raise DegenerateDenominator(f"hat_Q_d + hat_q_d = {b} <= 0")
    d = p.tau + order.Q_x - order.q_d * order.q_x
    if d <= 0.0:
        raise DegenerateDenominator(f"tau + Q_x - q_d q_x = {d} <= 0")
    n = p.tau + order.q_d * order.q_x - 2.0 * order.m_d * order.m_x + p.prior_power

    sparse = p.gamma * (
        0.5 * (conj.hat_Q_x * order.Q_x + conj.hat_q_x * order.q_x)
        - conj.hat_m_x * order.m_x
        + _avg_log_xi(conj, p, quad))
    dictionary = 0.5 * p.alpha * (
        conj.hat_Q_d + conj.hat_q_d * order.q_d - 2.0 * conj.hat_m_d * order.m_d
        - math.log(b) + (conj.hat_q_d + conj.hat_m_d ** 2) / b)
    constraint = -0.5 * p.alpha * p.gamma * (n / d + math.log(d))
    return sparse + dictionary + constraint


def phi_failure(p: ModelParams) -> PhiValue:
    """Closed form of phi at the zero-overlap branch."""
    finite = 0.5 * (-p.alpha * p.gamma * (1.0 + math.log(p.prior_power)) + p.alpha)
    return PhiValue(log_div_coeff=0.0, finite_part=finite)


def phi_success(p: ModelParams) -> PhiValue:
    """Closed form of phi at the perfect-recovery branch.

    The finite part generalizes the matched-line expression by replacing
    -gamma H(rho) with the cross term gamma (rho ln theta +
    (1-rho) ln(1-theta)); the two coincide at theta = rho.
    """
    g = success_gap(p)
    if p.alpha <= p.rho or g <= 0.0:
        raise SuccessBranchAbsent(
            f"success branch absent (g = {g}, alpha = {p.alpha}, rho = {p.rho})")
    a, ga, rho = p.alpha, p.gamma, p.rho
    finite = 0.5 * (
        g * (math.log(g) - 1.0)
        - a * ga * math.log(a * ga)
        + a * (1.0 - math.log(p.prior_power / a))
        + ga * rho * (math.log(ga) - math.log(p.sigma_x2)))
    finite += ga * (rho * math.log(p.theta) + (1.0 - rho) * math.log1p(-p.theta))
    return PhiValue(log_div_coeff=0.5 * g, finite_part=finite)


def phi_at_fixed_point(fp: FixedPoint, p: ModelParams, quad: QuadratureSpec) -> PhiValue:
    """Free entropy of a solved branch; iterated branches have no divergence."""
    if fp.branch is Branch.SUCCESS:
        return phi_success(p)
    return PhiValue(log_div_coeff=0.0,
                    finite_part=phi_general(fp.order, fp.conj, p, quad))


_BRANCH_PRIORITY = {Branch.SUCCESS: 3, Branch.MIDDLE: 2,
                    Branch.FAILURE: 1, Branch.UNCONVERGED: 0}


def dominant_branch(branches: list[tuple[FixedPoint, PhiValue]]) -> FixedPoint:
    """Thermodynamically dominant branch.

    Any positive log-divergence coefficient wins outright; otherwise the
    largest finite part, with exact ties broken toward success, then
    middle.  The result is invariant under permutation of the input.
    """
    if not branches:
        raise ValueError("dominant_branch requires a non-empty branch list")

    def key(item):
        fp, phi = item
        diverges = phi.log_div_coeff > 0.0
        return (diverges, phi.log_div_coeff if diverges else 0.0,
                phi.finite_part, _BRANCH_PRIORITY[fp.branch])

    return max(branches, key=key)[0]


# ---------------------------------------------------------------------------
# Finite-difference stationarity check
# ---------------------------------------------------------------------------

_HAT_Q_X_INDEX = 9  # position of hat_q_x in the packed coordinate vector


def _phi_packed(x, p: ModelParams, quad: QuadratureSpec) -> float:
    order = OrderParams(*x[:5])
    conj = ConjugateParams(*x[5:])
    return phi_general(order, conj, p, quad)


def phi_gradient_fd(order: OrderParams, conj: ConjugateParams, p: ModelParams,
                    quad: QuadratureSpec, rel_step: float = 1e-6) -> np.ndarray:
    """Finite-difference gradient of phi over all eleven free parameters.

    Central differences with step rel_step * max(|x_i|, 1); the hat_q_x
    coordinate falls back to a one-sided second-order stencil when a
    central step would leave its domain (hat_q_x >= 0).
    """
    x = np.array([*order.as_tuple(), *conj.as_tuple()], dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1.0)
        lo = x.copy()
        hi = x.copy()
        if i == _HAT_Q_X_INDEX and x[i] - h < 0.0:
            hi2 = x.copy()
            hi[i] = x[i] + h
            hi2[i] = x[i] + 2.0 * h
            grad[i] = (-3.0 * _phi_packed(x, p, quad)
                       + 4.0 * _phi_packed(hi, p, quad)
                       - _phi_packed(hi2, p, quad)) / (2.0 * h)
            continue
        lo[i] = x[i] - h
        hi[i] = x[i] + h
        grad[i] = (_phi_packed(hi, p, quad) - _phi_packed(lo, p, quad)) / (2.0 * h)
    return grad
