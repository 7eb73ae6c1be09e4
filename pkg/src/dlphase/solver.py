"""Fixed points of the replica order-parameter equations.

On the matched line (theta = rho) the saddle of the free-entropy density
collapses to two scalars (q_d, q_x) iterated by :func:`nishimori_update`.
Away from it, :func:`general_extremize` solves the full eleven-parameter
stationarity system.  The perfect-recovery (success) branch is degenerate
in the noiseless limit and is handled analytically through its
susceptibilities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import channel
from .channel import ChannelParams, QuadratureSpec, _sigmoid, denoiser, double_average
from .exceptions import ConvergenceError, DegenerateDenominator, DenominatorVanishes, SuccessBranchAbsent

FAILURE_QD_TOL = 1e-6
CORNER_MARGIN = 1e-6
DEDUP_TOL = 1e-6


class Branch(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    MIDDLE = "middle"
    UNCONVERGED = "unconverged"


@dataclass(frozen=True)
class ModelParams:
    """Problem instance.

    alpha    : compression rate M/N, > 0
    gamma    : sample ratio P/N, >= 0
    rho      : true density of non-zero entries, in (0, 1)
    theta    : density assumed by the learner, in (0, 1)
    sigma_x2 : prior variance of non-zero entries, > 0
    tau      : width of the Gaussian regularization of the noiseless
               constraint, >= 0 (0 = noiseless limit)
    """

    alpha: float
    gamma: float
    rho: float
    theta: float
    sigma_x2: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.sigma_x2 > 0.0:
            raise ValueError(f"sigma_x2 must be positive, got {self.sigma_x2}")
        if not self.tau >= 0.0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")

    @property
    def matched(self) -> bool:
        return self.theta == self.rho

    @property
    def prior_power(self) -> float:
        """Second moment rho * sigma_x2 of the planted entries."""
        return self.rho * self.sigma_x2


@dataclass(frozen=True)
class OrderParams:
    q_d: float
    m_d: float
    q_x: float
    m_x: float
    Q_x: float

    def as_tuple(self):
        return (self.q_d, self.m_d, self.q_x, self.m_x, self.Q_x)


@dataclass(frozen=True)
class ConjugateParams:
    hat_Q_d: float
    hat_q_d: float
    hat_m_d: float
    hat_Q_x: float
    hat_q_x: float
    hat_m_x: float

    def as_tuple(self):
        return (self.hat_Q_d, self.hat_q_d, self.hat_m_d,
                self.hat_Q_x, self.hat_q_x, self.hat_m_x)


@dataclass(frozen=True)
class FixedPoint:
    order: OrderParams
    conj: ConjugateParams
    branch: Branch
    iterations: int
    residual: float


@dataclass(frozen=True)
class SuccessSusceptibilities:
    """Rescaled deviations of the success branch in the noiseless limit.

    chi_x = lim (rho sigma_x2 - q_x) / tau, chi_d = lim (1 - q_d) / tau,
    theta_hat_x = lim tau * hat_q_x, theta_hat_d = lim tau * hat_q_d.
    They satisfy chi_x * theta_hat_x = rho and chi_d * theta_hat_d = 1.
    """

    chi_x: float
    chi_d: float
    theta_hat_x: float
    theta_hat_d: float


def success_gap(p: ModelParams) -> float:
    """Existence margin g = (alpha - rho) * gamma - alpha of the success branch."""
    return (p.alpha - p.rho) * p.gamma - p.alpha


def success_susceptibilities(p: ModelParams) -> SuccessSusceptibilities:
    """Closed-form susceptibilities of the perfect-recovery branch."""
    g = success_gap(p)
    if p.alpha <= p.rho or g <= 0.0:
        raise SuccessBranchAbsent(
            f"success branch requires alpha > rho and gamma > gamma_s "
            f"(alpha={p.alpha}, rho={p.rho}, gamma={p.gamma})")
    chi_x = p.rho * p.gamma / g
    chi_d = p.alpha / (p.prior_power * g)
    return SuccessSusceptibilities(
        chi_x=chi_x, chi_d=chi_d,
        theta_hat_x=p.rho / chi_x, theta_hat_d=1.0 / chi_d)


def success_fixed_point(p: ModelParams) -> FixedPoint:
    """Analytic record for the perfect-recovery branch (noiseless limit)."""
    success_susceptibilities(p)  # raises if the branch is absent
    power = p.prior_power
    inf = math.inf
    return FixedPoint(
        order=OrderParams(q_d=1.0, m_d=1.0, q_x=power, m_x=power, Q_x=power),
        conj=ConjugateParams(hat_Q_d=1.0, hat_q_d=inf, hat_m_d=inf,
                             hat_Q_x=0.0, hat_q_x=inf, hat_m_x=inf),
        branch=Branch.SUCCESS, iterations=0, residual=0.0)


def matched_channel(p: ModelParams, hat_q_x: float) -> ChannelParams:
    """Scalar channel on the matched line: hat_m_x = hat_q_x, hat_Q_x = 0."""
    return ChannelParams(theta=p.rho, sigma_x2=p.sigma_x2,
                         hat_q_x=hat_q_x, hat_m_x=hat_q_x, hat_Q_x=0.0)


def nishimori_update(q_d: float, q_x: float, p: ModelParams,
                     quad: QuadratureSpec, denoiser_fn=denoiser):
    """One sweep of the matched-line fixed-point map.

    hat_q_x = alpha q_d / (tau + rho sigma_x2 - q_d q_x)
    hat_q_d = gamma q_x / (tau + rho sigma_x2 - q_d q_x)
    q_d' = hat_q_d / (1 + hat_q_d)
    q_x' = << denoiser(z, x0)^2 >>

    The matched regularization keeps this reduced form exact at any tau;
    the noiseless map is the tau = 0 case.  Raises DenominatorVanishes when
    the denominator is non-positive, which marks the flow into the
    perfect-recovery corner.
    """
    if not p.matched:
        raise ValueError("nishimori_update requires theta = rho")
    r = p.tau + p.prior_power - q_d * q_x
    if r <= 0.0:
        raise DenominatorVanishes(
            f"rho sigma_x2 - q_d q_x = {r} <= 0", last_iterate=(q_d, q_x))
    hat_q_x = p.alpha * q_d / r
    hat_q_d = p.gamma * q_x / r
    ch = matched_channel(p, hat_q_x)
    q_d_new = hat_q_d / (1.0 + hat_q_d)
    q_x_new = double_average(lambda z, x0: denoiser_fn(z, x0, ch) ** 2,
                             p.rho, p.sigma_x2, quad)
    return q_d_new, q_x_new


class _MatchedKernel:
    """Preassembled node grids for the matched-line q_x update.

    Computes the same quantity as double_average(denoiser^2) but with the
    zero atom folded into one weight matrix, so the hot loop is a handful
    of vectorized operations.
    """

    def __init__(self, p: ModelParams, quad: QuadratureSpec):
        self.p = p
        sigma_x = math.sqrt(p.sigma_x2)
        self.z = quad.z_nodes[:, None]
        self.x0 = np.concatenate(([0.0], sigma_x * quad.x_nodes))[None, :]
        col_w = np.concatenate(([1.0 - p.rho], p.rho * quad.x_weights))
        self.w = quad.z_weights[:, None] * col_w[None, :]
        self.log_theta = math.log(p.rho)
        self.log_one_minus = math.log1p(-p.rho)

    def mean_sq_denoiser(self, hat_q_x: float) -> float:
        p = self.p
        shat = 1.0 + hat_q_x * p.sigma_x2
        h = math.sqrt(hat_q_x) * self.z + hat_q_x * self.x0
        t = (self.log_theta - 0.5 * math.log(shat)
             + p.sigma_x2 * h * h / (2.0 * shat)) - self.log_one_minus
        ratio = _sigmoid(t)
        den = ratio * (p.sigma_x2 / shat) * h
        return float(np.sum(self.w * den * den))

    def update(self, q_d: float, q_x: float):
        p = self.p
        r = p.tau + p.prior_power - q_d * q_x
        if r <= 0.0:
            raise DenominatorVanishes(
                f"rho sigma_x2 - q_d q_x = {r} <= 0", last_iterate=(q_d, q_x))
        hat_q_d = p.gamma * q_x / r
        return hat_q_d / (1.0 + hat_q_d), self.mean_sq_denoiser(p.alpha * q_d / r)


def _matched_conjugates(q_d: float, q_x: float, p: ModelParams) -> ConjugateParams:
    r = p.tau + p.prior_power - q_d * q_x
    hat_q_x = p.alpha * q_d / r
    hat_q_d = p.gamma * q_x / r
    return ConjugateParams(hat_Q_d=1.0, hat_q_d=hat_q_d, hat_m_d=hat_q_d,
                           hat_Q_x=0.0, hat_q_x=hat_q_x, hat_m_x=hat_q_x)


def _classify(q_d: float, q_x: float, p: ModelParams, converged: bool) -> Branch:
    power = p.prior_power
    if not converged:
        return Branch.UNCONVERGED
    if q_d < FAILURE_QD_TOL and q_x < FAILURE_QD_TOL * power:
        return Branch.FAILURE
    if q_d > 1.0 - CORNER_MARGIN or q_x > power * (1.0 - CORNER_MARGIN):
        # numerically stalled on the approach to the success corner; not a
        # valid interior fixed point of the noiseless map
        return Branch.UNCONVERGED
    return Branch.MIDDLE


_ACCEL_PERIOD = 16


def solve_branch(init, p: ModelParams, quad: QuadratureSpec,
                 damping: float = 0.5, tol: float = 1e-10,
                 max_iter: int = 100_000, denoiser_fn=denoiser,
                 accelerate: bool = True) -> FixedPoint:
    """Damped fixed-point iteration from a single starting point.

    Convergence means the damped-step change drops below tol in max-norm.
    With ``accelerate`` the geometric tail is periodically extrapolated
    (vector Aitken); a jump is kept only when it lands in the domain and
    shrinks the raw update, so the returned point always satisfies the
    plain damped-step criterion.  Classifies the converged point as
    FAILURE or MIDDLE; success is never produced by iteration in the
    noiseless limit.  DenominatorVanishes propagates with the last iterate
    attached.
    """
    if not 0.0 <= damping < 1.0:
        raise ValueError(f"damping must lie in [0, 1), got {damping}")
    if not p.matched:
        raise ValueError("solve_branch requires theta = rho")
    if denoiser_fn is denoiser:
        step = _MatchedKernel(p, quad).update
    else:
        def step(a, b):
            return nishimori_update(a, b, p, quad, denoiser_fn)
    power = p.prior_power
    q_d, q_x = float(init[0]), float(init[1])
    residual = math.inf
    iterations = 0
    converged = False
    history: list[tuple[float, float]] = []
    for iterations in range(1, max_iter + 1):
        try:
            q_d_new, q_x_new = step(q_d, q_x)
        except DenominatorVanishes as err:
            raise DenominatorVanishes(str(err), last_iterate=(q_d, q_x)) from None
        raw_residual = max(abs(q_d_new - q_d), abs(q_x_new - q_x))
        q_d = (1.0 - damping) * q_d_new + damping * q_d
        q_x = (1.0 - damping) * q_x_new + damping * q_x
        residual = (1.0 - damping) * raw_residual
        if residual < tol:
            converged = True
            break
        history.append((q_d, q_x))
        if len(history) > 3:
            history.pop(0)
        if accelerate and iterations % _ACCEL_PERIOD == 0 and len(history) >= 3:
            x0, x1, x2 = history[-3], history[-2], history[-1]
            d1 = (x1[0] - x0[0], x1[1] - x0[1])
            d2 = (x2[0] - x1[0], x2[1] - x1[1])
            denom = d1[0] * d1[0] + d1[1] * d1[1]
            if denom > 0.0:
                lam = (d1[0] * d2[0] + d1[1] * d2[1]) / denom
                # near the zero-overlap point (no fold to overshoot) the
                # window widens to cover marginal, algebraically slow decay
                near_origin = max(x2[0], x2[1] / power) < 0.05
                if 0.5 < lam < 0.98 or (near_origin and 0.5 < lam < 0.99995):
                    gain = lam / (1.0 - lam)
                    cand = (x2[0] + d2[0] * gain, x2[1] + d2[1] * gain)
                    if (0.0 <= cand[0] < 1.0 and 0.0 <= cand[1] < power
                            and power - cand[0] * cand[1] > 0.0):
                        try:
                            nd, nx = step(cand[0], cand[1])
                        except DenominatorVanishes:
                            nd = nx = None
                        if nd is not None:
                            cand_raw = max(abs(nd - cand[0]), abs(nx - cand[1]))
                            if cand_raw < raw_residual:
                                q_d, q_x = cand
                                history.clear()
    branch = _classify(q_d, q_x, p, converged)
    if branch is Branch.FAILURE:
        # the zero-overlap solution is exactly (0, 0); the iterate is its
        # numerical approximation
        q_d = q_x = 0.0
    order = OrderParams(q_d=q_d, m_d=q_d, q_x=q_x, m_x=q_x, Q_x=power)
    return FixedPoint(order=order, conj=_matched_conjugates(q_d, q_x, p),
                      branch=branch, iterations=iterations, residual=residual)


def _canonical_inits(p: ModelParams):
    power = p.prior_power
    inits = [(1e-3, 1e-3 * power)]
    grid = (0.1, 0.3, 0.5, 0.7, 0.9)
    inits.extend((a, b * power) for a in grid for b in grid)
    return inits


def solve_all_branches(p: ModelParams, quad: QuadratureSpec,
                       damping: float = 0.5, tol: float = 1e-10,
                       max_iter: int = 100_000) -> list[FixedPoint]:
    """All distinct noiseless-limit branches reachable from a canonical grid.

    Runs solve_branch from a fixed set of starting points, drops runs that
    fail to converge or flow into the success corner, deduplicates the rest
    within DEDUP_TOL in (q_d, q_x) max-norm, and appends the analytic
    success record whenever that branch exists.  Once the zero-overlap
    point has lost stability (alpha gamma >= 1) the update map's
    componentwise monotonicity sandwiches every canonical start between
    the smallest one and the recovery corner, so only the smallest start
    is run.
    """
    inits = _canonical_inits(p)
    if p.alpha * p.gamma >= 1.0:
        inits = inits[:1]
    found: list[FixedPoint] = []
    for init in inits:
        try:
            fp = solve_branch(init, p, quad, damping=damping, tol=tol,
                              max_iter=max_iter)
        except DenominatorVanishes:
            continue
        if fp.branch is Branch.UNCONVERGED:
            continue
        duplicate = any(
            max(abs(fp.order.q_d - other.order.q_d),
                abs(fp.order.q_x - other.order.q_x)) < DEDUP_TOL
            for other in found)
        if not duplicate:
            found.append(fp)
    try:
        found.append(success_fixed_point(p))
    except SuccessBranchAbsent:
        pass
    return found


# ---------------------------------------------------------------------------
# Full stationarity system away from the matched line
# ---------------------------------------------------------------------------

def conjugates_from_order(order: OrderParams, p: ModelParams) -> ConjugateParams:
    """Conjugate parameters at stationarity of the free entropy in the order
    parameters, for fixed order parameters.

    With n = tau + q_d q_x - 2 m_d m_x + rho sigma_x2 and
    d = tau + Q_x - q_d q_x (tau regularizes the hard constraint on both the
    generated data and the likelihood, so the matched line stays matched):

        hat_q_x = alpha q_d n / d^2      hat_m_x = alpha m_d / d
        hat_Q_x = alpha (d - n) / d^2
        hat_q_d = gamma q_x n / d^2      hat_m_d = gamma m_x / d
        hat_Q_d = B - hat_q_d,  B solving B^2 - B = hat_q_d + hat_m_d^2.

    hat_q_x and hat_q_d are clipped at 0 so the field stays real along the
    iteration path; at any converged stationary point the clip is inactive.
    """
    n = p.tau + order.q_d * order.q_x - 2.0 * order.m_d * order.m_x + p.prior_power
    d = p.tau + order.Q_x - order.q_d * order.q_x
    if d <= 0.0:
        raise DegenerateDenominator(f"tau + Q_x - q_d q_x = {d} <= 0")
    hat_q_x = max(p.alpha * order.q_d * n / d ** 2, 0.0)
    hat_m_x = p.alpha * order.m_d / d
    hat_Q_x = p.alpha * (d - n) / d ** 2
    hat_q_d = max(p.gamma * order.q_x * n / d ** 2, 0.0)
    hat_m_d = p.gamma * order.m_x / d
    b = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * (hat_q_d + hat_m_d ** 2)))
    return ConjugateParams(hat_Q_d=b - hat_q_d, hat_q_d=hat_q_d, hat_m_d=hat_m_d,
                           hat_Q_x=hat_Q_x, hat_q_x=hat_q_x, hat_m_x=hat_m_x)


def order_from_conjugates(conj: ConjugateParams, p: ModelParams,
                          quad: QuadratureSpec) -> OrderParams:
    """Order parameters at stationarity in the conjugates, for fixed conjugates.

    The dictionary block is Gaussian and closes in elementary functions;
    the sparse block reduces to scalar-posterior moments averaged over the
    planted ensemble.
    """
    b = conj.hat_Q_d + conj.hat_q_d
    if b <= 0.0:
        raise DegenerateDenominator(f"hat_Q_d + hat_q_d = {b} <= 0")
    q_d = (conj.hat_q_d + conj.hat_m_d ** 2) / b ** 2
    m_d = conj.hat_m_d / b
    ch = ChannelParams(theta=p.theta, sigma_x2=p.sigma_x2,
                       hat_q_x=conj.hat_q_x, hat_m_x=conj.hat_m_x,
                       hat_Q_x=conj.hat_Q_x)
    q_x = double_average(lambda z, x0: denoiser(z, x0, ch) ** 2,
                         p.rho, p.sigma_x2, quad)
    m_x = double_average(lambda z, x0: x0 * denoiser(z, x0, ch),
                         p.rho, p.sigma_x2, quad)
    big_q_x = double_average(lambda z, x0: channel.posterior_second_moment(z, x0, ch),
                             p.rho, p.sigma_x2, quad)
    return OrderParams(q_d=q_d, m_d=m_d, q_x=q_x, m_x=m_x, Q_x=big_q_x)


def _general_classify(order: OrderParams, p: ModelParams) -> Branch:
    power = p.prior_power
    if order.q_d < FAILURE_QD_TOL and order.q_x < FAILURE_QD_TOL * power:
        return Branch.FAILURE
    if 1.0 - order.q_d < 1e-4 and power - order.q_x < 1e-4 * power:
        return Branch.SUCCESS
    return Branch.MIDDLE


def general_extremize(p: ModelParams, init, quad: QuadratureSpec,
                      damping: float = 0.5, tol: float = 1e-12,
                      max_iter: int = 200_000) -> FixedPoint:
    """Damped fixed-point solve of the full stationarity system.

    ``init`` is an (OrderParams, ConjugateParams) pair; the conjugate part
    seeds the first half-sweep and is then recomputed self-consistently.
    Convergence is measured as the max-norm of the relative change across
    all eleven parameters.  Raises ConvergenceError when the budget is
    exhausted and DegenerateDenominator when an iterate leaves the domain.
    """
    order, conj = init
    power = p.prior_power
    residual = math.inf
    history: list[tuple] = []
    for iterations in range(1, max_iter + 1):
        conj_new = conjugates_from_order(order, p)
        conj_mix = ConjugateParams(*[
            (1.0 - damping) * new + damping * old
            for new, old in zip(conj_new.as_tuple(), conj.as_tuple())])
        order_new = order_from_conjugates(conj_mix, p, quad)
        order_mix = OrderParams(*[
            (1.0 - damping) * new + damping * old
            for new, old in zip(order_new.as_tuple(), order.as_tuple())])
        residual = max(
            max(abs(a - b) / (1.0 + abs(b)) for a, b in
                zip(order_mix.as_tuple(), order.as_tuple())),
            max(abs(a - b) / (1.0 + abs(b)) for a, b in
                zip(conj_mix.as_tuple(), conj.as_tuple())))
        order, conj = order_mix, conj_mix
        if residual < tol:
            return FixedPoint(order=order, conj=conj,
                              branch=_general_classify(order, p),
                              iterations=iterations, residual=residual)
        history.append(np.array(order.as_tuple() + conj.as_tuple()))
        if len(history) > 3:
            history.pop(0)
        if iterations % _ACCEL_PERIOD == 0 and len(history) >= 3:
            x0, x1, x2 = history
            d1 = x1 - x0
            d2 = x2 - x1
            denom = float(d1 @ d1)
            if denom > 0.0:
                lam = float(d1 @ d2) / denom
                near_origin = max(order.q_d, order.q_x / power) < 0.05
                if 0.5 < lam < 0.98 or (near_origin and 0.5 < lam < 0.9995):
                    cand = x2 + d2 * (lam / (1.0 - lam))
                    cand_order = OrderParams(*cand[:5])
                    cand_conj = ConjugateParams(*cand[5:])
                    if (cand_conj.hat_q_x >= 0.0 and cand_conj.hat_q_d >= 0.0
                            and cand_conj.hat_Q_d + cand_conj.hat_q_d > 0.0
                            and 1.0 + (cand_conj.hat_Q_x + cand_conj.hat_q_x)
                            * p.sigma_x2 > 0.0
                            and p.tau + cand_order.Q_x
                            - cand_order.q_d * cand_order.q_x > 0.0):
                        order, conj = cand_order, cand_conj
                        history.clear()
    raise ConvergenceError(
        f"stationarity iteration did not converge in {max_iter} sweeps "
        f"(residual {residual:.3e})", last_iterate=(order, conj))


def failure_init(p: ModelParams) -> tuple[OrderParams, ConjugateParams]:
    """Zero-overlap starting point of the general stationarity system."""
    order = OrderParams(q_d=0.0, m_d=0.0, q_x=0.0, m_x=0.0, Q_x=p.prior_power)
    conj = ConjugateParams(hat_Q_d=1.0, hat_q_d=0.0, hat_m_d=0.0,
                           hat_Q_x=0.0, hat_q_x=0.0, hat_m_x=0.0)
    return order, conj


def interior_init(p: ModelParams, a: float, b: float) -> tuple[OrderParams, ConjugateParams]:
    """Aligned interior starting point with q_d = a and q_x = b * rho sigma_x2."""
    power = p.prior_power
    order = OrderParams(q_d=a, m_d=a, q_x=b * power, m_x=b * power, Q_x=power)
    return order, conjugates_from_order(order, p)


def general_branches(p: ModelParams, quad: QuadratureSpec,
                     damping: float = 0.5, tol: float = 1e-12,
                     max_iter: int = 200_000) -> list[FixedPoint]:
    """Distinct finite branches of the general system from a canonical init set."""
    inits = [failure_init(p)]
    for a, b in ((0.3, 0.3), (0.5, 0.5), (0.7, 0.7), (0.9, 0.9), (0.2, 0.8)):
        try:
            inits.append(interior_init(p, a, b))
        except DegenerateDenominator:
            continue
    found: list[FixedPoint] = []
    for init in inits:
        try:
            fp = general_extremize(p, init, quad, damping=damping, tol=tol,
                                   max_iter=max_iter)
        except (ConvergenceError, DegenerateDenominator):
            continue
        duplicate = any(
            max(abs(a - b) for a, b in
                zip(fp.order.as_tuple(), other.order.as_tuple())) < DEDUP_TOL
            for other in found)
        if not duplicate:
            found.append(fp)
    return found
