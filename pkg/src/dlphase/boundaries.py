"""Critical lines of the sample-ratio/compression phase diagram.

gamma_s and gamma_f are closed forms.  gamma_m (disappearance of the
middle branch) is found by continuation in the sample ratio with
bisection refinement.  rho_m / alpha_m locate the spinodal where gamma_m
diverges, using the infinite-sample reduction: the dictionary overlap is
pinned at 1 and a one-dimensional map in q_x remains, identical to the
state evolution of Bayes-optimal noiseless compressed sensing at
measurement rate alpha.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import QuadratureSpec, denoiser, double_average
from .exceptions import DenominatorVanishes, UndefinedBoundary
from .solver import Branch, ModelParams, _canonical_inits, matched_channel, solve_branch

INTERIOR_MARGIN = 1e-4


class BoundaryStatus(enum.Enum):
    FOUND = "found"
    DIVERGED = "diverged"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class BoundaryResult:
    value: float
    bracket: tuple[float, float]
    status: BoundaryStatus


def gamma_s(alpha: float, rho: float) -> float:
    """Existence threshold alpha / (alpha - rho) of the success branch."""
    if not (alpha > rho > 0.0):
        raise UndefinedBoundary(
            f"gamma_s requires alpha > rho > 0, got alpha={alpha}, rho={rho}")
    return alpha / (alpha - rho)


def gamma_f(alpha: float) -> float:
    """Local-stability threshold 1 / alpha of the zero-overlap branch."""
    if not alpha > 0.0:
        raise UndefinedBoundary(f"gamma_f requires alpha > 0, got {alpha}")
    return 1.0 / alpha


def _is_interior_middle(fp, power: float) -> bool:
    return (fp.branch is Branch.MIDDLE
            and INTERIOR_MARGIN * power < fp.order.q_x < power - INTERIOR_MARGIN)


def middle_branch_exists(p: ModelParams, quad: QuadratureSpec,
                         damping: float = 0.5, tol: float = 1e-10,
                         max_iter: int = 100_000) -> bool:
    """Whether a converged interior fixed point survives at these parameters.

    Interior means q_x in (1e-4 rho sigma_x2, rho sigma_x2 - 1e-4), which
    keeps clear of both the zero-overlap point and the recovery corner.
    The update map is componentwise monotone, so once the zero-overlap
    point is unstable (gamma > 1/alpha) every canonical start is
    sandwiched between the smallest one and the recovery corner; the
    smallest start alone then decides existence.  Otherwise the full
    canonical grid is scanned, stopping at the first interior hit.
    """
    power = p.prior_power
    inits = _canonical_inits(p)
    if p.gamma * p.alpha > 1.0:
        inits = inits[:1]
    for init in inits:
        try:
            fp = solve_branch(init, p, quad, damping=damping, tol=tol,
                              max_iter=max_iter)
        except DenominatorVanishes:
            continue
        if _is_interior_middle(fp, power):
            return True
    return False


def gamma_m(alpha: float, rho: float, tol: float = 1e-3, *,
            sigma_x2: float = 1.0, quad: QuadratureSpec | None = None,
            gamma_cap: float = 1e3, step_factor: float = 1.1,
            damping: float = 0.5, solver_tol: float = 1e-10,
            max_iter: int = 100_000) -> BoundaryResult:
    """Sample ratio above which the middle branch disappears.

    Continuation upward from just above max(gamma_s, gamma_f) with
    multiplicative steps, then bisection of the last existence bracket.
    DIVERGED when the branch persists beyond gamma_cap.
    """
    if not (0.0 < rho < alpha):
        return BoundaryResult(value=math.nan, bracket=(math.nan, math.nan),
                              status=BoundaryStatus.UNDEFINED)
    if quad is None:
        quad = QuadratureSpec.gauss_hermite()

    def exists(gamma: float) -> bool:
        p = ModelParams(alpha=alpha, gamma=gamma, rho=rho, theta=rho,
                        sigma_x2=sigma_x2)
        return middle_branch_exists(p, quad, damping=damping, tol=solver_tol,
                                    max_iter=max_iter)

    start = max(gamma_s(alpha, rho), gamma_f(alpha)) * 1.01
    lo = start
    if not exists(start):
        # the branch is already gone at the continuation start
        return BoundaryResult(value=start, bracket=(start / 1.01, start),
                              status=BoundaryStatus.FOUND)
    hi = start * step_factor
    while exists(hi):
        lo = hi
        hi *= step_factor
        if hi > gamma_cap:
            return BoundaryResult(value=math.inf, bracket=(lo, math.inf),
                                  status=BoundaryStatus.DIVERGED)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if exists(mid):
            lo = mid
        else:
            hi = mid
    return BoundaryResult(value=0.5 * (lo + hi), bracket=(lo, hi),
                          status=BoundaryStatus.FOUND)


# ---------------------------------------------------------------------------
# Infinite-sample reduction and the spinodal line
# ---------------------------------------------------------------------------

def reduced_map(q_x, alpha: float, rho: float, sigma_x2: float,
                quad: QuadratureSpec):
    """Infinite-sample-limit update of q_x with the dictionary overlap pinned.

    hat_q_x = alpha / (rho sigma_x2 - q_x); returns << denoiser^2 >>.
    Accepts a scalar or an array of q_x values below rho sigma_x2.
    """
    q_arr = np.atleast_1d(np.asarray(q_x, dtype=float))
    power = rho * sigma_x2
    if np.any(q_arr >= power):
        raise ValueError("reduced_map requires q_x < rho sigma_x2")
    out = np.empty_like(q_arr)
    p = ModelParams(alpha=alpha, gamma=1.0, rho=rho, theta=rho,
                    sigma_x2=sigma_x2)
    for i, q in enumerate(q_arr):
        ch = matched_channel(p, alpha / (power - q))
        out[i] = double_average(lambda z, x0: denoiser(z, x0, ch) ** 2,
                                rho, sigma_x2, quad)
    return out if np.ndim(q_x) else float(out[0])


def _golden_min(f, lo: float, hi: float, iters: int = 60):
    """Golden-section minimum of a unimodal scalar function on [lo, hi]."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def bad_fixed_point_exists(alpha: float, rho: float, sigma_x2: float,
                           quad: QuadratureSpec, grid_n: int = 384) -> bool:
    """Whether the reduced map has a stable fixed point away from recovery.

    The residual reduced_map(q) - q is positive at both ends of
    [0, rho sigma_x2 - 1e-4]; an interior stable fixed point (and its
    unstable partner) exists exactly when the residual dips below zero.
    The dip is located on a grid and polished by golden section.
    """
    power = rho * sigma_x2
    hi = power - INTERIOR_MARGIN
    if hi <= 0.0:
        return False
    qs = np.linspace(0.0, hi, grid_n)
    res = reduced_map(qs, alpha, rho, sigma_x2, quad) - qs
    k = int(np.argmin(res))
    if res[k] < 0.0:
        return True
    lo_b = qs[max(k - 1, 0)]
    hi_b = qs[min(k + 1, grid_n - 1)]
    f = lambda q: float(reduced_map(q, alpha, rho, sigma_x2, quad)) - q
    _, fmin = _golden_min(f, lo_b, hi_b)
    return fmin < 0.0


def rho_m(alpha: float, tol: float = 1e-4, *, sigma_x2: float = 1.0,
          quad: QuadratureSpec | None = None,
          scan_step: float = 0.02) -> BoundaryResult:
    """Smallest density at which the reduced map acquires a bad fixed point.

    Above rho_m the middle branch survives at any sample ratio, so gamma_m
    diverges there.  Scans upward in rho, then bisects the first bracket.
    UNDEFINED if no transition occurs below min(alpha, 1).
    """
    if not alpha > 0.0:
        raise UndefinedBoundary(f"rho_m requires alpha > 0, got {alpha}")
    if quad is None:
        quad = QuadratureSpec.gauss_hermite()

    def exists(rho: float) -> bool:
        return bad_fixed_point_exists(alpha, rho, sigma_x2, quad)

    hi_cap = min(alpha, 1.0) - 1e-3
    lo = scan_step
    if lo >= hi_cap:
        return BoundaryResult(value=math.nan, bracket=(math.nan, math.nan),
                              status=BoundaryStatus.UNDEFINED)
    if exists(lo):
        return BoundaryResult(value=lo, bracket=(0.0, lo),
                              status=BoundaryStatus.FOUND)
    rho = lo
    while True:
        nxt = min(rho + scan_step, hi_cap)
        if exists(nxt):
            lo, hi = rho, nxt
            break
        rho = nxt
        if rho >= hi_cap:
            return BoundaryResult(value=math.nan, bracket=(math.nan, math.nan),
                                  status=BoundaryStatus.UNDEFINED)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if exists(mid):
            hi = mid
        else:
            lo = mid
    return BoundaryResult(value=0.5 * (lo + hi), bracket=(lo, hi),
                          status=BoundaryStatus.FOUND)


def alpha_m(rho: float, tol: float = 1e-4, *, sigma_x2: float = 1.0,
            quad: QuadratureSpec | None = None) -> BoundaryResult:
    """Compression rate above which only the recovery state survives.

    Inverts rho_m by bisection in alpha: the bad fixed point of the
    reduced map exists for alpha below the spinodal and vanishes above.
    """
    if not 0.0 < rho < 1.0:
        raise UndefinedBoundary(f"alpha_m requires rho in (0, 1), got {rho}")
    if quad is None:
        quad = QuadratureSpec.gauss_hermite()

    def exists(alpha: float) -> bool:
        return bad_fixed_point_exists(alpha, rho, sigma_x2, quad)

    lo = rho * (1.0 + 1e-6)
    if not exists(lo):
        # spinodal indistinguishable from the alpha = rho line
        return BoundaryResult(value=lo, bracket=(rho, lo),
                              status=BoundaryStatus.FOUND)
    hi = max(2.0 * rho, 1.0)
    while exists(hi):
        hi *= 1.5
        if hi > 8.0:
            return BoundaryResult(value=math.inf, bracket=(lo, math.inf),
                                  status=BoundaryStatus.DIVERGED)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if exists(mid):
            lo = mid
        else:
            hi = mid
    return BoundaryResult(value=0.5 * (lo + hi), bracket=(lo, hi),
                          status=BoundaryStatus.FOUND)


def phase_region(alpha: float, rho: float,
                 quad: QuadratureSpec | None = None,
                 sigma_x2: float = 1.0) -> str:
    """Phase-diagram region label.

    III : alpha <= rho, learning impossible.
    II  : learning possible with O(N) samples but the middle branch
          survives at every sample ratio (message passing expected to get
          trapped).
    I   : above the spinodal; only the recovery state survives at large
          sample ratio.
    """
    if not (0.0 < rho <= 1.0 and 0.0 < alpha):
        raise ValueError(f"alpha and rho must be positive, rho <= 1; "
                         f"got alpha={alpha}, rho={rho}")
    if alpha <= rho:
        return "III"
    if quad is None:
        quad = QuadratureSpec.gauss_hermite()
    if rho < 1.0 and bad_fixed_point_exists(alpha, rho, sigma_x2, quad):
        return "II"
    return "I"
