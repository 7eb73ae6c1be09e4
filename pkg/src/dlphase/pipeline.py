"""Computations behind the service endpoints and CLI commands.

Everything here is a pure function from parameters to records; results
are emitted in a deterministic order (branch priority, then overlap) so
repeated runs produce identical bytes.
"""

from __future__ import annotations

import math

from . import boundaries
from .boundaries import BoundaryResult, BoundaryStatus
from .channel import QuadratureSpec
from .entropy import PhiValue, dominant_branch, phi_at_fixed_point
from .exceptions import ConvergenceError, SuccessBranchAbsent
from .records import BoundaryRow, FreeEntropyRow, PhaseCell, SweepRecord
from .solver import (Branch, FixedPoint, ModelParams, general_branches,
                     solve_all_branches, success_fixed_point)

_BRANCH_ORDER = {Branch.SUCCESS: 0, Branch.MIDDLE: 1, Branch.FAILURE: 2,
                 Branch.UNCONVERGED: 3}


def mse_d(fp: FixedPoint) -> float:
    """Dictionary mean squared error 2 - 2 m_d / sqrt(q_d), or 2 at q_d = 0."""
    if fp.order.q_d <= 0.0:
        return 2.0
    return 2.0 - 2.0 * fp.order.m_d / math.sqrt(fp.order.q_d)


def mse_x(fp: FixedPoint, p: ModelParams) -> float:
    """Sparse-matrix mean squared error rho sigma_x2 + q_x - 2 m_x."""
    return p.prior_power + fp.order.q_x - 2.0 * fp.order.m_x


def branch_points(p: ModelParams, quad: QuadratureSpec,
                  damping: float = 0.5, tol: float = 1e-10,
                  max_iter: int = 100_000) -> list[tuple[FixedPoint, PhiValue]]:
    """Solved branches with their free entropies, deterministically ordered.

    On the matched line this is the canonical-grid solve; away from it the
    full stationarity system is used (which also retains the exact
    zero-overlap point when it is locally unstable, matching how
    metastable branches are usually reported).
    """
    if p.matched:
        fps = solve_all_branches(p, quad, damping=damping, tol=tol,
                                 max_iter=max_iter)
    else:
        fps = general_branches(p, quad, damping=damping, tol=max(tol * 0.01, 1e-13),
                               max_iter=2 * max_iter)
        try:
            fps = fps + [success_fixed_point(p)]
        except SuccessBranchAbsent:
            pass
    pts = [(fp, phi_at_fixed_point(fp, p, quad)) for fp in fps]
    pts.sort(key=lambda t: (_BRANCH_ORDER[t[0].branch], -t[0].order.q_d))
    return pts


def solve_records(p: ModelParams, quad: QuadratureSpec,
                  damping: float = 0.5, tol: float = 1e-10,
                  max_iter: int = 100_000) -> list[SweepRecord]:
    """One SweepRecord per branch at a single parameter point."""
    pts = branch_points(p, quad, damping=damping, tol=tol, max_iter=max_iter)
    if not pts:
        raise ConvergenceError(
            f"no branch converged at alpha={p.alpha}, rho={p.rho}, "
            f"gamma={p.gamma}, theta={p.theta}")
    best = dominant_branch(pts)
    out = []
    for fp, phi in pts:
        out.append(SweepRecord(
            gamma=p.gamma, branch=fp.branch.value,
            q_d=fp.order.q_d, q_x=fp.order.q_x,
            m_d=fp.order.m_d, m_x=fp.order.m_x, Q_x=fp.order.Q_x,
            mse_d=mse_d(fp), mse_x=mse_x(fp, p),
            phi_finite=phi.finite_part, phi_logdiv=phi.log_div_coeff,
            dominant=fp is best))
    return out


def gamma_grid(gamma_min: float, gamma_max: float, steps: int) -> list[float]:
    if not gamma_min < gamma_max:
        raise ValueError("gamma-min must be smaller than gamma-max")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    h = (gamma_max - gamma_min) / (steps - 1)
    return [gamma_min + i * h for i in range(steps)]


def sweep_records(alpha: float, rho: float, theta: float, sigma_x2: float,
                  gamma_min: float, gamma_max: float, steps: int,
                  quad: QuadratureSpec, damping: float = 0.5,
                  tol: float = 1e-10, max_iter: int = 100_000) -> list[SweepRecord]:
    """SweepRecord rows over an even sample-ratio grid, grid order."""
    out = []
    for gamma in gamma_grid(gamma_min, gamma_max, steps):
        p = ModelParams(alpha=alpha, gamma=gamma, rho=rho, theta=theta,
                        sigma_x2=sigma_x2)
        out.extend(solve_records(p, quad, damping=damping, tol=tol,
                                 max_iter=max_iter))
    return out


def free_entropy_rows(alpha: float, rho: float, theta: float, sigma_x2: float,
                      gamma_min: float, gamma_max: float, steps: int,
                      quad: QuadratureSpec, **solver_kw) -> list[FreeEntropyRow]:
    """Free-entropy branch values on a sample-ratio grid."""
    rows = []
    for rec in sweep_records(alpha, rho, theta, sigma_x2, gamma_min,
                             gamma_max, steps, quad, **solver_kw):
        rows.append(FreeEntropyRow(gamma=rec.gamma, branch=rec.branch,
                                   phi_finite=rec.phi_finite,
                                   phi_logdiv=rec.phi_logdiv))
    return rows


def _result_to_row(parameter: float, res: BoundaryResult) -> BoundaryRow:
    if res.status is BoundaryStatus.FOUND:
        value = res.value
    elif res.status is BoundaryStatus.DIVERGED:
        value = math.inf
    else:
        value = math.nan
    return BoundaryRow(parameter=parameter, value=value, status=res.status.value)


def parse_range(spec: str) -> list[float]:
    """Parse a "start:stop:count" range specification (inclusive ends)."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be start:stop:count, got {spec!r}")
    start, stop = float(parts[0]), float(parts[1])
    count = int(parts[2])
    if count < 1:
        raise ValueError("range count must be at least 1")
    if count == 1:
        return [start]
    h = (stop - start) / (count - 1)
    return [start + i * h for i in range(count)]


def boundary_rows(which: str, alpha: float, rho: float | None,
                  rho_values: list[float] | None, tol: float,
                  quad: QuadratureSpec, sigma_x2: float = 1.0,
                  gamma_cap: float = 1e3) -> list[BoundaryRow]:
    """Rows (parameter, value, status) for one critical-line request.

    For gamma-s/gamma-f/gamma-m the parameter column carries rho (the
    swept variable when rho_values is given); for rho-m it carries alpha.
    """
    rhos = rho_values if rho_values is not None else ([rho] if rho is not None else [])
    rows: list[BoundaryRow] = []
    if which == "gamma-s":
        for r in rhos:
            try:
                rows.append(BoundaryRow(r, boundaries.gamma_s(alpha, r),
                                        BoundaryStatus.FOUND.value))
            except Exception:
                rows.append(BoundaryRow(r, math.nan, BoundaryStatus.UNDEFINED.value))
    elif which == "gamma-f":
        rows.append(BoundaryRow(alpha, boundaries.gamma_f(alpha),
                                BoundaryStatus.FOUND.value))
    elif which == "gamma-m":
        for r in rhos:
            res = boundaries.gamma_m(alpha, r, tol=tol, sigma_x2=sigma_x2,
                                     quad=quad, gamma_cap=gamma_cap)
            rows.append(_result_to_row(r, res))
    elif which == "rho-m":
        res = boundaries.rho_m(alpha, tol=tol, sigma_x2=sigma_x2, quad=quad)
        rows.append(_result_to_row(alpha, res))
    else:
        raise ValueError(f"unknown boundary kind {which!r}")
    return rows


def phase_diagram(alpha_values: list[float], rho_values: list[float],
                  quad: QuadratureSpec, sigma_x2: float = 1.0,
                  boundary_tol: float = 1e-3):
    """Region labels on a grid plus the spinodal polyline alpha_m(rho)."""
    cells = [PhaseCell(alpha=a, rho=r,
                       region=boundaries.phase_region(a, r, quad, sigma_x2))
             for a in alpha_values for r in rho_values]
    polyline = []
    for r in rho_values:
        if r >= 1.0:
            continue
        res = boundaries.alpha_m(r, tol=boundary_tol, sigma_x2=sigma_x2,
                                 quad=quad)
        polyline.append(_result_to_row(r, res))
    return cells, polyline
