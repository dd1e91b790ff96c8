"""Root-finding and convex-conjugate solvers on the limiting cumulant.

solve_theta_star finds the positive zero of the marginal risk cumulant
Psi_i (the exponential decay rate of the ruin probability);
legendre_transform computes the rate function Lambda*(x) together with its
maximizing twist; dominant_point adds the nonnegativity active-set logic
needed for orthant exceedance events.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    HeavyTailOrNoRoot,
    InfeasibleRareEvent,
    NetProfitViolated,
    NoConvergence,
    NoInteriorMaximizer,
)
from .model import ModelSpec, mean_drift, validate_net_profit
from .numerics import DEFAULT_NUMERICS, NumericsConfig
from .transforms import cumulant_gradient, limiting_cumulant, marginal_cumulants


@dataclass(frozen=True)
class TwistSolution:
    """A twist vector with the gradient target it matches and its rate."""

    theta: np.ndarray
    target: np.ndarray
    rate: float
    active_set: tuple


def solve_theta_star(
    spec: ModelSpec, i: int, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> float:
    """Unique positive root of Psi_i(theta) = Lambda_i(theta) - r_i theta.

    Brackets by geometric expansion from 1e-3; when the expansion exits the
    cumulant domain, the largest in-domain theta is located by bisection
    and Psi_i must already be positive there (otherwise no root exists on
    the ray and the model is outside the light-tailed regime).
    """
    if not validate_net_profit(spec, i):
        raise NetProfitViolated(f"premium {spec.premium[i]} <= drift of component {i}")

    def psi(theta: float) -> float:
        return marginal_cumulants(spec, i, theta, numerics)[1]

    hi = 1e-3
    while True:
        value = psi(hi)
        if np.isfinite(value) and value > 0:
            break
        if not np.isfinite(value):
            lo_edge, hi_edge = hi / 2, hi
            while hi_edge - lo_edge > 1e-6 * hi_edge:
                mid = 0.5 * (lo_edge + hi_edge)
                if np.isfinite(psi(mid)):
                    lo_edge = mid
                else:
                    hi_edge = mid
            if psi(lo_edge) <= 0:
                raise HeavyTailOrNoRoot(
                    f"Psi_{i} <= 0 on the whole in-domain ray (up to {lo_edge:.6g})"
                )
            hi = lo_edge
            break
        hi *= 2.0
    lo = hi / 2
    while psi(lo) > 0:
        lo /= 2
        if lo < 1e-300:
            raise HeavyTailOrNoRoot("Psi_i has no sign change above 0")
    while hi - lo > numerics.bisect_tol:
        mid = 0.5 * (lo + hi)
        if psi(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _hessian_fd(spec, theta, numerics, h=1e-6):
    """Symmetrized forward/backward differences of the analytic gradient."""
    dstar = spec.dims.dstar
    hess = np.empty((dstar, dstar))
    for k in range(dstar):
        e = np.zeros(dstar)
        e[k] = h
        gp = cumulant_gradient(spec, theta + e, numerics)
        gm = cumulant_gradient(spec, theta - e, numerics)
        hess[:, k] = (gp - gm) / (2 * h)
    return 0.5 * (hess + hess.T)


def _ascend(spec, x, mask, numerics):
    """Maximize theta.x - Lambda(theta) over {theta : theta[~mask] = 0}.

    Stationarity means the cumulant gradient matches x on the unpinned
    coordinates; since the gradient field of a convex function is
    monotone, damped Newton on the residual x - grad Lambda with
    residual-norm backtracking (and domain backtracking at the cumulant
    boundary) converges to the unique interior stationary point whenever
    one exists.
    """
    dstar = spec.dims.dstar
    theta = np.zeros(dstar)
    idx = np.flatnonzero(mask)

    def residual(t):
        ev = limiting_cumulant(spec, t, numerics)
        if not ev.in_domain:
            return None
        return x[idx] - cumulant_gradient(spec, t, numerics)[idx]

    res = residual(theta)
    res_norm = float(np.max(np.abs(res)))
    for _ in range(numerics.newton_max_iter):
        if res_norm < numerics.gradient_match_tol * 0.1:
            return theta
        hess = _hessian_fd(spec, theta, numerics)[np.ix_(idx, idx)]
        try:
            delta_red = np.linalg.solve(hess, res)
        except np.linalg.LinAlgError:
            delta_red = res
        for direction in (delta_red, res):
            delta = np.zeros(dstar)
            delta[idx] = direction
            step = 1.0
            moved = False
            for _ in range(numerics.backtrack_max):
                cand_res = residual(theta + step * delta)
                if cand_res is not None:
                    cand_norm = float(np.max(np.abs(cand_res)))
                    if cand_norm < res_norm:
                        theta = theta + step * delta
                        res, res_norm = cand_res, cand_norm
                        moved = True
                        break
                step *= 0.5
            if moved:
                break
        else:
            # no direction reduces the stationarity residual: the ascent
            # ran into the cumulant domain boundary without stationarity
            raise NoInteriorMaximizer(
                f"ascent stalled at theta={theta} with gradient residual "
                f"{res_norm:.3g}"
            )
    raise NoConvergence(numerics.newton_max_iter, res_norm)


def legendre_transform(
    spec: ModelSpec, x, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> TwistSolution:
    """Lambda*(x) = sup_theta (theta.x - Lambda(theta)) with its maximizer."""
    x = np.asarray(x, dtype=float)
    theta = _ascend(spec, x, np.ones(spec.dims.dstar, dtype=bool), numerics)
    rate = float(np.dot(theta, x)) - limiting_cumulant(spec, theta, numerics).value
    active = tuple(int(k) for k in np.flatnonzero(theta > 0))
    return TwistSolution(theta, x, rate, active)


def dominant_point(
    spec: ModelSpec, a, active=None, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> TwistSolution:
    """Twist for the orthant event {Z(t)/t >= a componentwise}.

    Solves the corner problem and pins any negative twist component to
    zero, re-solving the reduced stationarity system; the returned target
    is the dominant point a* (equal to a on the active set, and to the
    cumulant gradient on pinned coordinates, where it exceeds a).
    """
    a = np.asarray(a, dtype=float)
    dstar = spec.dims.dstar
    drift = mean_drift(spec)
    mask = np.ones(dstar, dtype=bool) if active is None else np.asarray(active, bool).copy()
    if np.all(a[mask] <= drift[mask]):
        raise InfeasibleRareEvent(f"target {a} lies below the drift {drift}")

    for _ in range(dstar + 1):
        theta = _ascend(spec, a, mask, numerics)
        negative = mask & (theta < 0)
        if not negative.any():
            break
        mask &= ~negative
        if not mask.any():
            raise InfeasibleRareEvent(
                f"all twist components pinned to zero for target {a}"
            )
    theta = np.where(mask, theta, 0.0)
    grad = cumulant_gradient(spec, theta, numerics)
    a_star = np.where(mask, a, grad)
    rate = float(np.dot(theta, a_star)) - limiting_cumulant(spec, theta, numerics).value
    active_set = tuple(int(k) for k in np.flatnonzero(theta > 0))
    return TwistSolution(theta, a_star, rate, active_set)
