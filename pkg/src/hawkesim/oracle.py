"""Independent brute-force references used by the test suite.

These never import the transform/optimize modules they validate; the
dependency direction is enforced so a bug cannot hide on both sides of a
comparison.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import OracleDomainError, StencilOutOfDomain, TooCloseToBoundary


def borel_log_pmf(mu: float, n: int) -> float:
    """log P(S = n) for the total progeny of a Poisson(mu) branching process."""
    if not 0 < mu < 1:
        raise OracleDomainError("mu must lie in (0, 1)")
    if n < 1:
        raise OracleDomainError("n must be >= 1")
    return -mu * n + (n - 1) * math.log(mu * n) - float(gammaln(n + 1))


def borel_pmf(mu: float, n: int) -> float:
    """P(S = n) = exp(-mu n) (mu n)^(n-1) / n!, evaluated in log space."""
    return math.exp(borel_log_pmf(mu, n))


def series_cumulant_univariate(mu: float, lambda_bar: float, theta: float) -> float:
    """Reference Lambda(theta) for unit marks and unit claims.

    lambda_bar (E exp(theta S) - 1) with S Borel(mu), summed adaptively
    until the geometric tail bound drops below 1e-12. Valid for
    exp(theta) at most 99% of the domain edge z_hat = exp(mu - 1)/mu.
    """
    if not 0 < mu < 1:
        raise OracleDomainError("mu must lie in (0, 1)")
    z_hat = math.exp(mu - 1.0) / mu
    z = math.exp(theta)
    if z > 0.99 * z_hat:
        raise TooCloseToBoundary(f"exp(theta)={z:.6g} above 0.99 z_hat={0.99 * z_hat:.6g}")
    # term ratio tends to z/z_hat < 0.99, so the tail is geometrically bounded
    total = 0.0
    ratio_cap = z / z_hat
    n = 1
    while True:
        term = math.exp(theta * n + borel_log_pmf(mu, n))
        total += term
        tail_bound = term * max(ratio_cap, 0.5) / (1.0 - max(ratio_cap, 0.5))
        if n > 10 and tail_bound < 1e-12:
            break
        n += 1
        if n > 10**6:
            raise OracleDomainError("series did not converge")
    return lambda_bar * (total - 1.0)


def finite_diff_gradient(fn, x, h: float = 1e-6) -> np.ndarray:
    """Central differences componentwise; fn must be finite on the stencil."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        fp, fm = fn(x + e), fn(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise StencilOutOfDomain(f"stencil at coordinate {k} leaves the domain")
        grad[k] = (fp - fm) / (2.0 * h)
    return grad


def grid_legendre(fn, x: float, theta_max: float, step: float = 1e-5) -> float:
    """Brute-force sup over a theta grid of theta*x - fn(theta)."""
    thetas = np.arange(0.0, theta_max + step, step)
    best = -np.inf
    for theta in thetas:
        value = fn(float(theta))
        if not np.isfinite(value):
            break
        best = max(best, theta * x - value)
    return best
