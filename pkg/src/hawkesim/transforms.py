"""Generating-function machinery for the cluster representation.

The cluster-size PGF f(z) is the minimal increasing solution of

    f_j(z) = z_j * m_Bj(c_1j (f_1 - 1), ..., c_dj (f_d - 1)),

and the limiting cumulant of the compound process is
Lambda(theta) = sum_j lambda_bar_j (f_j(m_U(theta)) - 1). Everything else
here (Jacobian, gradient, domain boundary) is bookkeeping around that
fixed point.

Domain membership is probed by attempted convergence: points outside the
PGF domain raise OutsideDomain from the solver, which limiting_cumulant
converts into an infinite value so that root-finders can probe freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    MarkMgfDomainExceeded,
    NearSingular,
    NoConvergence,
    OutOfMgfDomain,
    OutsideDomain,
)
from .model import ModelSpec, validate_stability
from .numerics import DEFAULT_NUMERICS, NumericsConfig


@dataclass(frozen=True)
class PgfSolution:
    """Converged value of the cluster-size PGF at a point z."""

    z: np.ndarray
    f: np.ndarray
    iterations: int
    converged: bool
    residual: float


@dataclass(frozen=True)
class DomainBoundary:
    """Boundary pair (z_hat, x_hat) of the PGF domain along direction r."""

    r: np.ndarray
    z_hat: np.ndarray
    x_hat: np.ndarray
    residual_fixed_point: float
    residual_kernel: float


@dataclass(frozen=True)
class CumulantEval:
    theta: np.ndarray
    value: float
    gradient: Optional[np.ndarray]
    in_domain: bool


def claim_mgf_vector(spec: ModelSpec, theta, check: bool = True) -> np.ndarray:
    """Vector (m_U1(theta), ..., m_Ud(theta)) of per-column claim mgfs.

    With check=True an infinite entry raises OutOfMgfDomain listing the
    offending columns; with check=False infinities are returned in place
    so callers can treat domain exit as a value.
    """
    theta = np.asarray(theta, dtype=float)
    out = np.array([law.mgf(theta) for law in spec.claims])
    if check and not np.all(np.isfinite(out)):
        raise OutOfMgfDomain(np.flatnonzero(~np.isfinite(out)))
    return out


def _apply_map(spec: ModelSpec, z: np.ndarray, x: np.ndarray) -> Optional[np.ndarray]:
    """One fixed-point step x -> z * m_B(C (x - 1)); None on an mgf wall."""
    s = spec.c_matrix * (x - 1.0)[:, None]
    out = np.empty_like(x)
    for j, law in enumerate(spec.marks):
        col = s[:, j]
        if not law.mgf_finite(col):
            return None
        out[j] = z[j] * law.mgf(col)
    return out


def _bhat_matrix(spec: ModelSpec, z: np.ndarray, f: np.ndarray) -> Optional[np.ndarray]:
    """B_hat[m, j] = z_j c_mj dm_Bj/ds_m at s = C[:, j] (f - 1)."""
    s = spec.c_matrix * (f - 1.0)[:, None]
    d = spec.dims.d
    out = np.empty((d, d))
    for j, law in enumerate(spec.marks):
        col = s[:, j]
        if not law.mgf_finite(col):
            return None
        out[:, j] = z[j] * spec.c_matrix[:, j] * law.mgf_grad(col)
    return out


def _newton_polish(spec, z, x0, numerics) -> Optional[np.ndarray]:
    """Damped Newton on R(x) = x - z*m_B(C(x-1)) from a monotone iterate.

    Started below the minimal fixed point the iterates stay below it and
    increase, so a converged result is the PGF value. Returns None when
    Newton cannot make progress (inconclusive; fixed-point iteration
    continues).
    """
    x = x0.copy()
    tx = _apply_map(spec, z, x)
    if tx is None:
        return None
    res = np.max(np.abs(tx - x))
    for _ in range(30):
        if res < numerics.fixed_point_tol:
            return x
        bhat = _bhat_matrix(spec, z, x)
        if bhat is None:
            return None
        jac = np.eye(spec.dims.d) - bhat.T
        try:
            delta = np.linalg.solve(jac, tx - x)
        except np.linalg.LinAlgError:
            return None
        step = 1.0
        for _ in range(numerics.backtrack_max):
            cand = x + step * delta
            tc = _apply_map(spec, z, cand)
            if tc is not None:
                cand_res = np.max(np.abs(tc - cand))
                if cand_res < res:
                    x, tx, res = cand, tc, cand_res
                    break
            step *= 0.5
        else:
            return None
    return x if res < numerics.fixed_point_tol else None


def solve_cluster_pgf(
    spec: ModelSpec, z, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> PgfSolution:
    """Minimal fixed point of the cluster PGF system at z.

    Monotone iteration from 0 converges upward to the minimal solution;
    a periodic Newton polish accelerates the tail of the convergence.
    Divergence (z outside the PGF domain) is certified by an mgf wall, an
    iterate above the guard, or sustained step growth, and raises
    OutsideDomain.
    """
    z = np.asarray(z, dtype=float)
    d = spec.dims.d
    if z.shape != (d,):
        raise ValueError(f"z must have length d={d}")
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    if np.all(z == 1.0):
        ones = np.ones(d)
        return PgfSolution(z, ones, 1, True, 0.0)

    x = np.zeros(d)
    prev_step = np.inf
    growth = 0
    polish_at = 64
    for it in range(1, numerics.fixed_point_max_iter + 1):
        xn = _apply_map(spec, z, x)
        if xn is None or np.any(xn > numerics.divergence_guard):
            raise OutsideDomain(z, it)
        step = np.max(np.abs(xn - x))
        x = xn
        if step < numerics.fixed_point_tol:
            t = _apply_map(spec, z, x)
            residual = np.inf if t is None else float(np.max(np.abs(t - x)))
            return PgfSolution(z, x, it, True, residual)
        # Steps contract strictly inside the domain once past the initial
        # transient; sustained growth past the branch mean certifies
        # divergence without waiting for the guard.
        if it > 50 and step >= prev_step and np.max(x) > 1.0:
            growth += 1
            if growth >= 10:
                raise OutsideDomain(z, it)
        else:
            growth = 0
        prev_step = step
        if it == polish_at:
            polish_at *= 4
            polished = _newton_polish(spec, z, x, numerics)
            if polished is not None:
                t = _apply_map(spec, z, polished)
                residual = np.inf if t is None else float(np.max(np.abs(t - polished)))
                if residual < numerics.fixed_point_tol:
                    return PgfSolution(z, polished, it, True, residual)
    raise OutsideDomain(z, numerics.fixed_point_max_iter)


def cluster_pgf_jacobian(
    spec: ModelSpec, sol: PgfSolution, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> np.ndarray:
    """J[j, k] = df_j/dz_k = ((I - B_hat^T)^{-1} diag(f/z))[j, k]."""
    if not sol.converged:
        raise ValueError("jacobian requires a converged PGF solution")
    if np.any(sol.z <= 0):
        raise ValueError("jacobian requires z > 0 componentwise")
    bhat = _bhat_matrix(spec, sol.z, sol.f)
    if bhat is None:
        raise OutsideDomain(sol.z)
    a = np.eye(spec.dims.d) - bhat.T
    if np.linalg.cond(a) > numerics.condition_limit:
        raise NearSingular(
            f"I - B_hat^T condition exceeds {numerics.condition_limit:g} "
            "(approaching the PGF domain boundary)"
        )
    return np.linalg.solve(a, np.diag(sol.f / sol.z))


def limiting_cumulant(
    spec: ModelSpec, theta, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> CumulantEval:
    """Lambda(theta) = sum_j lambda_bar_j (f_j(m_U(theta)) - 1).

    Domain exit is reported as value +inf with in_domain=False rather than
    an error, because root-finders probe the boundary deliberately.
    """
    theta = np.asarray(theta, dtype=float)
    validate_stability(spec)
    z = claim_mgf_vector(spec, theta, check=False)
    if not np.all(np.isfinite(z)):
        return CumulantEval(theta, np.inf, None, False)
    try:
        sol = solve_cluster_pgf(spec, z, numerics)
    except OutsideDomain:
        return CumulantEval(theta, np.inf, None, False)
    value = float(np.dot(spec.lambda_bar, sol.f - 1.0))
    return CumulantEval(theta, value, None, True)


def cumulant_gradient(
    spec: ModelSpec, theta, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> np.ndarray:
    """grad Lambda via the chain rule through the PGF Jacobian."""
    theta = np.asarray(theta, dtype=float)
    z = claim_mgf_vector(spec, theta, check=False)
    if not np.all(np.isfinite(z)):
        raise OutsideDomain(z)
    sol = solve_cluster_pgf(spec, z, numerics)
    jac = cluster_pgf_jacobian(spec, sol, numerics)
    weights = spec.lambda_bar @ jac  # w_k = sum_j lambda_j J[j, k]
    grad = np.zeros(spec.dims.dstar)
    for k, law in enumerate(spec.claims):
        grad += weights[k] * law.mgf_grad(theta)
    return grad


def marginal_cumulants(
    spec: ModelSpec, i: int, theta: float, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> tuple[float, float]:
    """(Lambda_i(theta), Psi_i(theta)) for the component-i risk process.

    Psi_i(theta) = Lambda_i(theta) - premium_i * theta; +inf outside the
    cumulant domain.
    """
    if not 0 <= i < spec.dims.dstar:
        raise IndexError(f"component {i} outside [0, {spec.dims.dstar})")
    vec = np.zeros(spec.dims.dstar)
    vec[i] = theta
    ev = limiting_cumulant(spec, vec, numerics)
    if not ev.in_domain:
        return np.inf, np.inf
    return ev.value, ev.value - float(spec.premium[i]) * theta


def _boundary_system(spec: ModelSpec, r: np.ndarray, x: np.ndarray):
    """F, m_B column values and weighted-gradient matrix for the x_hat system.

    F_j(x) = x_j sum_k r_k D[k, j] - r_j M_j with D[k, j] = c_kj dm_Bj/ds_k,
    all evaluated at s_j = C[:, j] (x - 1). Returns None on an mgf wall.
    """
    s = spec.c_matrix * (x - 1.0)[:, None]
    d = spec.dims.d
    m = np.empty(d)
    dmat = np.empty((d, d))
    for j, law in enumerate(spec.marks):
        col = s[:, j]
        if not law.mgf_finite(col):
            return None
        m[j] = law.mgf(col)
        dmat[:, j] = spec.c_matrix[:, j] * law.mgf_grad(col)
    f = x * (r @ dmat) - r * m
    return f, m, dmat


def domain_boundary(
    spec: ModelSpec, r, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> DomainBoundary:
    """Boundary pair (z_hat, x_hat) of the PGF domain for direction r > 0.

    Newton's method solves the d-dimensional x_hat system with domain
    backtracking; z_hat then follows by direct evaluation.
    """
    r = np.asarray(r, dtype=float)
    d = spec.dims.d
    if r.shape != (d,) or np.any(r <= 0):
        raise ValueError("direction r must be a positive vector of length d")
    rho = validate_stability(spec, numerics)
    x = np.ones(d) * (1.0 + 0.5 * (1.0 / rho - 1.0)) if rho > 0 else np.ones(d) * 2.0

    sysval = _boundary_system(spec, r, x)
    if sysval is None:
        # fall back to a start just above 1 if the heuristic guess is too far out
        x = np.ones(d) * 1.01
        sysval = _boundary_system(spec, r, x)
        if sysval is None:
            raise MarkMgfDomainExceeded("initial guess outside the mark mgf domain")

    fval, m, dmat = sysval
    res = np.max(np.abs(fval))
    scale = max(1.0, float(np.max(np.abs(r))))
    for it in range(numerics.newton_max_iter):
        if res < numerics.newton_tol * scale:
            break
        s = spec.c_matrix * (x - 1.0)[:, None]
        jac = np.empty((d, d))
        for j, law in enumerate(spec.marks):
            hess = law.mgf_hess(s[:, j])
            w = (r * spec.c_matrix[:, j]) @ hess
            jac[j, :] = x[j] * w * spec.c_matrix[:, j] - r[j] * dmat[:, j]
            jac[j, j] += r @ dmat[:, j]
        try:
            delta = np.linalg.solve(jac, -fval)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(it, res) from exc
        step = 1.0
        hit_wall = True
        for _ in range(numerics.backtrack_max):
            cand = x + step * delta
            sysval = _boundary_system(spec, r, cand)
            if sysval is not None:
                hit_wall = False
                cand_res = np.max(np.abs(sysval[0]))
                if cand_res < res:
                    x, (fval, m, dmat), res = cand, sysval, cand_res
                    break
            step *= 0.5
        else:
            if hit_wall:
                raise MarkMgfDomainExceeded(
                    "Newton cannot re-enter the mark mgf domain"
                )
            raise NoConvergence(it, res)
    else:
        raise NoConvergence(numerics.newton_max_iter, res)

    z_hat = r / (r @ dmat)
    residual_fp = float(np.max(np.abs(z_hat * m - x)))
    bhat = dmat * z_hat[None, :]
    residual_kernel = float(np.max(np.abs(r - bhat.T @ r)))
    return DomainBoundary(r, z_hat, x, residual_fp, residual_kernel)
