"""Model primitives for the multivariate marked Hawkes process under P.

A model couples, per emitting component j:
  * a base rate lambda_bar[j] for immigrant events,
  * a column of decay kernels g[l][j] (effect of j-events on component l),
  * a mark law for the vector B_j = (B_1j, ..., B_dj) scaling offspring
    intensities,
  * a claim law for the vector U_j in R^dstar added to the compound process
    at every j-event,
plus a premium rate vector for the risk processes.

The branching matrix H[m][j] = E[B_mj] * c_mj (with c the kernel L1 norms)
must have spectral radius < 1 for the process to be stable; every consumer
of a ModelSpec goes through validate_stability first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import NonConvergent, SingularSystem, TiltOutOfDomain, Unstable
from .numerics import DEFAULT_NUMERICS, NumericsConfig


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Mark / claim laws
# ---------------------------------------------------------------------------


class VectorLaw:
    """A law over nonnegative vectors with a closed-form mgf and tilt.

    The same families serve as mark laws (length d) and claim laws
    (length dstar): exponential tilting acts identically on both, and the
    likelihood-ratio contribution of a draw x under a tilt by s is always
    ``-s.x + log mgf(s)``.
    """

    dim: int

    def mean(self) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mgf(self, s) -> float:
        """E exp(s.X); +inf outside the convergence domain."""
        raise NotImplementedError

    def log_mgf(self, s) -> float:
        raise NotImplementedError

    def mgf_finite(self, s) -> bool:
        raise NotImplementedError

    def mgf_grad(self, s) -> np.ndarray:
        """Partial derivatives of the mgf at s."""
        raise NotImplementedError

    def mgf_hess(self, s) -> np.ndarray:
        raise NotImplementedError

    def tilt(self, s) -> "VectorLaw":
        """The law reweighted by exp(s.x)/mgf(s)."""
        raise NotImplementedError

    def log_density_ratio(self, x, s) -> float:
        """log of d(original)/d(tilt-by-s) evaluated at a draw x."""
        return float(self.log_mgf(s) - np.dot(x, s))


@dataclass(frozen=True)
class DeterministicLaw(VectorLaw):
    """Point mass at a fixed nonnegative vector; tilts to itself."""

    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 1:
            raise ValueError("values must be a vector")
        if np.any(v < 0):
            raise ValueError("values must be nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def mean(self) -> np.ndarray:
        return self.values

    def sample(self, rng) -> np.ndarray:
        return self.values

    def mgf(self, s) -> float:
        arg = float(np.dot(self.values, s))
        return np.inf if arg > 700.0 else float(np.exp(arg))

    def log_mgf(self, s) -> float:
        return float(np.dot(self.values, s))

    def mgf_finite(self, s) -> bool:
        return True

    def mgf_grad(self, s) -> np.ndarray:
        return self.values * self.mgf(s)

    def mgf_hess(self, s) -> np.ndarray:
        return np.outer(self.values, self.values) * self.mgf(s)

    def tilt(self, s) -> "DeterministicLaw":
        return self


@dataclass(frozen=True)
class ExponentialLaw(VectorLaw):
    """Independent exponential components with the given rates."""

    rates: np.ndarray

    def __post_init__(self):
        r = _readonly(self.rates)
        if r.ndim != 1:
            raise ValueError("rates must be a vector")
        if np.any(r <= 0):
            raise ValueError("rates must be positive")
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "_scales", _readonly(1.0 / r))

    @property
    def dim(self) -> int:
        return self.rates.shape[0]

    def mean(self) -> np.ndarray:
        return self._scales

    def sample(self, rng) -> np.ndarray:
        return rng.exponential(self._scales)

    def mgf(self, s) -> float:
        s = np.asarray(s, dtype=float)
        if np.any(s >= self.rates):
            return np.inf
        return float(np.prod(self.rates / (self.rates - s)))

    def log_mgf(self, s) -> float:
        s = np.asarray(s, dtype=float)
        if np.any(s >= self.rates):
            return np.inf
        return float(-np.sum(np.log1p(-s / self.rates)))

    def mgf_finite(self, s) -> bool:
        return bool(np.all(np.asarray(s, dtype=float) < self.rates))

    def mgf_grad(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if np.any(s >= self.rates):
            return np.full_like(self.rates, np.inf)
        return self.mgf(s) / (self.rates - s)

    def mgf_hess(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        m = self.mgf(s)
        inv = 1.0 / (self.rates - s)
        h = m * np.outer(inv, inv)
        h[np.diag_indices_from(h)] *= 2.0
        return h

    def tilt(self, s) -> "ExponentialLaw":
        s = np.asarray(s, dtype=float)
        if np.any(s >= self.rates):
            k = int(np.argmax(s - self.rates))
            raise TiltOutOfDomain("exponential", k)
        return ExponentialLaw(self.rates - s)


# ---------------------------------------------------------------------------
# Decay kernels
# ---------------------------------------------------------------------------


class DecayKernel:
    """Nonnegative, nonincreasing, integrable decay function g."""

    c: float  # L1 norm of g

    def value(self, t: float) -> float:
        raise NotImplementedError

    def partial_integral(self, t) -> np.ndarray:
        """G(t) = integral of g over [0, t]; vectorized in t."""
        raise NotImplementedError

    def scaled(self, factor: float) -> "DecayKernel":
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialKernel(DecayKernel):
    """g(t) = scale * exp(-alpha t), with L1 norm scale/alpha."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")

    @property
    def c(self) -> float:
        return self.scale / self.alpha

    def value(self, t):
        return self.scale * np.exp(-self.alpha * np.asarray(t, dtype=float))

    def partial_integral(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * (-np.expm1(-self.alpha * t)) / self.alpha

    def scaled(self, factor: float) -> "ExponentialKernel":
        return ExponentialKernel(self.alpha, self.scale * factor)


@dataclass(frozen=True)
class TabulatedKernel(DecayKernel):
    """Piecewise-linear kernel from a nonincreasing sample grid.

    The grid defines g on [times[0]=0, times[-1]]; g is zero beyond the
    last sample. The L1 norm is supplied explicitly and checked against
    composite Simpson quadrature of the tabulation.
    """

    times: np.ndarray
    values: np.ndarray
    norm: float
    scale: float = 1.0

    def __post_init__(self):
        t = _readonly(self.times)
        v = _readonly(self.values)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or v.shape != t.shape or t.size < 2:
            raise ValueError("times and values must be equal-length vectors (>= 2 samples)")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must increase strictly from 0")
        if np.any(v < 0):
            raise ValueError("kernel samples must be nonnegative")
        if np.any(np.diff(v) > 0):
            raise ValueError("kernel samples must be nonincreasing")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        quad = float(simpson(v, x=t))
        if abs(quad - self.norm) > max(1e-8, 1e-8 * self.norm):
            raise ValueError(
                f"supplied L1 norm {self.norm:.12g} disagrees with quadrature {quad:.12g}"
            )

    @property
    def c(self) -> float:
        return self.scale * self.norm

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * np.interp(t, self.times, self.values, left=0.0, right=0.0)

    def partial_integral(self, t):
        # The interpolant is piecewise linear, so per-interval composite
        # Simpson (with midpoints) integrates it exactly.
        t = np.atleast_1d(np.asarray(t, dtype=float))
        knots = self.times
        vals = self.values
        seg = 0.5 * np.diff(knots) * (vals[:-1] + vals[1:])
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        tc = np.clip(t, 0.0, knots[-1])
        idx = np.clip(np.searchsorted(knots, tc, side="right") - 1, 0, knots.size - 2)
        t0 = knots[idx]
        frac = tc - t0
        v0 = vals[idx]
        slope = (vals[idx + 1] - vals[idx]) / (knots[idx + 1] - knots[idx])
        vmid = v0 + slope * frac / 2.0
        v1 = v0 + slope * frac
        partial = frac / 6.0 * (v0 + 4.0 * vmid + v1)
        out = self.scale * (cum[idx] + partial)
        return out if out.size > 1 else float(out[0])

    def scaled(self, factor: float) -> "TabulatedKernel":
        return TabulatedKernel(self.times, self.values, self.norm, self.scale * factor)


# ---------------------------------------------------------------------------
# Model spec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dimensions:
    d: int
    dstar: int

    def __post_init__(self):
        if self.d < 1 or self.dstar < 1:
            raise ValueError("dimensions must be >= 1")


@dataclass(frozen=True)
class ModelSpec:
    """Immutable P-measure model; safe to share across threads.

    kernels[l][j] is the decay of the effect of component-j events on the
    intensity of component l. marks[j] and claims[j] are the laws attached
    to component-j events.
    """

    dims: Dimensions
    lambda_bar: np.ndarray
    kernels: tuple
    marks: tuple
    claims: tuple
    premium: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        d, dstar = self.dims.d, self.dims.dstar
        lam = _readonly(self.lambda_bar)
        prem = _readonly(self.premium)
        object.__setattr__(self, "lambda_bar", lam)
        object.__setattr__(self, "premium", prem)
        object.__setattr__(self, "kernels", tuple(tuple(row) for row in self.kernels))
        object.__setattr__(self, "marks", tuple(self.marks))
        object.__setattr__(self, "claims", tuple(self.claims))
        if lam.shape != (d,):
            raise ValueError(f"lambda_bar must have length d={d}")
        if np.any(lam < 0) or not np.any(lam > 0):
            raise ValueError("base rates must be nonnegative with at least one positive")
        if len(self.kernels) != d or any(len(row) != d for row in self.kernels):
            raise ValueError("kernels must form a d x d matrix")
        if len(self.marks) != d or any(m.dim != d for m in self.marks):
            raise ValueError(f"marks must be {d} laws of dimension d={d}")
        if len(self.claims) != d or any(c.dim != dstar for c in self.claims):
            raise ValueError(f"claims must be {d} laws of dimension dstar={dstar}")
        if prem.shape != (dstar,) or np.any(prem <= 0):
            raise ValueError("premium must be a positive vector of length dstar")

    # Derived matrices, cached because they appear in every transform call.

    @property
    def c_matrix(self) -> np.ndarray:
        """C[l, j] = L1 norm of kernels[l][j]."""
        if "c" not in self._cache:
            d = self.dims.d
            self._cache["c"] = _readonly(
                [[self.kernels[l][j].c for j in range(d)] for l in range(d)]
            )
        return self._cache["c"]

    @property
    def mark_mean_matrix(self) -> np.ndarray:
        """EB[m, j] = E[B_mj]."""
        if "eb" not in self._cache:
            self._cache["eb"] = _readonly(np.column_stack([m.mean() for m in self.marks]))
        return self._cache["eb"]

    @property
    def claim_mean_matrix(self) -> np.ndarray:
        """EU[i, j] = E[U_ij], shape dstar x d."""
        if "eu" not in self._cache:
            self._cache["eu"] = _readonly(np.column_stack([c.mean() for c in self.claims]))
        return self._cache["eu"]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def branching_matrix(spec: ModelSpec) -> np.ndarray:
    """H[m, j] = E[B_mj] * c_mj."""
    return spec.mark_mean_matrix * spec.c_matrix


def spectral_radius(
    matrix: np.ndarray, numerics: NumericsConfig = DEFAULT_NUMERICS
) -> float:
    """Perron root of a nonnegative matrix by shifted power iteration.

    The shift by I removes periodicity, so the iteration converges for any
    nonnegative matrix; the eigenvalue estimate must stabilize within the
    configured tolerance.
    """
    h = np.asarray(matrix, dtype=float)
    n = h.shape[0]
    if np.all(h == 0.0):
        return 0.0
    x = np.ones(n)
    est = np.inf
    stable = 0
    for _ in range(numerics.power_iter_max):
        y = h @ x + x
        norm = np.max(np.abs(y))
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(norm - est) <= numerics.power_iter_tol * max(1.0, norm):
            stable += 1
            if stable >= 3:
                return float(norm - 1.0)
        else:
            stable = 0
        est = norm
    raise NonConvergent("power iteration did not stabilize")


def validate_stability(spec: ModelSpec, numerics: NumericsConfig = DEFAULT_NUMERICS) -> float:
    """Return rho(H); raise Unstable if rho >= 1. Result is cached on the spec."""
    if "rho" not in spec._cache:
        spec._cache["rho"] = spectral_radius(branching_matrix(spec), numerics)
    rho = spec._cache["rho"]
    if rho >= 1.0:
        raise Unstable(rho)
    return rho


def mean_drift(spec: ModelSpec) -> np.ndarray:
    """LLN slope of Z(t)/t: E[U] (I - H)^{-1} lambda_bar."""
    validate_stability(spec)
    h = branching_matrix(spec)
    try:
        rates = np.linalg.solve(np.eye(spec.dims.d) - h, spec.lambda_bar)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - blocked by stability
        raise SingularSystem("I - H is singular despite rho(H) < 1") from exc
    return spec.claim_mean_matrix @ rates


def event_rate(spec: ModelSpec) -> np.ndarray:
    """LLN slope of N(t)/t: (I - H)^{-1} lambda_bar."""
    validate_stability(spec)
    h = branching_matrix(spec)
    return np.linalg.solve(np.eye(spec.dims.d) - h, spec.lambda_bar)


def validate_net_profit(spec: ModelSpec, i: int) -> bool:
    """True iff premium[i] strictly exceeds the claim drift of component i."""
    if not 0 <= i < spec.dims.dstar:
        raise IndexError(f"component {i} outside [0, {spec.dims.dstar})")
    return bool(spec.premium[i] > mean_drift(spec)[i])
