"""Likelihood-ratio accounting and the rare-event estimators.

All likelihood-ratio arithmetic is done in log space and exponentiated
once per run: deep-rarity levels involve ratios around 1e-12 built from
hundreds of per-event factors.

Runs are indexed and seeded individually (derive_run_seed), reduced in
ascending run order, so results are identical for any worker count.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    MaxRunsExceeded,
    MissingTiming,
    NonRareSubEvent,
    TimeCap,
)
from .model import ModelSpec, mean_drift
from .numerics import DEFAULT_NUMERICS, NumericsConfig
from .optimize import dominant_point, solve_theta_star
from .simulate import PathSample, compensator, derive_run_seed, simulate_hawkes, simulate_until_ruin
from .twist import TwistedModel, build_twisted_model


@dataclass(frozen=True)
class LikelihoodBreakdown:
    """log L_t split into its four structural terms."""

    log_compensator_term: float
    log_claim_tilt_term: float
    log_mark_ratio_term: float
    log_count_term: float

    @property
    def total(self) -> float:
        return (
            self.log_compensator_term
            + self.log_claim_tilt_term
            + self.log_mark_ratio_term
            + self.log_count_term
        )


@dataclass(frozen=True)
class StoppingRule:
    """Adaptive precision control on the relative standard error."""

    epsilon: float = 0.05
    batch: int = 100
    min_runs: int = 50
    max_runs: Optional[int] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.batch < 1 or self.min_runs < 1:
            raise ValueError("batch and min_runs must be >= 1")


@dataclass
class EstimatorResult:
    estimate: float
    variance: float
    runs: int
    rel_std_err: float
    ci95: tuple
    wall_time: float
    censored: int = 0
    hit_rate: Optional[float] = None
    contributions: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)


def log_likelihood_ratio(
    p_model: ModelSpec, q: TwistedModel, path: PathSample, t: float
) -> LikelihoodBreakdown:
    """log dP/dQ at time t along a path sampled under Q.

    The compensator term prices the Q-sampled events and marks with the
    P-primitives; the count term uses the cached fixed-point identity for
    log f so that it cancels the mark-mgf normalizers exactly.
    """
    d = p_model.dims.d
    f = q.f_at_twist
    comp = np.array([compensator(p_model, path, j, t) for j in range(d)])
    term_comp = float(np.dot(f - 1.0, comp))

    mask = path.times <= t
    z_t = path.claims[mask].sum(axis=0) if mask.any() else np.zeros(p_model.dims.dstar)
    term_claim = -float(np.dot(q.theta_star, z_t))

    counts = np.bincount(path.components[mask], minlength=d).astype(float)
    if mask.any():
        cross = float(np.sum(path.marks[mask] * q.cbarQ[:, path.components[mask]].T))
    else:
        cross = 0.0
    term_mark = -cross + float(np.dot(counts, q.log_mB_at_cbar))
    term_count = float(np.dot(counts, q.log_mU_at_twist - q.log_f_at_twist))
    return LikelihoodBreakdown(term_comp, term_claim, term_mark, term_count)


# ---------------------------------------------------------------------------
# Adaptive runner
# ---------------------------------------------------------------------------


def _eval_chunk(contribution, indices):
    return [contribution(k) for k in indices]


def _adaptive(contribution, rule: StoppingRule, workers: int = 1):
    """Run batches until the relative standard error target is met.

    `contribution(k)` must be a pure function of the run index returning
    (value, extra_count). Welford accumulation in run order keeps results
    independent of the worker count.
    """
    start = time.perf_counter()
    values = []
    extras = 0
    mean = 0.0
    m2 = 0.0
    n = 0
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while True:
            hi = n + rule.batch
            if rule.max_runs is not None:
                hi = min(hi, rule.max_runs)
            if hi <= n:
                break
            indices = range(n, hi)
            if pool is not None:
                splits = np.array_split(np.asarray(indices), workers)
                futures = [pool.submit(_eval_chunk, contribution, s.tolist()) for s in splits]
                results = [r for fut in futures for r in fut.result()]
            else:
                results = _eval_chunk(contribution, indices)
            for value, extra in results:
                n += 1
                delta = value - mean
                mean += delta / n
                m2 += delta * (value - mean)
                values.append(value)
                extras += extra
            if n >= rule.min_runs and mean > 0.0:
                rel = math.sqrt(m2 / n) / (mean * math.sqrt(n))
                if rel < rule.epsilon:
                    break
            if rule.max_runs is not None and n >= rule.max_runs:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    wall = time.perf_counter() - start
    variance = m2 / n if n else math.nan
    rel = (
        math.sqrt(variance) / (mean * math.sqrt(n))
        if n and mean > 0.0
        else math.inf
    )
    half = 1.96 * math.sqrt(variance / n) if n else math.nan
    result = EstimatorResult(
        estimate=mean,
        variance=variance,
        runs=n,
        rel_std_err=rel,
        ci95=(mean - half, mean + half),
        wall_time=wall,
        censored=extras,
        contributions=np.array(values),
    )
    capped = rule.max_runs is not None and n >= rule.max_runs
    if capped and mean > 0.0 and result.rel_std_err >= rule.epsilon:
        raise MaxRunsExceeded(result)
    return result


# ---------------------------------------------------------------------------
# Per-run contribution callables (module-level and picklable for pools)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _RuinIsRun:
    p_model: ModelSpec
    q: TwistedModel
    i: int
    u: float
    seed: int
    time_cap: float

    def __call__(self, k: int):
        tau, path = simulate_until_ruin(
            self.q.base, self.i, self.u, derive_run_seed(self.seed, k), self.time_cap
        )
        if tau is None:
            raise TimeCap(self.time_cap)
        lr = log_likelihood_ratio(self.p_model, self.q, path, tau)
        return math.exp(lr.total), 0


@dataclass(frozen=True)
class _RuinMcRun:
    spec: ModelSpec
    i: int
    u: float
    seed: int
    horizon_cap: float

    def __call__(self, k: int):
        tau, _ = simulate_until_ruin(
            self.spec, self.i, self.u, derive_run_seed(self.seed, k), self.horizon_cap
        )
        return (1.0, 0) if tau is not None else (0.0, 1)


@dataclass(frozen=True)
class _ExceedIsRun:
    p_model: ModelSpec
    q: TwistedModel
    a: np.ndarray
    active: np.ndarray
    t: float
    seed: int

    def __call__(self, k: int):
        path = simulate_hawkes(self.q.base, self.t, derive_run_seed(self.seed, k))
        hit = bool(
            np.all(path.compound[self.active] >= self.a[self.active] * self.t)
        )
        if not hit:
            return 0.0, 0
        lr = log_likelihood_ratio(self.p_model, self.q, path, self.t)
        return math.exp(lr.total), 1


@dataclass(frozen=True)
class _ExceedMcRun:
    spec: ModelSpec
    a: np.ndarray
    active: np.ndarray
    t: float
    seed: int

    def __call__(self, k: int):
        path = simulate_hawkes(self.spec, self.t, derive_run_seed(self.seed, k))
        hit = bool(
            np.all(path.compound[self.active] >= self.a[self.active] * self.t)
        )
        return (1.0, 1) if hit else (0.0, 0)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def estimate_ruin_is(
    spec: ModelSpec,
    i: int,
    u: float,
    rule: StoppingRule,
    seed: int,
    workers: int = 1,
    theta_star: Optional[float] = None,
    time_cap: Optional[float] = None,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
) -> EstimatorResult:
    """Importance-sampling ruin estimator under the component-i twist.

    Simulates under the theta*-twisted measure until ruin (certain there)
    and averages the likelihood ratio at the ruin time. Pathwise
    L <= exp(-theta* u), so is every estimate (Lundberg bound).
    """
    if theta_star is None:
        theta_star = solve_theta_star(spec, i, numerics)
    twist_vec = np.zeros(spec.dims.dstar)
    twist_vec[i] = theta_star
    q = build_twisted_model(spec, twist_vec, numerics)
    if time_cap is None:
        time_cap = 1e6 / max(theta_star, 1e-6)
    run = _RuinIsRun(spec, q, i, u, seed, time_cap)
    result = _adaptive(run, rule, workers)
    result.censored = 0
    result.meta.update(theta_star=theta_star, lundberg_bound=math.exp(-theta_star * u))
    return result


def estimate_ruin_mc(
    spec: ModelSpec,
    i: int,
    u: float,
    rule: StoppingRule,
    horizon_cap: float,
    seed: int,
    workers: int = 1,
) -> EstimatorResult:
    """Plain Monte Carlo ruin indicator up to a finite horizon.

    Runs that never ruin within the cap are censored and counted; the
    induced truncation bias is reported, not corrected. A capped run set
    with zero hits is a valid NoHits outcome (estimate 0, undefined
    relative error) rather than an error.
    """
    run = _RuinMcRun(spec, i, u, seed, horizon_cap)
    result = _adaptive(run, rule, workers)
    result.meta.update(horizon_cap=horizon_cap)
    return result


def estimate_exceedance_is(
    spec: ModelSpec,
    a,
    t: float,
    rule: StoppingRule,
    seed: int,
    workers: int = 1,
    active=None,
    twist=None,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
) -> EstimatorResult:
    """IS estimator of P(Z(t) >= a t componentwise) under the a*-twist."""
    a = np.asarray(a, dtype=float)
    mask = np.ones(spec.dims.dstar, dtype=bool) if active is None else np.asarray(active, bool)
    if twist is None:
        twist = dominant_point(spec, a, mask, numerics)
    q = build_twisted_model(spec, twist.theta, numerics)
    run = _ExceedIsRun(spec, q, a, mask, t, seed)
    result = _adaptive(run, rule, workers)
    result.hit_rate = result.censored / result.runs if result.runs else math.nan
    result.censored = 0
    result.meta.update(
        theta_twist=twist.theta, rate=twist.rate, a_star=twist.target,
        chernoff_bound=math.exp(-twist.rate * t),
    )
    return result


def estimate_exceedance_mc(
    spec: ModelSpec,
    a,
    t: float,
    rule: StoppingRule,
    seed: int,
    workers: int = 1,
    active=None,
) -> EstimatorResult:
    """Plain Monte Carlo exceedance indicator at horizon t."""
    a = np.asarray(a, dtype=float)
    mask = np.ones(spec.dims.dstar, dtype=bool) if active is None else np.asarray(active, bool)
    run = _ExceedMcRun(spec, a, mask, t, seed)
    result = _adaptive(run, rule, workers)
    result.hit_rate = result.censored / result.runs if result.runs else math.nan
    result.censored = 0
    return result


def estimate_union(
    spec: ModelSpec,
    a,
    t: float,
    rule: StoppingRule,
    seed: int,
    workers: int = 1,
    combine: str = "inclusion-exclusion",
    numerics: NumericsConfig = DEFAULT_NUMERICS,
) -> EstimatorResult:
    """P(Z_1(t) >= a_1 t or Z_2(t) >= a_2 t) from three separate estimates.

    Estimates the two marginals and the intersection separately with the
    efficient exceedance twist for each, on independent substreams, and
    combines P(A) + P(B) - P(A and B); sub-variances add (conservative).
    combine="sum" instead returns the plain P(A) + P(B) upper bound.
    """
    a = np.asarray(a, dtype=float)
    if spec.dims.dstar != 2:
        raise ValueError("union estimation is implemented for dstar = 2")
    if combine not in ("inclusion-exclusion", "sum"):
        raise ValueError("combine must be 'inclusion-exclusion' or 'sum'")
    drift = mean_drift(spec)
    if np.any(a <= drift):
        raise NonRareSubEvent(
            f"marginal targets {a} must exceed the drift {drift} componentwise"
        )
    seeds = np.random.SeedSequence(seed).generate_state(3, dtype=np.uint64)
    start = time.perf_counter()
    r_a = estimate_exceedance_is(
        spec, a, t, rule, int(seeds[0]), workers, active=[True, False], numerics=numerics
    )
    r_b = estimate_exceedance_is(
        spec, a, t, rule, int(seeds[1]), workers, active=[False, True], numerics=numerics
    )
    r_ab = estimate_exceedance_is(
        spec, a, t, rule, int(seeds[2]), workers, numerics=numerics
    )
    estimate = r_a.estimate + r_b.estimate
    if combine == "inclusion-exclusion":
        estimate -= r_ab.estimate
    var_mean = (
        r_a.variance / r_a.runs + r_b.variance / r_b.runs + r_ab.variance / r_ab.runs
    )
    half = 1.96 * math.sqrt(var_mean)
    rel = math.sqrt(var_mean) / estimate if estimate > 0 else math.inf
    return EstimatorResult(
        estimate=estimate,
        variance=r_a.variance + r_b.variance + r_ab.variance,
        runs=r_a.runs + r_b.runs + r_ab.runs,
        rel_std_err=rel,
        ci95=(estimate - half, estimate + half),
        wall_time=time.perf_counter() - start,
        meta={
            "marginal_1": r_a.estimate,
            "marginal_2": r_b.estimate,
            "intersection": r_ab.estimate,
        },
    )


def speedup_ratio(mc: EstimatorResult, is_: EstimatorResult) -> float:
    """kappa: MC wall time over IS wall time at equal precision target."""
    if mc.wall_time is None or is_.wall_time is None:
        raise MissingTiming("both results must carry wall times")
    return mc.wall_time / is_.wall_time
