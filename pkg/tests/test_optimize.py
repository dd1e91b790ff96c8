import dataclasses
import math

import numpy as np
import pytest

from hawkesim import (
    cumulant_gradient,
    dominant_point,
    legendre_transform,
    limiting_cumulant,
    marginal_cumulants,
    mean_drift,
    solve_theta_star,
)
from hawkesim.errors import HeavyTailOrNoRoot, InfeasibleRareEvent, NetProfitViolated
from hawkesim.oracle import grid_legendre

from conftest import make_univariate


def test_theta_star_paper_values(spec_det, spec_rand):
    assert solve_theta_star(spec_det, 0) == pytest.approx(0.097, abs=1e-3)
    assert solve_theta_star(spec_rand, 0) == pytest.approx(0.082, abs=1e-3)


def test_theta_star_bracket(spec_rand):
    ts = solve_theta_star(spec_rand, 0)
    assert marginal_cumulants(spec_rand, 0, ts - 1e-6)[1] < 0
    assert marginal_cumulants(spec_rand, 0, ts + 1e-6)[1] > 0


def test_theta_star_monotone_in_premium(spec_rand):
    values = []
    for r in (8.0, 16.0, 32.0):
        spec = dataclasses.replace(spec_rand, premium=np.array([r, r]), _cache={})
        try:
            values.append(solve_theta_star(spec, 0))
        except HeavyTailOrNoRoot:
            # still counts as "larger" end of the scale: the root left the
            # domain because Psi is pushed down everywhere
            values.append(np.inf)
    assert values[0] < values[1] <= values[2]


def test_theta_star_net_profit_guard(spec_rand):
    broke = dataclasses.replace(spec_rand, premium=np.array([1.0, 1.0]), _cache={})
    with pytest.raises(NetProfitViolated):
        solve_theta_star(broke, 0)


def test_theta_star_heavy_tail(spec_rand):
    rich = dataclasses.replace(spec_rand, premium=np.array([50.0, 50.0]), _cache={})
    with pytest.raises(HeavyTailOrNoRoot):
        solve_theta_star(rich, 0)


def test_section5_identity(spec_rand):
    # t* = 1/(Lambda'(theta*) - r) > 0 and Lambda*(r + 1/t*) = theta*/t*
    ts = solve_theta_star(spec_rand, 0)
    slope = cumulant_gradient(spec_rand, np.array([ts, 0.0]))[0]
    t_star = 1.0 / (slope - 8.0)
    assert t_star > 0
    sol = dominant_point(
        spec_rand, np.array([8.0 + 1.0 / t_star, 0.0]), active=[True, False]
    )
    assert sol.rate == pytest.approx(ts / t_star, abs=1e-6)


def test_legendre_at_drift(spec_rand):
    drift = mean_drift(spec_rand)
    sol = legendre_transform(spec_rand, drift)
    assert np.allclose(sol.theta, 0.0, atol=1e-9)
    assert sol.rate == pytest.approx(0.0, abs=1e-10)


def test_legendre_paper_values(spec_rand):
    sol = legendre_transform(spec_rand, np.array([10.0, 12.0]))
    assert sol.theta == pytest.approx([0.0376, 0.0256], abs=5e-4)
    assert sol.rate == pytest.approx(0.276, abs=1e-3)
    assert np.allclose(
        cumulant_gradient(spec_rand, sol.theta), [10.0, 12.0], atol=1e-8
    )


def test_legendre_univariate_grid_oracle(spec_uni):
    x = 3.0  # above the drift lambda/(1 - mu) = 2

    def marginal(theta):
        return marginal_cumulants(spec_uni, 0, theta)[0]

    ref = grid_legendre(marginal, x, theta_max=0.17, step=1e-5)
    sol = dominant_point(spec_uni, np.array([x]))
    assert sol.rate == pytest.approx(ref, abs=1e-5 * x)


def test_duality_invariant(spec_rand):
    a = np.array([10.0, 12.0])
    sol = dominant_point(spec_rand, a)
    lam = limiting_cumulant(spec_rand, sol.theta).value
    assert sol.rate == pytest.approx(float(sol.theta @ sol.target) - lam, abs=1e-12)
    rng = np.random.default_rng(8)
    tried = 0
    while tried < 100:
        theta = rng.uniform(-0.05, 0.04, size=2)
        ev = limiting_cumulant(spec_rand, theta)
        if not ev.in_domain:
            continue
        assert sol.rate >= float(theta @ sol.target) - ev.value - 1e-9
        tried += 1


def test_dominant_point_corner(spec_rand):
    a = np.array([10.0, 12.0])
    sol = dominant_point(spec_rand, a)
    assert np.all(sol.theta > 0)
    assert sol.target == pytest.approx(a)  # a* = a when the corner twist is positive
    assert sol.active_set == (0, 1)
    grad = cumulant_gradient(spec_rand, sol.theta)
    assert np.all(grad >= a - 1e-8)


def test_dominant_point_pinned(spec_rand):
    drift = mean_drift(spec_rand)
    a = np.array([10.0, drift[1] - 1.0])
    sol = dominant_point(spec_rand, a)
    assert sol.theta[1] == 0.0
    assert sol.theta[0] > 0
    assert sol.target[1] > a[1]  # a*_2 is the gradient at the pinned twist
    marginal = dominant_point(spec_rand, np.array([10.0, 0.0]), active=[True, False])
    assert sol.rate == pytest.approx(marginal.rate, abs=1e-9)
    grad = cumulant_gradient(spec_rand, sol.theta)
    assert np.all(grad >= a - 1e-8)


def test_dominant_point_infeasible(spec_rand):
    drift = mean_drift(spec_rand)
    with pytest.raises(InfeasibleRareEvent):
        dominant_point(spec_rand, drift - 0.1)


def test_theta_nonnegative_for_exceedance(spec_rand):
    rng = np.random.default_rng(9)
    drift = mean_drift(spec_rand)
    for _ in range(10):
        a = drift + rng.uniform(0.1, 8.0, size=2)
        sol = dominant_point(spec_rand, a)
        assert np.all(sol.theta >= 0.0)
        assert sol.rate >= 0.0
