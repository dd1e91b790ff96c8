import dataclasses

import numpy as np
import pytest

from hawkesim import (
    DeterministicLaw,
    Dimensions,
    ExponentialKernel,
    ExponentialLaw,
    ModelSpec,
    TabulatedKernel,
    branching_matrix,
    event_rate,
    mean_drift,
    spectral_radius,
    validate_net_profit,
    validate_stability,
)
from hawkesim.config import load_spec, spec_from_dict, spec_to_dict
from hawkesim.errors import TiltOutOfDomain, Unstable

from conftest import make_univariate

# Hand-computed branching matrix for the bivariate experiment parameters:
# c_1 = 1/2, c_2 = 2/3, entrywise product with the mark means.
H_REF = np.array([[0.25, 0.125], [0.2, 0.4 * 2.0 / 3.0]])
# Perron root of H_REF by the 2x2 quadratic formula.
RHO_REF = 0.5 * (np.trace(H_REF) + np.sqrt(np.trace(H_REF) ** 2 - 4 * np.linalg.det(H_REF)))


def test_branching_matrix_bivariate(spec_rand, spec_det):
    assert np.allclose(branching_matrix(spec_rand), H_REF, atol=1e-12)
    assert np.allclose(branching_matrix(spec_det), H_REF, atol=1e-12)


def test_branching_matrix_zero_marks():
    spec = ModelSpec(
        dims=Dimensions(2, 1),
        lambda_bar=[1.0, 0.5],
        kernels=[[ExponentialKernel(1.0)] * 2] * 2,
        marks=[DeterministicLaw([0.0, 0.0])] * 2,
        claims=[DeterministicLaw([1.0])] * 2,
        premium=[5.0],
    )
    assert np.all(branching_matrix(spec) == 0.0)
    assert validate_stability(spec) == 0.0


def test_branching_matrix_unit_rate_boundary():
    # B = 1 and unit-rate exponential kernel: c = 1, so H = [1]
    spec = ModelSpec(
        dims=Dimensions(1, 1),
        lambda_bar=[1.0],
        kernels=[[ExponentialKernel(1.0)]],
        marks=[DeterministicLaw([1.0])],
        claims=[DeterministicLaw([1.0])],
        premium=[1.0],
    )
    assert branching_matrix(spec)[0, 0] == pytest.approx(1.0)
    with pytest.raises(Unstable) as err:
        validate_stability(spec)
    assert err.value.rho == pytest.approx(1.0, abs=1e-9)


def test_spectral_radius_bivariate(spec_rand):
    assert validate_stability(spec_rand) == pytest.approx(RHO_REF, abs=1e-9)
    assert RHO_REF == pytest.approx(0.4167, abs=1e-4)


def test_spectral_radius_periodic_matrix():
    # antidiagonal matrices defeat plain power iteration; the shifted
    # iteration must still find the Perron root sqrt(ab)
    m = np.array([[0.0, 0.3], [0.6, 0.0]])
    assert spectral_radius(m) == pytest.approx(np.sqrt(0.18), abs=1e-9)


def test_mean_drift_paper_values(spec_rand):
    drift = mean_drift(spec_rand)
    assert drift == pytest.approx([3.90, 4.76], abs=0.01)
    # exact linear-solve reference
    rates = np.linalg.solve(np.eye(2) - H_REF, [0.5, 0.5])
    assert event_rate(spec_rand) == pytest.approx(rates, abs=1e-10)


def test_mean_drift_zero_claims():
    spec = make_univariate(mu=0.5)
    spec = dataclasses.replace(spec, claims=(DeterministicLaw([0.0]),), _cache={})
    assert mean_drift(spec) == pytest.approx([0.0], abs=0.0)


def test_mean_drift_scalar():
    # H = 0.5, E U = 2, lambda = 0.5 -> drift = 2 * 0.5 / (1 - 0.5) = 2.0
    spec = make_univariate(mu=0.5, lam=0.5)
    spec = dataclasses.replace(spec, claims=(DeterministicLaw([2.0]),), _cache={})
    assert mean_drift(spec) == pytest.approx([2.0], abs=1e-12)


def test_net_profit(spec_rand):
    assert validate_net_profit(spec_rand, 0) is True
    drift = mean_drift(spec_rand)
    exact = dataclasses.replace(spec_rand, premium=drift.copy(), _cache={})
    assert validate_net_profit(exact, 0) is False  # strict inequality
    tiny = dataclasses.replace(spec_rand, premium=np.array([1e-9, 1e-9]), _cache={})
    assert validate_net_profit(tiny, 0) is False
    with pytest.raises(IndexError):
        validate_net_profit(spec_rand, 2)


def test_branching_monotone_in_mark_means(spec_rand):
    h0 = branching_matrix(spec_rand)
    k = 1.7
    scaled = dataclasses.replace(
        spec_rand,
        marks=tuple(ExponentialLaw(m.rates / k) for m in spec_rand.marks),
        _cache={},
    )
    assert np.allclose(branching_matrix(scaled), k * h0, atol=1e-12)


def test_stable_solve_nonnegative():
    rng = np.random.default_rng(42)
    for _ in range(20):
        d = rng.integers(1, 5)
        h = rng.uniform(0.0, 1.0, size=(d, d))
        h *= 0.9 / max(spectral_radius(h), 1e-9)
        lam = rng.uniform(0.1, 2.0, size=d)
        x = np.linalg.solve(np.eye(d) - h, lam)
        assert np.all(x >= -1e-12)


# ---------------------------------------------------------------------------
# Laws
# ---------------------------------------------------------------------------


def test_law_mgf_at_zero():
    laws = [DeterministicLaw([0.5, 0.25]), ExponentialLaw([2.0, 4.0])]
    for law in laws:
        assert law.mgf(np.zeros(2)) == pytest.approx(1.0, abs=0.0)
        assert law.log_mgf(np.zeros(2)) == pytest.approx(0.0, abs=0.0)


def test_law_means():
    assert DeterministicLaw([0.5, 0.25]).mean() == pytest.approx([0.5, 0.25])
    assert ExponentialLaw([2.0, 4.0]).mean() == pytest.approx([0.5, 0.25])


def test_exponential_tilt_is_rate_shift():
    law = ExponentialLaw([2.0, 4.0])
    tilted = law.tilt(np.array([0.5, 1.0]))
    assert tilted.rates == pytest.approx([1.5, 3.0])
    with pytest.raises(TiltOutOfDomain):
        law.tilt(np.array([2.5, 0.0]))


def test_deterministic_tilt_identity():
    law = DeterministicLaw([0.3, 0.4])
    assert law.tilt(np.array([10.0, -3.0])) is law


@pytest.mark.parametrize(
    "law", [DeterministicLaw([0.5, 0.25]), ExponentialLaw([2.0, 4.0])]
)
def test_tilt_mgf_identity(law):
    # m^Q(s) m(v) = m(s + v) for the tilt by v
    rng = np.random.default_rng(7)
    for _ in range(20):
        v = rng.uniform(0.0, 1.0, size=2)
        s = rng.uniform(-1.0, 0.8, size=2)
        tilted = law.tilt(v)
        assert tilted.mgf(s) * law.mgf(v) == pytest.approx(law.mgf(s + v), rel=1e-12)


def test_log_density_ratio_matches_explicit_densities():
    law = ExponentialLaw([2.0, 4.0])
    s = np.array([0.5, 1.5])
    tilted = law.tilt(s)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.exponential(size=2)
        log_p = np.sum(np.log(law.rates) - law.rates * x)
        log_q = np.sum(np.log(tilted.rates) - tilted.rates * x)
        assert law.log_density_ratio(x, s) == pytest.approx(log_p - log_q, rel=1e-12)


def test_exponential_mgf_pole():
    law = ExponentialLaw([2.0, 4.0])
    assert law.mgf(np.array([2.0, 0.0])) == np.inf
    assert not law.mgf_finite(np.array([2.0, 0.0]))
    assert law.mgf_grad(np.array([1.0, 1.0])) == pytest.approx(
        law.mgf([1.0, 1.0]) / (law.rates - [1.0, 1.0])
    )


def test_law_sampling_moments():
    rng = np.random.default_rng(11)
    law = ExponentialLaw([2.0, 4.0])
    draws = np.array([law.sample(rng) for _ in range(20000)])
    assert draws.mean(axis=0) == pytest.approx([0.5, 0.25], rel=0.05)
    det = DeterministicLaw([0.7, 0.1])
    assert np.all(det.sample(rng) == [0.7, 0.1])


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def test_exponential_kernel_norm_exact():
    k = ExponentialKernel(2.0)
    assert k.c == 0.5  # exactly 1/alpha
    t = np.array([0.0, 0.3, 2.0])
    assert k.partial_integral(t) == pytest.approx((1 - np.exp(-2 * t)) / 2, rel=1e-14)
    assert k.scaled(3.0).c == pytest.approx(1.5)


def test_tabulated_kernel_validation():
    times = np.linspace(0.0, 5.0, 51)
    values = np.exp(-times)
    from scipy.integrate import simpson

    c = float(simpson(values, x=times))
    k = TabulatedKernel(times, values, c)
    assert k.c == pytest.approx(c)
    with pytest.raises(ValueError):
        TabulatedKernel(times, values[::-1], c)  # increasing samples
    with pytest.raises(ValueError):
        TabulatedKernel(times, values, c * 1.5)  # inconsistent norm


def test_tabulated_partial_integral_matches_interpolant():
    times = np.linspace(0.0, 4.0, 41)
    values = 1.0 / (1.0 + times) ** 2
    from scipy.integrate import simpson

    k = TabulatedKernel(times, values, float(simpson(values, x=times)))
    # brute-force quadrature of the piecewise-linear interpolant
    for t in (0.37, 1.0, 2.345, 4.0, 7.0):
        grid = np.linspace(0.0, min(t, 4.0), 20001)
        ref = np.trapezoid(np.interp(grid, times, values), grid)
        assert k.partial_integral(t) == pytest.approx(ref, abs=1e-7)
    assert k.value(10.0) == 0.0  # zero beyond the grid


# ---------------------------------------------------------------------------
# Config round trip
# ---------------------------------------------------------------------------


def test_config_round_trip(spec_rand, tmp_path):
    blob = spec_to_dict(spec_rand)
    again = spec_from_dict(blob)
    assert np.allclose(again.lambda_bar, spec_rand.lambda_bar)
    assert np.allclose(branching_matrix(again), branching_matrix(spec_rand))
    path = tmp_path / "model.json"
    from hawkesim.config import dump_spec

    dump_spec(spec_rand, path)
    loaded = load_spec(path)
    assert np.allclose(mean_drift(loaded), mean_drift(spec_rand))


def test_model_shape_validation():
    with pytest.raises(ValueError):
        ModelSpec(
            dims=Dimensions(2, 1),
            lambda_bar=[0.0, 0.0],  # needs one positive entry
            kernels=[[ExponentialKernel(1.0)] * 2] * 2,
            marks=[DeterministicLaw([0.1, 0.1])] * 2,
            claims=[DeterministicLaw([1.0])] * 2,
            premium=[1.0],
        )
    with pytest.raises(ValueError):
        Dimensions(0, 1)
