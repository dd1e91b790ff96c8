import numpy as np
import pytest

from hawkesim import (
    DeterministicLaw,
    Dimensions,
    ExponentialKernel,
    ExponentialLaw,
    ModelSpec,
    load_bundled,
)


@pytest.fixture(scope="session")
def spec_rand():
    """Bivariate model with exponential marks and claims (random-mark experiments)."""
    return load_bundled("bivariate_rand")


@pytest.fixture(scope="session")
def spec_det():
    """Bivariate model with point-mass marks (deterministic-mark experiments)."""
    return load_bundled("bivariate_det")


def make_univariate(mu=0.5, lam=1.0, alpha=2.0, premium=3.0, unit_claims=True):
    """d = dstar = 1 model with constant mark mu*alpha/alpha... i.e. H = mu.

    Mark is deterministic b with b * (1/alpha) = mu, so the branching mean
    is exactly mu; claims are unit point masses unless disabled.
    """
    b = mu * alpha
    claims = DeterministicLaw([1.0]) if unit_claims else ExponentialLaw([1.0])
    return ModelSpec(
        dims=Dimensions(1, 1),
        lambda_bar=[lam],
        kernels=[[ExponentialKernel(alpha)]],
        marks=[DeterministicLaw([b])],
        claims=[claims],
        premium=[premium],
    )


@pytest.fixture(scope="session")
def spec_uni():
    """Univariate unit-mark unit-claim model with branching mean 0.5."""
    return make_univariate(mu=0.5)


@pytest.fixture(scope="session")
def spec_symmetric():
    """Fully symmetric bivariate model for symmetry checks."""
    k = ExponentialKernel(2.0)
    return ModelSpec(
        dims=Dimensions(2, 2),
        lambda_bar=[0.5, 0.5],
        kernels=[[k, k], [k, k]],
        marks=[ExponentialLaw([4.0, 4.0]), ExponentialLaw([4.0, 4.0])],
        claims=[ExponentialLaw([0.5, 0.5]), ExponentialLaw([0.5, 0.5])],
        premium=[8.0, 8.0],
    )
