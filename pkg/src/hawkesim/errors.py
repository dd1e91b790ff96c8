"""Exception types raised across the toolkit.

Domain exits that root-finders probe deliberately (cluster PGF divergence,
claim mgf poles) are signaled with exceptions here but converted to values
by the callers that need to probe them.
"""
from __future__ import annotations


class HawkesError(Exception):
    """Base class for all toolkit errors."""


class ModelInvalid(HawkesError):
    """Model primitives fail a well-formedness check."""


class Unstable(ModelInvalid):
    """Spectral radius of the branching matrix is >= 1."""

    def __init__(self, rho: float):
        self.rho = rho
        super().__init__(f"branching matrix has spectral radius {rho:.6g} >= 1")


class NonConvergent(HawkesError):
    """Power iteration stalled on a pathological matrix."""


class SingularSystem(HawkesError):
    """A linear solve that should succeed under stability failed."""


class OutOfMgfDomain(HawkesError):
    """A claim mgf is infinite for the requested argument."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"claim mgf infinite for columns {self.columns}")


class OutsideDomain(HawkesError):
    """The cluster-size PGF diverges at the requested point."""

    def __init__(self, z, iterations: int = 0):
        self.z = z
        self.iterations = iterations
        super().__init__(f"cluster PGF diverges at z={z} ({iterations} iterations)")


class NearSingular(HawkesError):
    """The PGF Jacobian system is ill-conditioned (close to the domain boundary)."""


class NoConvergence(HawkesError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3g})")


class MarkMgfDomainExceeded(HawkesError):
    """Newton probing left the mark-mgf domain even after backtracking."""


class HeavyTailOrNoRoot(HawkesError):
    """The risk cumulant has no positive zero on the in-domain ray."""


class NetProfitViolated(HawkesError):
    """Premium rate does not exceed the claim drift."""


class NoInteriorMaximizer(HawkesError):
    """Legendre ascent ran into the cumulant domain boundary without stationarity."""


class InfeasibleRareEvent(HawkesError):
    """The exceedance target lies below the LLN drift in every component."""


class NonRareSubEvent(HawkesError):
    """A union sub-event is not rare, so the decomposition degenerates."""


class TiltOutOfDomain(HawkesError):
    """Exponential tilt argument leaves the mgf domain of a mark or claim law."""

    def __init__(self, which: str, component: int):
        self.which = which
        self.component = component
        super().__init__(f"tilt leaves mgf domain: {which} law, component {component}")


class ExplosionGuard(HawkesError):
    """Event count exceeded the configured cap; the model is misconfigured."""


class TimeCap(HawkesError):
    """A ruin simulation exceeded its time cap where it must not (twisted runs)."""

    def __init__(self, cap: float):
        self.cap = cap
        super().__init__(f"simulation exceeded time cap {cap:g}")


class MaxRunsExceeded(HawkesError):
    """The stopping rule's run cap was hit before the precision target."""

    def __init__(self, result):
        self.result = result
        super().__init__(
            f"run cap {result.runs} hit at relative std error {result.rel_std_err:.3g}"
        )


class MissingTiming(HawkesError):
    """Speedup ratio requested but a result carries no wall time."""


class OracleDomainError(HawkesError):
    """An oracle was evaluated outside its stated domain."""


class TooCloseToBoundary(OracleDomainError):
    """Series oracle argument within 1% of the PGF domain boundary."""


class StencilOutOfDomain(OracleDomainError):
    """A finite-difference stencil straddles a domain wall."""
