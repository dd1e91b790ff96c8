"""Central numerical tolerances, overridable from the CLI."""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class NumericsConfig:
    fixed_point_tol: float = 1e-12
    fixed_point_max_iter: int = 10**6
    divergence_guard: float = 1e8
    newton_tol: float = 1e-10
    newton_max_iter: int = 200
    gradient_match_tol: float = 1e-8
    bisect_tol: float = 1e-10
    power_iter_tol: float = 1e-12
    power_iter_max: int = 10**5
    condition_limit: float = 1e12
    backtrack_max: int = 60
    quadrature_abs_tol: float = 1e-10

    def override(self, **kwargs) -> "NumericsConfig":
        return replace(self, **kwargs)


DEFAULT_NUMERICS = NumericsConfig()
