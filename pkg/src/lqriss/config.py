"""Numerical tolerances shared by every module."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    tol_abs: float = 1e-12
    tol_rel: float = 1e-10
    # strict margin on the spectral abscissa; the admissible set is open
    margin: float = 1e-9
    # reciprocal-condition floor for the vectorized Lyapunov system
    cond_cap: float = 1e14
    max_dim: int = 32

    def residual_ok(self, residual: float, scale: float) -> bool:
        return residual <= self.tol_abs + self.tol_rel * scale


DEFAULT_TOL = Tolerances()
