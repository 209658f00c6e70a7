"""Perturbed gradient flows for continuous-time LQR policy optimization,
with numerical certification of small-disturbance ISS."""

__version__ = "0.1.0"

from .config import DEFAULT_TOL, Tolerances
from .model import (
    CostBundle,
    GainMatrix,
    OptimalTriple,
    PlantModel,
    WeightedInner,
    evaluate,
    gain,
    solve_are,
    solve_lyapunov,
    taylor_second_order,
    weighted_inner,
)

__all__ = [
    "__version__",
    "DEFAULT_TOL",
    "Tolerances",
    "CostBundle",
    "GainMatrix",
    "OptimalTriple",
    "PlantModel",
    "WeightedInner",
    "evaluate",
    "gain",
    "solve_are",
    "solve_lyapunov",
    "taylor_second_order",
    "weighted_inner",
]
