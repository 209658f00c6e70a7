"""Builtin plants and random stabilizing-gain sampling."""

from __future__ import annotations

import numpy as np

from .errors import NotStabilizing, NumericalError
from .model import PlantModel, gain


def one_dim() -> PlantModel:
    """Scalar plant with ``A = B = Q = R = 1``; stabilizing set is ``K > 1``."""
    return PlantModel(1.0, 1.0, 1.0, 1.0)


def _spd(rng, k, lo, hi):
    U, _ = np.linalg.qr(rng.normal(size=(k, k)))
    return (U * rng.uniform(lo, hi, size=k)) @ U.T


def random_plant(n: int, m: int, seed: int, max_cost: float = 1e3, max_draws: int = 100) -> PlantModel:
    """Random stabilizable, well-scaled plant.

    ``A`` has i.i.d. normal entries scaled by ``1/sqrt(n)`` (so it is often
    unstable), ``B`` is normal, ``Q`` has spectrum in ``[0.5, 2]`` and ``R``
    in ``[0.2, 1]`` so that ``eigmin(R) <= 1``. Draws whose optimal cost
    ``Tr(P*)`` exceeds ``max_cost`` are discarded: nearly uncontrollable
    pairs make every identity check lose digits to conditioning.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        A = rng.normal(size=(n, n)) / np.sqrt(n)
        B = rng.normal(size=(n, m))
        Q = _spd(rng, n, 0.5, 2.0)
        R = _spd(rng, m, 0.2, 1.0)
        try:
            plant = PlantModel(A, B, Q, R)
        except NumericalError:
            continue
        if np.trace(plant.P_star) <= max_cost:
            return plant
    raise NumericalError(f"no well-scaled plant in {max_draws} draws (n={n}, m={m}, seed={seed})")


def sample_gain(plant: PlantModel, rng: np.random.Generator, radius: float, max_tries: int = 1000):
    """Draw ``K* + E`` with ``||E||_F`` uniform in ``[0, radius]``, rejecting
    non-stabilizing draws."""
    for _ in range(max_tries):
        E = rng.normal(size=(plant.m, plant.n))
        E *= rng.uniform(0.0, radius) / np.linalg.norm(E)
        g = gain(plant, plant.K_star + E)
        if g.stabilizing:
            return g
    raise NotStabilizing(f"no stabilizing sample within radius {radius} after {max_tries} tries")


def sample_gains(plant: PlantModel, count: int, radius: float, seed: int) -> list:
    """``count`` stabilizing gains, each from its own child RNG stream."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [sample_gain(plant, np.random.default_rng(c), radius) for c in children]
