"""Zeroth-order gradient estimates built from exact cost evaluations.

The estimate error, scaled by the flow rate, is exactly the disturbance
``W = eta (grad J - grad_hat J)`` felt by a flow that follows the estimate
instead of the true gradient. Costs are exact Lyapunov solves, so the
estimator is the only source of error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NotStabilizing, ProbeRejected
from .flows import DisturbanceSignal, SignalKind
from .model import PlantModel, batch_cost_changes, evaluate, gain

# probes per batched Lyapunov solve; bounds peak memory at n = 6
_CHUNK = 4096


class Scheme(str, enum.Enum):
    TwoPointSphere = "TwoPointSphere"
    CoordinateFD = "CoordinateFD"


@dataclass(frozen=True)
class EstimatorConfig:
    radius: float
    num_samples: int = 1
    seed: int = 0
    scheme: Scheme = Scheme.TwoPointSphere
    max_retries: int = 50

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if int(self.num_samples) < 1:
            raise ValueError("num_samples must be at least 1")
        object.__setattr__(self, "scheme", Scheme(self.scheme))


def _sphere(rng, count, m, n):
    U = rng.normal(size=(count, m, n))
    return U / np.linalg.norm(U, axis=(1, 2), keepdims=True)


def _pair_costs(plant, bundle, D):
    # J(K + D) - J(K) and J(K - D) - J(K); the common J(K) cancels exactly
    plus = np.empty(len(D))
    minus = np.empty(len(D))
    for i in range(0, len(D), _CHUNK):
        sl = slice(i, i + _CHUNK)
        plus[sl] = batch_cost_changes(plant, bundle.K, D[sl], bundle)
        minus[sl] = batch_cost_changes(plant, bundle.K, -D[sl], bundle)
    return plus, minus


def estimate_gradient(plant: PlantModel, K, cfg: EstimatorConfig, rng=None, stats: dict | None = None):
    """Finite-difference estimate of the policy gradient at ``K``.

    ``TwoPointSphere`` averages ``N`` symmetric probes along directions
    uniform on the unit Frobenius sphere and rescales by ``m n / (2 r)``.
    Any probe pair with a non-stabilizing end is redrawn, at most
    ``cfg.max_retries`` times per sample. ``CoordinateFD`` is the
    deterministic central difference in each entry (``N`` is unused).

    ``stats``, if given, accumulates the number of rejected probes under
    the key ``"rejected"``.
    """
    g = gain(plant, K)
    if not g.stabilizing:
        raise NotStabilizing("cannot estimate the gradient at a non-stabilizing gain")
    K = g.K
    bundle = evaluate(plant, K)
    m, n = K.shape
    r = cfg.radius
    stats = {} if stats is None else stats
    stats.setdefault("rejected", 0)

    if cfg.scheme is Scheme.CoordinateFD:
        D = np.zeros((m * n, m, n))
        D.reshape(m * n, m * n)[:, :] = np.eye(m * n) * r
        plus, minus = _pair_costs(plant, bundle, D)
        if not np.all(np.isfinite(plus) & np.isfinite(minus)):
            stats["rejected"] += int(np.sum(~(np.isfinite(plus) & np.isfinite(minus))))
            raise ProbeRejected(f"coordinate probes of size {r:g} leave the stabilizing set")
        return ((plus - minus) / (2 * r)).reshape(m, n)

    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    N = int(cfg.num_samples)
    U = _sphere(rng, N, m, n)
    plus, minus = _pair_costs(plant, bundle, r * U)
    bad = ~(np.isfinite(plus) & np.isfinite(minus))
    tries = 0
    while bad.any():
        if tries >= cfg.max_retries:
            raise ProbeRejected(
                f"{int(bad.sum())} probes still non-stabilizing after {cfg.max_retries} redraws (r={r:g})")
        idx = np.flatnonzero(bad)
        stats["rejected"] += len(idx)
        U[idx] = _sphere(rng, len(idx), m, n)
        plus[idx], minus[idx] = _pair_costs(plant, bundle, r * U[idx])
        bad = ~(np.isfinite(plus) & np.isfinite(minus))
        tries += 1
    weights = (plus - minus) * (m * n / (2.0 * r * N))
    return np.tensordot(weights, U, axes=1)


def residual_signal(plant: PlantModel, cfg: EstimatorConfig, eta: float) -> DisturbanceSignal:
    """Disturbance equal to ``eta`` times the estimator error at the flow's
    current gain.

    The probe RNG for outer step ``k`` is seeded from ``(cfg.seed, k)``, so
    two runs with the same configuration see identical ``W`` sequences.
    Rejection counts land in ``signal.diagnostics``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    diag = {"estimator": {"scheme": cfg.scheme.value, "radius": cfg.radius,
                          "num_samples": int(cfg.num_samples), "seed": cfg.seed},
            "rejected_probes": 0}

    def source(K, index):
        stats = {"rejected": 0}
        rng = np.random.default_rng([cfg.seed, index])
        est = estimate_gradient(plant, K, cfg, rng=rng, stats=stats)
        diag["rejected_probes"] += stats["rejected"]
        return eta * (evaluate(plant, K).grad - est)

    return DisturbanceSignal(kind=SignalKind.EstimatorResidual, amplitude=0.0,
                             seed=cfg.seed, source=source, diagnostics=diag)
