"""Perturbed gradient flows on the stabilizing set.

Three drifts are supported, each with an additive disturbance ``W``::

    Standard  dK/ds = -eta * 2 (RK - B^T P_K) Y_K + W
    Natural   dK/ds = -eta * 2 (RK - B^T P_K)     + W
    Newton    dK/ds = -eta * (K - R^{-1} B^T P_K) + W

Integration is fixed-step classical RK4 with ``W`` held constant over each
outer step. If any stage leaves the stabilizing set the step is retried as
2, 4, ... 2**10 equal sub-steps before the run is declared to have left.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditioned, LeftAdmissibleSet, NotHurwitz, NotStabilizing, ProbeRejected
from .model import LyapunovOperator, PlantModel, evaluate, excess_cost, gain, weighted_inner


class FlowKind(str, enum.Enum):
    Standard = "Standard"
    Natural = "Natural"
    Newton = "Newton"


class SignalKind(str, enum.Enum):
    Zero = "Zero"
    ConstantMatrix = "ConstantMatrix"
    SinusoidalMatrix = "SinusoidalMatrix"
    BoundedNoise = "BoundedNoise"
    EstimatorResidual = "EstimatorResidual"


@dataclass
class DisturbanceSignal:
    """Bounded matrix-valued disturbance ``W(s)``.

    Every sample is clamped to Frobenius norm ``amplitude``. ``direction``
    fixes the matrix pattern of the constant and sinusoidal kinds; when it
    is ``None`` a normalized Gaussian pattern is drawn from ``seed``.
    Noise is drawn per outer step index from ``(seed, index)`` so a run is
    reproducible regardless of how steps are subdivided.

    ``EstimatorResidual`` signals carry a ``source(K, index)`` callable
    (see :func:`lqriss.estimator.residual_signal`).
    """

    kind: SignalKind = SignalKind.Zero
    amplitude: float = 0.0
    seed: int = 0
    direction: np.ndarray | None = None
    omega: float = 1.0
    phase: float = 0.0
    source: object = None
    realized_sup: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = SignalKind(self.kind)
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")

    def _pattern(self, shape):
        if self.direction is not None:
            D = np.asarray(self.direction, dtype=float).reshape(shape)
        else:
            D = np.random.default_rng([self.seed, 0x5EED]).normal(size=shape)
        nrm = np.linalg.norm(D)
        return D / nrm if nrm > 0 else D

    def sample(self, index: int, s: float, K: np.ndarray) -> np.ndarray:
        shape = K.shape
        kind = self.kind
        if kind is SignalKind.Zero or (self.amplitude == 0 and kind is not SignalKind.EstimatorResidual):
            W = np.zeros(shape)
        elif kind is SignalKind.ConstantMatrix:
            W = self.amplitude * self._pattern(shape)
        elif kind is SignalKind.SinusoidalMatrix:
            W = self.amplitude * math.sin(self.omega * s + self.phase) * self._pattern(shape)
        elif kind is SignalKind.BoundedNoise:
            rng = np.random.default_rng([self.seed, index])
            U = rng.uniform(-1.0, 1.0, size=shape)
            nrm = np.linalg.norm(U)
            W = U * (rng.uniform(0.0, self.amplitude) / nrm) if nrm > 0 else U
        else:
            W = np.asarray(self.source(K, index), dtype=float)
        nrm = float(np.linalg.norm(W))
        if self.kind is not SignalKind.EstimatorResidual or self.amplitude > 0:
            if nrm > self.amplitude:
                W = W * (self.amplitude / nrm)
                nrm = self.amplitude
        self.realized_sup = max(self.realized_sup, nrm)
        return W

    def describe(self) -> dict:
        d = {"kind": self.kind.value, "amplitude": self.amplitude, "seed": self.seed}
        if self.kind is SignalKind.SinusoidalMatrix:
            d.update(omega=self.omega, phase=self.phase)
        if self.direction is not None:
            d["direction"] = np.asarray(self.direction).tolist()
        return d


def drift(plant: PlantModel, K: np.ndarray, kind: FlowKind, eta: float) -> np.ndarray:
    """Unperturbed right-hand side at a stabilizing ``K``.

    Natural and Newton drifts need only ``P_K`` (one Lyapunov solve).
    """
    kind = FlowKind(kind)
    A_cl = plant.closed_loop(K)
    op = LyapunovOperator(A_cl, plant.tol)
    P = op.solve(plant.Q + K.T @ plant.R @ K, "transpose")
    if kind is FlowKind.Newton:
        return -eta * (K - plant.R_inv @ plant.B.T @ P)
    G = 2.0 * (plant.R @ K - plant.B.T @ P)
    if kind is FlowKind.Natural:
        return -eta * G
    Y = op.gramian
    return -eta * G @ Y


def _rk4(plant, K, kind, eta, W, h):
    def f(X):
        try:
            return drift(plant, X, kind, eta) + W
        except NotHurwitz:
            raise LeftAdmissibleSet("stage left the stabilizing set") from None

    k1 = f(K)
    k2 = f(K + 0.5 * h * k1)
    k3 = f(K + 0.5 * h * k2)
    k4 = f(K + h * k3)
    K_new = K + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not gain(plant, K_new).stabilizing:
        raise LeftAdmissibleSet("step left the stabilizing set")
    return K_new


def step(plant: PlantModel, K, kind, eta: float, W_now, h: float, max_halvings: int = 10):
    """Advance ``K`` by flow time ``h``.

    Returns the new gain as a :class:`GainMatrix`. Raises
    ``LeftAdmissibleSet`` if even ``2**max_halvings`` sub-steps fail.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    g = gain(plant, K)
    if not g.stabilizing:
        raise NotStabilizing("initial gain is not stabilizing")
    W = np.zeros_like(g.K) if W_now is None else np.asarray(W_now, dtype=float)
    kind = FlowKind(kind)
    for level in range(max_halvings + 1):
        pieces = 2**level
        sub = h / pieces
        X = g.K
        try:
            for _ in range(pieces):
                X = _rk4(plant, X, kind, eta, W, sub)
            return gain(plant, X)
        except (LeftAdmissibleSet, NotHurwitz, IllConditioned):
            continue
    raise LeftAdmissibleSet(f"left the stabilizing set after {max_halvings} halvings")


class Exit(str, enum.Enum):
    Converged = "Converged"
    MaxTime = "MaxTime"
    LeftAdmissibleSet = "LeftAdmissibleSet"


@dataclass(frozen=True)
class Sample:
    s: float
    K: np.ndarray
    W: np.ndarray
    V3: float
    V4: float
    V5: float
    V6: float
    grad_norm: float
    W_norm: float
    abscissa: float


def lyapunov_values(plant: PlantModel, K) -> dict:
    """``V3`` (excess cost), ``V4``, ``V5 = V3 + V4`` and ``V6`` at ``K``."""
    b = evaluate(plant, K)
    E = b.K - plant.K_star
    Ys = plant.Y_star
    v3 = excess_cost(plant, b)
    v4 = 0.5 * weighted_inner(E, E, Ys)
    v6 = v3 + 0.5 * weighted_inner(E, plant.R @ E, Ys)
    return {"bundle": b, "V3": v3, "V4": v4, "V5": v3 + v4, "V6": v6}


def _sample(plant, s, K, W):
    v = lyapunov_values(plant, K)
    b = v["bundle"]
    return Sample(s, b.K, W, v["V3"], v["V4"], v["V5"], v["V6"],
                  float(np.linalg.norm(b.grad)), float(np.linalg.norm(W)), b.spectral_abscissa)


CSV_HEADER = ("s", "V3", "V4", "V5", "V6", "grad_norm", "W_norm", "abscissa")


@dataclass
class Trajectory:
    samples: list
    exit: Exit
    kind: FlowKind
    eta: float
    h: float
    s_max: float
    signal: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(x, name) for x in self.samples])

    @property
    def s(self):
        return self.column("s")

    @property
    def V3(self):
        return self.column("V3")

    @property
    def final(self) -> Sample:
        return self.samples[-1]

    def tail_mean(self, name: str = "V3", fraction: float = 0.1) -> float:
        """Mean over samples with ``s >= (1 - fraction) * s_max``; the last
        sample if the run stopped before that window."""
        s = self.s
        vals = self.column(name)
        mask = s >= (1.0 - fraction) * self.s_max
        return float(vals[mask].mean()) if mask.any() else float(vals[-1])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for x in self.samples:
                w.writerow([repr(float(getattr(x, c))) for c in CSV_HEADER])

    def sidecar(self) -> dict:
        return {
            "exit": self.exit.value,
            "kind": self.kind.value,
            "eta": self.eta,
            "h": self.h,
            "s_max": self.s_max,
            "samples": len(self.samples),
            "signal": self.signal,
            "diagnostics": self.diagnostics,
        }

    def write_sidecar(self, path, extra: dict | None = None) -> None:
        doc = self.sidecar()
        if extra:
            doc.update(extra)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def integrate(plant: PlantModel, K0, kind, eta: float, signal: DisturbanceSignal | None = None,
              s_max: float = 50.0, h: float = 0.01, record_every: int = 10,
              converge_tol: float = 1e-14) -> Trajectory:
    """Integrate one flow from ``K0`` up to flow time ``s_max``.

    Every ``record_every`` outer steps the Lyapunov values are recomputed
    from exact solves. The run ends early as ``Converged`` when the
    disturbance is identically zero and ``V3 <= converge_tol``, and as
    ``LeftAdmissibleSet`` if a step cannot be completed inside the
    stabilizing set; that outcome is reported, never raised.
    """
    if s_max <= 0 or h <= 0:
        raise ValueError("s_max and h must be positive")
    kind = FlowKind(kind)
    signal = DisturbanceSignal() if signal is None else signal
    g = gain(plant, K0)
    if not g.stabilizing:
        raise NotStabilizing("K0 is not stabilizing")
    quiet = signal.kind is SignalKind.Zero or (
        signal.amplitude == 0 and signal.kind is not SignalKind.EstimatorResidual)
    n_steps = int(math.ceil(s_max / h - 1e-9))
    K = g.K
    samples = []
    exit_status = Exit.MaxTime
    notes = {}
    for k in range(n_steps + 1):
        s = min(k * h, s_max)
        try:
            W = signal.sample(k, s, K)
        except ProbeRejected as exc:
            # the estimator could not probe around K: reported like an exit
            exit_status = Exit.LeftAdmissibleSet
            notes["probe_rejected"] = str(exc)
            if not samples or samples[-1].s != s:
                samples.append(_sample(plant, s, K, np.zeros_like(K)))
            break
        if k % record_every == 0 or k == n_steps:
            smp = _sample(plant, s, K, W)
            samples.append(smp)
            if quiet and smp.V3 <= converge_tol:
                exit_status = Exit.Converged
                break
        if k == n_steps:
            break
        dt = min(h, s_max - s)
        try:
            K = step(plant, K, kind, eta, W, dt).K
        except LeftAdmissibleSet:
            exit_status = Exit.LeftAdmissibleSet
            if samples[-1].s != s:
                samples.append(_sample(plant, s, K, W))
            break
    diagnostics = {"realized_W_sup": signal.realized_sup}
    diagnostics.update(signal.diagnostics)
    diagnostics.update(notes)
    return Trajectory(samples, exit_status, kind, eta, h, s_max, signal.describe(), diagnostics)
