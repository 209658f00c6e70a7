"""Empirical checks of the small-disturbance ISS behaviour.

This module provides envelope fitting over disturbance amplitudes,
pointwise audits of the dissipation inequalities along recorded
trajectories, the scalar counterexample whose trajectories escape above a
threshold, and the saturating gradient-dominance example.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundReport, certificate, xi1, xi2, xi_newton
from .errors import InvalidWBar, OutOfDomain
from .flows import DisturbanceSignal, Exit, FlowKind, SignalKind, Trajectory, drift, integrate
from .model import PlantModel, evaluate, excess_cost, weighted_inner
from .plants import one_dim, sample_gain

# ---------------------------------------------------------------- envelopes


@dataclass
class IssEnvelope:
    """Asymptotic excess-cost level per disturbance amplitude.

    ``gamma[i]`` is the largest, over seeds, tail mean of ``V3`` at
    ``amplitudes[i]``; ``spread[i]`` is the seed-to-seed range there.
    Amplitudes at which any run left the stabilizing set are listed in
    ``exceeded`` and end the range over which monotonicity is claimed.
    """

    amplitudes: list
    gamma: list
    spread: list
    per_seed: list
    exits: list
    exceeded: list
    monotone: bool
    passing: int
    transient_ok: list = field(default_factory=list)
    kind: str = ""
    eta: float = 1.0
    config: dict = field(default_factory=dict)

    @property
    def gamma0(self) -> float:
        """``gamma`` at amplitude zero, or NaN if zero is not on the grid."""
        for d, g in zip(self.amplitudes, self.gamma):
            if d == 0:
                return g
        return float("nan")

    @property
    def d_hat(self) -> float:
        """Largest grid amplitude such that every run up to it stayed
        admissible (``nan`` if even the first one failed)."""
        return self.amplitudes[self.passing - 1] if self.passing else float("nan")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "eta": self.eta,
            "amplitudes": list(self.amplitudes),
            "gamma": list(self.gamma),
            "spread": list(self.spread),
            "per_seed": [list(x) for x in self.per_seed],
            "exits": [list(x) for x in self.exits],
            "exceeded": list(self.exceeded),
            "monotone": self.monotone,
            "d_hat": self.d_hat,
            "transient_ok": list(self.transient_ok),
            "config": self.config,
        }


def _envelope_monotone(gamma, spread, upto, factor=2.0):
    for i in range(1, upto):
        tol = factor * max(spread[i - 1], spread[i])
        if gamma[i] < gamma[i - 1] - tol:
            return False
    return True


def fit_envelope(plant: PlantModel, kind, eta: float, amplitudes, seeds, s_max: float,
                 h: float = 0.05, signal_kind=SignalKind.ConstantMatrix, init_radius: float = 0.5,
                 record_every: int = 10, spread_factor: float = 2.0) -> IssEnvelope:
    """Sweep disturbance amplitudes and fit the empirical gain ``gamma``.

    For every seed a stabilizing initial gain is drawn within
    ``init_radius`` of the optimum and a disturbance of ``signal_kind`` is
    built from the same seed, so amplitudes share initial conditions.
    Monotonicity of ``gamma`` is judged with tolerance ``spread_factor``
    times the larger neighbouring seed spread.
    """
    amplitudes = [float(d) for d in amplitudes]
    seeds = list(seeds)
    if any(b < a for a, b in zip(amplitudes, amplitudes[1:])):
        raise ValueError("amplitudes must be sorted ascending")
    if not amplitudes:
        raise ValueError("amplitude grid is empty")
    if len(seeds) < 1:
        raise ValueError("at least one seed is required")
    kind = FlowKind(kind)
    signal_kind = SignalKind(signal_kind)
    inits = {sd: sample_gain(plant, np.random.default_rng([sd, 1]), init_radius).K for sd in seeds}

    gamma, spread, per_seed, exits, exceeded, transient = [], [], [], [], [], []
    for d in amplitudes:
        levels, ex, tr_ok = [], [], []
        for sd in seeds:
            sig = DisturbanceSignal(kind=signal_kind if d > 0 else SignalKind.Zero, amplitude=d, seed=sd)
            traj = integrate(plant, inits[sd], kind, eta, sig, s_max=s_max, h=h, record_every=record_every)
            lvl = traj.tail_mean("V3")
            levels.append(lvl)
            ex.append(traj.exit.value)
            v3 = traj.V3
            tr_ok.append(bool(v3.max() <= v3[0] + max(lvl, 0.0) + 1e-10 * (1 + v3[0])))
        gamma.append(float(max(levels)))
        spread.append(float(max(levels) - min(levels)))
        per_seed.append(levels)
        exits.append(ex)
        transient.append(all(tr_ok))
        if Exit.LeftAdmissibleSet.value in ex:
            exceeded.append(d)
    first_bad = next((i for i, d in enumerate(amplitudes) if d in exceeded), len(amplitudes))
    monotone = _envelope_monotone(gamma, spread, first_bad, spread_factor)
    config = {"amplitudes": amplitudes, "seeds": seeds, "s_max": s_max, "h": h,
              "signal_kind": signal_kind.value, "init_radius": init_radius}
    return IssEnvelope(amplitudes, gamma, spread, per_seed, exits, exceeded, monotone, first_bad,
                       transient, kind.value, eta, config)


def find_disturbance_threshold(plant: PlantModel, kind, eta: float, amplitudes, seeds, s_max: float,
                               **kwargs) -> tuple:
    """Sweep for the largest amplitude ``d_hat`` on the grid below which
    every seed stays admissible. Returns ``(d_hat, gamma(d_hat), envelope)``;
    ``d_hat`` is NaN if the smallest amplitude already fails."""
    env = fit_envelope(plant, kind, eta, amplitudes, seeds, s_max, **kwargs)
    g = env.gamma[env.passing - 1] if env.passing else float("nan")
    return env.d_hat, g, env


# ------------------------------------------------------------------- audits


def _threshold(cert, kind, eta, v3, v5, v6, rate_R):
    if kind is FlowKind.Standard:
        return eta / math.sqrt(2.0) * xi1(cert, max(v3, 0.0))
    if kind is FlowKind.Natural:
        return xi2(cert, max(v5, 0.0), eta=eta, rate_R=rate_R)
    return xi_newton(cert, max(v6, 0.0), eta=eta)


def audit_point(plant: PlantModel, K, W, kind, eta: float, cert=None) -> BoundReport:
    """Dissipation inequality at one gain and disturbance value.

    ``rhs`` is the exact time derivative of the flow's Lyapunov function
    along ``drift + W``; ``lhs`` is the bound it must stay under:

    * Standard: ``-(eta/2) xi1(V3)^2 + |W|^2 / (2 eta)``
    * Natural: ``-(eta lam / 2) V5`` with ``lam = min(eigmin(R), 1)``
    * Newton: ``-(eta / 4) V6``
    """
    kind = FlowKind(kind)
    cert = certificate(plant, eta) if cert is None else cert
    b = evaluate(plant, K)
    K = b.K
    W = np.zeros_like(K) if W is None else np.asarray(W, dtype=float)
    E = K - plant.K_star
    Ys = plant.Y_star
    R = plant.R
    v3 = excess_cost(plant, b)
    dist = float(np.linalg.norm(E))
    dK = drift(plant, K, kind, eta) + W
    if kind is FlowKind.Standard:
        actual = float(np.sum(b.grad * dK))
        bound = -0.5 * eta * xi1(cert, max(v3, 0.0)) ** 2 + float(np.sum(W * W)) / (2 * eta)
        return BoundReport("Descent.Standard", bound, actual, bound - actual, K, dist)
    if kind is FlowKind.Natural:
        lam = min(cert.eigmin_R, 1.0)
        v5 = v3 + 0.5 * weighted_inner(E, E, Ys)
        actual = float(np.sum((b.grad + E @ Ys) * dK))
        bound = -0.5 * eta * lam * v5
        return BoundReport("Descent.Natural", bound, actual, bound - actual, K, dist)
    v6 = v3 + 0.5 * weighted_inner(E, R @ E, Ys)
    actual = float(np.sum((b.grad + R @ E @ Ys) * dK))
    bound = -0.25 * eta * v6
    return BoundReport("Descent.Newton", bound, actual, bound - actual, K, dist)


def descent_inequality_audit(trajectory: Trajectory, plant: PlantModel, kind=None, eta=None) -> list:
    """Audit every recorded sample whose ``|W|_F`` is within the flow's
    disturbance threshold. Samples above it are skipped, not failed."""
    kind = FlowKind(trajectory.kind if kind is None else kind)
    eta = trajectory.eta if eta is None else eta
    cert = certificate(plant, eta)
    rate_R = min(cert.eigmin_R, 1.0)
    out = []
    for smp in trajectory.samples:
        thr = _threshold(cert, kind, eta, smp.V3, smp.V5, smp.V6, rate_R)
        if smp.W_norm <= thr:
            out.append(audit_point(plant, smp.K, smp.W, kind, eta, cert))
    return out


# ------------------------------------------------------------ counterexample


@dataclass
class CounterexampleRun:
    t: np.ndarray
    chi: np.ndarray
    w_bar: float
    chi0: float
    diverged: bool
    threshold: float
    settled: bool = False

    def to_rows(self):
        return list(zip(self.t.tolist(), self.chi.tolist()))


def escape_threshold(w_bar: float) -> float:
    """Initial state above which ``dchi/dt = -chi/(1+chi^2) + w_bar``
    escapes: the larger root of ``w chi^2 - chi + w = 0``."""
    if not 0 < w_bar < 0.5:
        raise InvalidWBar(f"threshold needs 0 < w_bar < 0.5, got {w_bar}")
    return (1.0 + math.sqrt(1.0 - 4.0 * w_bar**2)) / (2.0 * w_bar)


def run_counterexample(w_bar: float, chi0: float, t_max: float = 1e8, h0: float = 0.01,
                       bound: float = 1e6, max_steps: int = 2_000_000) -> CounterexampleRun:
    """Integrate the scalar system with constant input ``w_bar``.

    RK4 with step ``h0 * max(1, |chi|)``: far out the field is nearly
    constant, and escape to ``bound`` takes flow time of order
    ``bound / w_bar``, so a fixed step would need billions of steps.
    Runs stop early once the state sits on a stable equilibrium
    (``settled``), since it can then never leave.
    ``w_bar = 0`` is accepted as the unforced reference case.
    """
    if w_bar == 0:
        thr = math.inf
    else:
        thr = escape_threshold(w_bar)
    if t_max <= 0:
        raise ValueError("t_max must be positive")

    def f(x):
        return -x / (1.0 + x * x) + w_bar

    def fprime(x):
        return (x * x - 1.0) / (1.0 + x * x) ** 2

    t, x = 0.0, float(chi0)
    ts, xs = [t], [x]
    diverged = settled = False
    for _ in range(max_steps):
        if t >= t_max:
            break
        h = min(h0 * max(1.0, abs(x)), t_max - t)
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        ts.append(t)
        xs.append(x)
        if abs(x) > bound:
            diverged = True
            break
        if abs(f(x)) < 1e-13 and fprime(x) < 0:
            settled = True
            break
    return CounterexampleRun(np.array(ts), np.array(xs), float(w_bar), float(chi0), diverged, thr, settled)


# ---------------------------------------------------------------- saturation


def saturation_demo(z_grid) -> list:
    """Rows ``(z, |J'(z)|, xi1(J(z) - J*))`` on the scalar plant.

    The gradient tends to 1/2 as ``z`` grows while ``xi1`` saturates at
    ``sqrt(a1)/a4 = 1/2`` from below, so no unbounded comparison function
    can dominate the gradient.
    """
    plant = one_dim()
    cert = certificate(plant)
    rows = []
    for z in z_grid:
        z = float(z)
        if not z > 1.0:
            raise OutOfDomain(f"the scalar plant is stabilized only by z > 1, got {z}")
        b = evaluate(plant, np.array([[z]]))
        rows.append((z, abs(float(b.grad[0, 0])), xi1(cert, max(excess_cost(plant, b), 0.0))))
    return rows
