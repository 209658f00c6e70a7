"""Closed-form bounds: the gradient-dominance function, its constants,
the natural-flow threshold and the structural lemmas about ``Y_K``, ``P_K``
and ``M_K``, each evaluated side by side at a given gain."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeArgument, UnknownLemma
from .model import CostBundle, PlantModel, evaluate, excess_cost, weighted_inner

SLACK_ABS = 1e-9
SLACK_REL = 1e-9


class Lemma(str, enum.Enum):
    EigminYK = "EigminYK"
    TraceYK = "TraceYK"
    Alpha4 = "Alpha4"
    MK = "MK"
    CJSPL = "CJSPL"
    NaturalIdentity = "NaturalIdentity"


ALL_LEMMAS = tuple(Lemma)


@dataclass(frozen=True)
class PlCertificate:
    a: float
    a_prime: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    b1: float
    b2: float
    b3: float
    eta: float
    eigmin_R: float
    norm_R: float
    # Tr(P*) + eigmin(Q) ||Y*||, offset in the Newton-flow threshold
    newton_offset: float

    @property
    def r_exceeds_one(self) -> bool:
        """Natural-flow rate argument needs ``eigmin(R) <= 1``; flag otherwise."""
        return self.eigmin_R > 1.0

    @property
    def xi1_sup(self) -> float:
        return math.sqrt(self.a1) / self.a4

    def xi2_sup(self, eta: float | None = None) -> float:
        eta = self.eta if eta is None else eta
        return math.sqrt(eta**2 * self.eigmin_R * self.b2 / 2.0)


def certificate(plant: PlantModel, eta: float = 1.0) -> PlCertificate:
    """All constants of the gradient-dominance and threshold functions."""
    opt = plant.optimal
    y = np.linalg.eigvalsh(opt.Y_star)
    y_min, y_max = float(y[0]), float(y[-1])
    r_min = float(np.linalg.eigvalsh(plant.R)[0])
    q_min = float(np.linalg.eigvalsh(plant.Q)[0])
    a = r_min * y_min / (2 * y_min + 2 * y_max)
    a_prime = 1.0 / (y_min + y_max)
    a1 = r_min * a
    a2 = r_min * a_prime
    a3 = float(np.linalg.norm(plant.closed_loop(opt.K_star), "fro"))
    a4 = float(np.linalg.norm(plant.B, 2))
    a5 = a2 * a4 / (math.sqrt(a1) * a3)
    a6 = a2 * a4**2 / (a1 * a3)
    tr_p = float(np.trace(opt.P_star))
    b1 = y_max * q_min / (2 * r_min) + tr_p
    b2 = q_min
    b3 = eta**2 * r_min * q_min
    return PlCertificate(
        a=a, a_prime=a_prime, a1=a1, a2=a2, a3=a3, a4=a4, a5=a5, a6=a6,
        b1=b1, b2=b2, b3=b3, eta=eta, eigmin_R=r_min,
        norm_R=float(np.linalg.eigvalsh(plant.R)[-1]),
        newton_offset=tr_p + q_min * y_max,
    )


def _nonneg(x, name):
    if x < 0:
        raise NegativeArgument(f"{name} must be nonnegative, got {x}")


def xi1(cert: PlCertificate, p: float) -> float:
    """Gradient-dominance function ``a5 p / (a3 + a6 p)``; saturates at
    ``sqrt(a1)/a4``."""
    _nonneg(p, "p")
    return cert.a5 * p / (cert.a3 + cert.a6 * p)


def xi2(cert: PlCertificate, v: float, eta: float | None = None, rate_R: float | None = None) -> float:
    """Natural-flow disturbance threshold ``sqrt(b3 v / (2 v + 2 b1))``.

    ``b3`` is recomputed for ``eta``. ``rate_R`` replaces ``eigmin(R)`` in
    ``b3``; the descent audit passes ``min(eigmin(R), 1)``.
    """
    _nonneg(v, "v")
    eta = cert.eta if eta is None else eta
    if eta <= 0:
        raise ValueError("eta must be positive")
    r = cert.eigmin_R if rate_R is None else rate_R
    b3 = eta**2 * r * cert.b2
    return math.sqrt(b3 * v / (2 * v + 2 * cert.b1))


def xi_newton(cert: PlCertificate, v: float, eta: float | None = None) -> float:
    """Disturbance threshold for the Newton flow Lyapunov function.

    Below it ``dV6/ds <= -(eta/4) V6``. Derived the same way as the
    natural-flow threshold, with ``||R||`` absorbing the ``R`` weighting of
    the Newton direction.
    """
    _nonneg(v, "v")
    eta = cert.eta if eta is None else eta
    return math.sqrt(eta**2 * cert.b2 * v / (4 * cert.norm_R * (v + cert.newton_offset)))


def alpha4(cert: PlCertificate, r: float) -> float:
    """Lower bound on ``Tr(P_K - P*)`` in terms of ``||K - K*||_F``."""
    _nonneg(r, "r")
    return cert.eigmin_R * r**2 / (2 * cert.a3 + 2 * cert.a4 * r)


@dataclass(frozen=True)
class BoundReport:
    """``lhs >= rhs`` is the claim; ``slack = lhs - rhs``.

    For two-sided checks ``slack`` is the smaller of the two margins.
    """

    lemma_id: str
    lhs: float
    rhs: float
    slack: float
    K_tested: np.ndarray
    distance: float = float("nan")
    two_sided: bool = False
    note: str = ""

    @property
    def tolerance(self) -> float:
        return SLACK_ABS + SLACK_REL * max(abs(self.lhs), abs(self.rhs))

    @property
    def passed(self) -> bool:
        if self.two_sided:
            return abs(self.slack) <= self.tolerance
        return self.slack >= -self.tolerance


def _report(lemma, lhs, rhs, K, dist, slack=None, **kw):
    lhs, rhs = float(lhs), float(rhs)
    return BoundReport(lemma, lhs, rhs, lhs - rhs if slack is None else float(slack), K, dist, **kw)


def check_lemma(plant: PlantModel, K, lemma_id, cert: PlCertificate | None = None,
                bundle: CostBundle | None = None) -> BoundReport:
    """Evaluate both sides of one structural inequality at ``K``."""
    try:
        lemma = Lemma(lemma_id)
    except ValueError:
        raise UnknownLemma(lemma_id) from None
    cert = certificate(plant) if cert is None else cert
    b = evaluate(plant, K) if bundle is None else bundle
    K = b.K
    opt = plant.optimal
    E = K - opt.K_star
    dist = float(np.linalg.norm(E))
    # Tr(P_K - P*) without the cancellation of two large traces
    excess = excess_cost(plant, b)
    R = plant.R

    if lemma is Lemma.EigminYK:
        lhs = np.linalg.eigvalsh(b.Y)[0]
        rhs = 1.0 / (2 * cert.a3 + 2 * cert.a4 * dist)
        return _report(lemma.value, lhs, rhs, K, dist)

    if lemma is Lemma.TraceYK:
        tr_y = np.trace(b.Y)
        lower = excess / (cert.norm_R * dist**2) if dist > 0 else 0.0
        upper = np.trace(b.P) / np.linalg.eigvalsh(plant.Q)[0]
        slack = min(tr_y - lower, upper - tr_y)
        return _report(lemma.value, tr_y, lower, K, dist, slack=slack,
                       note=f"upper={float(upper)!r}")

    if lemma is Lemma.Alpha4:
        return _report(lemma.value, excess, alpha4(cert, dist), K, dist)

    if lemma is Lemma.MK:
        lhs = np.trace(b.M_K)
        rhs = cert.a * dist**2 + cert.a_prime * excess
        return _report(lemma.value, lhs, rhs, K, dist)

    if lemma is Lemma.CJSPL:
        lhs = np.linalg.norm(b.grad)
        rhs = xi1(cert, max(excess, 0.0))
        return _report(lemma.value, lhs, rhs, K, dist)

    # NaturalIdentity: an equality
    Ys = opt.Y_star
    lhs = 2 * weighted_inner(E, R @ (K - b.K_prime), Ys)
    rhs = excess + weighted_inner(E, R @ E, Ys)
    return _report(lemma.value, lhs, rhs, K, dist, two_sided=True)


def check_all(plant: PlantModel, K, cert: PlCertificate | None = None, lemmas=ALL_LEMMAS) -> list:
    cert = certificate(plant) if cert is None else cert
    b = evaluate(plant, K)
    return [check_lemma(plant, b.K, lem, cert, b) for lem in lemmas]


CSV_FIELDS = ("lemma_id", "seed", "dist", "lhs", "rhs", "slack")


def certify_batch(plant: PlantModel, count: int, radii, seed: int, lemmas=ALL_LEMMAS) -> list:
    """Check every lemma on ``count`` sampled gains per radius.

    Returns ``(sample_seed, BoundReport)`` pairs; each sample draws from its
    own RNG stream spawned from ``seed``.
    """
    from .plants import sample_gain

    cert = certificate(plant)
    out = []
    root = np.random.SeedSequence(seed)
    for radius, child in zip(radii, root.spawn(len(radii))):
        for j, stream in enumerate(child.spawn(count)):
            g = sample_gain(plant, np.random.default_rng(stream), radius)
            sample_seed = int(stream.generate_state(1)[0])
            for rep in check_all(plant, g.K, cert, lemmas):
                out.append((sample_seed, rep))
    return out


def write_reports_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for seed, rep in rows:
            w.writerow([rep.lemma_id, seed, repr(rep.distance), repr(rep.lhs), repr(rep.rhs), repr(rep.slack)])
