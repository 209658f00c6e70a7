"""LQR problem data and exact linear algebra.

Everything here is a dense computation on small state dimensions. Single
Lyapunov equations are solved by Bartels-Stewart (real Schur form plus a
triangular Sylvester solve); batches of tiny equations, as used by the
gradient estimator, are vectorized into stacked Kronecker-sum systems.
The state dimension is capped (``Tolerances.max_dim``).

Conventions
-----------
``P_K`` solves ``(A-BK)^T P + P (A-BK) + Q + K^T R K = 0`` and
``Y_K`` solves ``(A-BK) Y + Y (A-BK)^T + I = 0``. The cost of a gain is
``J(K) = Tr(P_K)`` and its Euclidean gradient is ``2 (RK - B^T P_K) Y_K``.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .config import DEFAULT_TOL, Tolerances
from .errors import (
    DimensionMismatch,
    IllConditioned,
    InvalidPlant,
    NoStabilizingInit,
    NotHurwitz,
    NotStabilizing,
    Stalled,
)

__all__ = [
    "PlantModel",
    "OptimalTriple",
    "GainMatrix",
    "CostBundle",
    "WeightedInner",
    "LyapunovOperator",
    "spectral_abscissa",
    "solve_lyapunov",
    "solve_are",
    "are_residual",
    "gain",
    "evaluate",
    "cost",
    "batch_costs",
    "batch_gramians",
    "batch_cost_changes",
    "value_matrix",
    "excess_cost",
    "taylor_second_order",
    "weighted_inner",
    "plant_to_dict",
    "plant_from_dict",
    "load_plant",
    "save_plant",
]


def _sym(X):
    return 0.5 * (X + X.T)


def _as_matrix(X, name):
    X = np.array(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    if X.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D array, got shape {X.shape}")
    return X


def _fro(X) -> float:
    return math.sqrt(float(np.vdot(X, X)))


def spectral_abscissa(M: np.ndarray) -> float:
    """Largest real part of the eigenvalues of ``M``."""
    M = np.atleast_2d(M)
    if M.shape == (1, 1):
        return float(M[0, 0])
    return float(np.max(np.linalg.eigvals(M).real))


class LyapunovOperator:
    """Bartels-Stewart solver bound to one Hurwitz matrix.

    A single real Schur factorization ``A = Z T Z^T`` serves both equation
    sides: ``"transpose"`` solves ``A^T X + X A + RHS = 0`` and ``"plain"``
    solves ``A X + X A^T + RHS = 0``, each as a quasi-triangular Sylvester
    system (LAPACK ``trsyl``). The spectral abscissa is read off the Schur
    diagonal.

    Conditioning: minus the inverse of ``X -> A X + X A^T`` is a positive
    map, so its 2-norm equals the norm of its value at the identity, which
    is the Gramian ``Y``. ``rcond = 1 / (2 ||A||_F ||Y||_F)`` is therefore
    a cheap, slightly pessimistic reciprocal condition number; below
    ``1/cond_cap`` the operator is rejected as ill-conditioned.
    """

    def __init__(self, A_cl, tol: Tolerances = DEFAULT_TOL):
        A_cl = _as_matrix(A_cl, "A_cl")
        n = A_cl.shape[0]
        if A_cl.shape != (n, n):
            raise DimensionMismatch(f"A_cl must be square, got {A_cl.shape}")
        if n > tol.max_dim:
            raise DimensionMismatch(f"state dimension {n} exceeds cap {tol.max_dim}")
        if not np.all(np.isfinite(A_cl)):
            raise NotHurwitz("closed-loop matrix has non-finite entries")
        T, Z = linalg.schur(A_cl, output="real", check_finite=False)
        # standardized real Schur form: 2x2 blocks carry the real part on
        # both diagonal entries
        abscissa = float(np.max(np.diag(T)))
        if not abscissa < -tol.margin:
            raise NotHurwitz(f"spectral abscissa {abscissa:.3e} >= -{tol.margin:g}")
        self.A = A_cl
        self.n = n
        self.tol = tol
        self.abscissa = abscissa
        self._T, self._Z = T, Z
        self._norm_A = _fro(A_cl)
        self.gramian = self.solve(np.eye(n), "plain")
        rcond = 1.0 / (2.0 * self._norm_A * _fro(self.gramian))
        if rcond < 1.0 / tol.cond_cap:
            raise IllConditioned(f"Lyapunov operator reciprocal condition {rcond:.3e}")
        self.rcond = rcond

    def _apply(self, X, side):
        A = self.A
        if side == "transpose":
            return A.T @ X + X @ A
        return A @ X + X @ A.T

    def _raw(self, rhs, side):
        Z, T = self._Z, self._T
        F = Z.T @ rhs @ Z
        trana, tranb = ("T", "N") if side == "transpose" else ("N", "T")
        Xt, scale, info = lapack.dtrsyl(T, T, -F, trana=trana, tranb=tranb)
        if info < 0:
            raise IllConditioned(f"trsyl argument error {info}")
        if info == 1:
            raise IllConditioned("Lyapunov operator is numerically singular")
        return _sym(Z @ (Xt / scale) @ Z.T)

    def solve(self, rhs, side: str = "transpose") -> np.ndarray:
        if side not in ("transpose", "plain"):
            raise ValueError(f"unknown side {side!r}")
        n = self.n
        rhs = _as_matrix(rhs, "RHS")
        if rhs.shape != (n, n):
            raise DimensionMismatch(f"RHS shape {rhs.shape} does not match A_cl {self.A.shape}")
        X = self._raw(rhs, side)
        # normwise backward error of the computed solution
        scale = 1.0 + _fro(rhs) + 2.0 * self._norm_A * _fro(X)
        res = _fro(self._apply(X, side) + rhs)
        if not self.tol.residual_ok(res, scale):
            # one step of iterative refinement before giving up
            X = _sym(X + self._raw(self._apply(X, side) + rhs, side))
            res = _fro(self._apply(X, side) + rhs)
            if not self.tol.residual_ok(res, scale):
                raise IllConditioned(f"Lyapunov residual {res:.3e} above tolerance")
        return X


def solve_lyapunov(A_cl, rhs, side: str = "transpose", tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Solve a continuous Lyapunov equation with a Hurwitz coefficient.

    Parameters
    ----------
    A_cl : (n, n) array_like
        Hurwitz matrix.
    rhs : (n, n) array_like
        Symmetric constant term.
    side : {"transpose", "plain"}
        ``"transpose"`` solves ``A_cl^T X + X A_cl + rhs = 0``;
        ``"plain"`` solves ``A_cl X + X A_cl^T + rhs = 0``.

    Returns
    -------
    X : (n, n) ndarray
        The symmetrized solution.

    Raises
    ------
    NotHurwitz
        If the spectral abscissa of ``A_cl`` is not below ``-margin``.
    IllConditioned
        If the vectorized system is too badly conditioned to trust.
    """
    return LyapunovOperator(A_cl, tol).solve(rhs, side)


# ---------------------------------------------------------------------------
# problem data


@dataclass(frozen=True)
class OptimalTriple:
    K_star: np.ndarray
    P_star: np.ndarray
    Y_star: np.ndarray
    # Kleinman iterates: (cost Tr(P_Kk), relative ARE residual at P_Kk)
    history: tuple = ()


class PlantModel:
    """LQR data ``(A, B, Q, R)`` with a lazily solved optimum.

    The arrays are copied and made read-only. With ``validate=True`` (the
    default) the Riccati equation is solved during construction, which
    doubles as the stabilizability check.
    """

    def __init__(self, A, B, Q, R, *, tol: Tolerances = DEFAULT_TOL, validate: bool = True):
        A = _as_matrix(A, "A")
        B = _as_matrix(B, "B")
        Q = _as_matrix(Q, "Q")
        R = _as_matrix(R, "R")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {n}")
        m = B.shape[1]
        if Q.shape != (n, n):
            raise DimensionMismatch(f"Q must be {n}x{n}, got {Q.shape}")
        if R.shape != (m, m):
            raise DimensionMismatch(f"R must be {m}x{m}, got {R.shape}")
        if n > tol.max_dim:
            raise DimensionMismatch(f"state dimension {n} exceeds cap {tol.max_dim}")
        for name, S in (("Q", Q), ("R", R)):
            if not np.allclose(S, S.T, rtol=1e-12, atol=1e-14):
                raise InvalidPlant(f"{name} is not symmetric")
            lam = np.linalg.eigvalsh(_sym(S))[0]
            if not lam > 0:
                raise InvalidPlant(f"{name} is not positive definite (eigmin={lam:.3e})")
        self.A, self.B, self.Q, self.R = A, B, _sym(Q), _sym(R)
        for X in (self.A, self.B, self.Q, self.R):
            X.setflags(write=False)
        self.n, self.m = n, m
        self.tol = tol
        self.R_inv = np.linalg.inv(self.R)
        self.R_inv.setflags(write=False)
        self._optimal = None
        self._lock = threading.Lock()
        if validate:
            self.optimal

    @property
    def optimal(self) -> OptimalTriple:
        if self._optimal is None:
            with self._lock:
                if self._optimal is None:
                    self._optimal = solve_are(self)
        return self._optimal

    @property
    def K_star(self):
        return self.optimal.K_star

    @property
    def P_star(self):
        return self.optimal.P_star

    @property
    def Y_star(self):
        return self.optimal.Y_star

    def closed_loop(self, K):
        return self.A - self.B @ K

    def __repr__(self):
        return f"PlantModel(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class GainMatrix:
    K: np.ndarray
    spectral_abscissa: float
    stabilizing: bool


def gain(plant: PlantModel, K) -> GainMatrix:
    """Wrap ``K`` with its stabilization certificate."""
    if isinstance(K, GainMatrix):
        return K
    K = _as_matrix(K, "K")
    if K.shape != (plant.m, plant.n):
        raise DimensionMismatch(f"K must be {plant.m}x{plant.n}, got {K.shape}")
    sa = spectral_abscissa(plant.closed_loop(K))
    return GainMatrix(K, sa, bool(sa < -plant.tol.margin))


def _gain_array(plant, K):
    g = gain(plant, K)
    if not g.stabilizing:
        raise NotStabilizing(f"spectral abscissa of A-BK is {g.spectral_abscissa:.3e}")
    return g


@dataclass(frozen=True)
class CostBundle:
    K: np.ndarray
    P: np.ndarray
    Y: np.ndarray
    cost: float
    grad: np.ndarray
    nat_grad: np.ndarray
    newton_dir: np.ndarray
    K_prime: np.ndarray
    # n x n: (K - K')^T R (K - K')
    M_K: np.ndarray
    spectral_abscissa: float

    def check(self, plant: PlantModel, tol: float = 1e-9) -> None:
        """Assert the bundle invariants against the plant optimum."""
        P_star = plant.P_star
        scale = 1.0 + np.linalg.norm(P_star)
        if np.linalg.eigvalsh(self.P - P_star)[0] < -tol * scale:
            raise AssertionError("P_K - P* is not positive semidefinite")
        if np.linalg.eigvalsh(self.Y)[0] <= 0:
            raise AssertionError("Y_K is not positive definite")
        if self.cost < np.trace(P_star) - tol * scale:
            raise AssertionError("cost below optimum")


def evaluate(plant: PlantModel, K) -> CostBundle:
    """Everything derived from one pair of Lyapunov solves at a stabilizing gain."""
    g = _gain_array(plant, K)
    K = g.K
    A_cl = plant.closed_loop(K)
    op = LyapunovOperator(A_cl, plant.tol)
    P = op.solve(plant.Q + K.T @ plant.R @ K, "transpose")
    Y = op.gramian
    G = plant.R @ K - plant.B.T @ P
    nat = 2.0 * G
    K_prime = plant.R_inv @ plant.B.T @ P
    D = K - K_prime
    return CostBundle(
        K=K,
        P=P,
        Y=Y,
        cost=float(np.trace(P)),
        grad=nat @ Y,
        nat_grad=nat,
        newton_dir=-D,
        K_prime=K_prime,
        M_K=_sym(D.T @ plant.R @ D),
        spectral_abscissa=g.spectral_abscissa,
    )


def value_matrix(plant: PlantModel, K) -> np.ndarray:
    """``P_K`` alone (one Lyapunov solve)."""
    K = _gain_array(plant, K).K
    return solve_lyapunov(plant.closed_loop(K), plant.Q + K.T @ plant.R @ K, "transpose", plant.tol)


def cost(plant: PlantModel, K) -> float:
    return float(np.trace(value_matrix(plant, K)))


def _batch_solve(plant: PlantModel, Ks: np.ndarray, rhs: str):
    """Batched Lyapunov solves over a stack of gains, shape ``(N, m, n)``.

    ``rhs="cost"`` solves the transpose side for ``P_K``; ``rhs="gramian"``
    solves the plain side with identity constant term for ``Y_K``. Returns
    ``(X, ok)`` with ``X`` of shape ``(N, n, n)``, NaN where ``ok`` is False.
    """
    Ks = np.asarray(Ks, dtype=float)
    n = plant.n
    A_cl = plant.A[None] - plant.B[None] @ Ks
    X = np.full((len(Ks), n, n), np.nan)
    if n == 1:
        a = A_cl[:, 0, 0]
        ok = a < -plant.tol.margin
        if rhs == "cost":
            M = plant.Q[None] + np.swapaxes(Ks, 1, 2) @ plant.R[None] @ Ks
            X[ok, 0, 0] = -M[ok, 0, 0] / (2.0 * a[ok])
        else:
            X[ok, 0, 0] = -1.0 / (2.0 * a[ok])
        return X, ok
    ok = np.linalg.eigvals(A_cl).real.max(axis=1) < -plant.tol.margin
    if not ok.any():
        return X, ok
    Acl = A_cl[ok]
    eye = np.eye(n)
    N = len(Acl)
    L = (np.einsum("ij,kab->kiajb", eye, Acl) + np.einsum("kij,ab->kiajb", Acl, eye)).reshape(N, n * n, n * n)
    if rhs == "cost":
        Kok = Ks[ok]
        M = plant.Q[None] + np.swapaxes(Kok, 1, 2) @ plant.R[None] @ Kok
        L = np.swapaxes(L, 1, 2)
    else:
        M = np.broadcast_to(eye, (N, n, n))
    b = -M.transpose(0, 2, 1).reshape(N, n * n, 1)
    x = np.linalg.solve(L, b)[..., 0].reshape(N, n, n).transpose(0, 2, 1)
    X[ok] = 0.5 * (x + x.transpose(0, 2, 1))
    return X, ok


def batch_costs(plant: PlantModel, Ks: np.ndarray) -> np.ndarray:
    """Costs of a stack of gains, shape ``(N, m, n)``.

    Non-stabilizing gains get ``inf``.
    """
    P, ok = _batch_solve(plant, Ks, "cost")
    out = np.full(len(P), np.inf)
    out[ok] = np.trace(P[ok], axis1=1, axis2=2)
    return out


def batch_gramians(plant: PlantModel, Ks: np.ndarray):
    """``Y_K`` for a stack of gains; returns ``(Y, ok)``, NaN where not
    stabilizing."""
    return _batch_solve(plant, Ks, "gramian")


def batch_cost_changes(plant: PlantModel, K, Ds: np.ndarray, bundle: CostBundle | None = None) -> np.ndarray:
    """``J(K + D) - J(K)`` for a stack of perturbations ``D``.

    Uses ``Tr(Y_{K+D} (D^T R D + 2 D^T G))`` with ``G = RK - B^T P_K``,
    which only subtracts quantities of the size of the change, not of the
    cost. Non-stabilizing ``K + D`` gives ``inf``.
    """
    b = evaluate(plant, K) if bundle is None else bundle
    Ds = np.asarray(Ds, dtype=float)
    G = 0.5 * b.nat_grad
    Dt = np.swapaxes(Ds, 1, 2)
    M = Dt @ plant.R[None] @ Ds + Dt @ G[None] + np.swapaxes(Dt @ G[None], 1, 2)
    Y, ok = batch_gramians(plant, b.K[None] + Ds)
    out = np.full(len(Ds), np.inf)
    out[ok] = np.einsum("kij,kji->k", Y[ok], M[ok])
    return out


def excess_cost(plant: PlantModel, bundle: CostBundle) -> float:
    """``J(K) - J(K*)`` via ``<K-K*, R(K-K*)>_{Y_K}``.

    Equal to ``Tr(P_K - P*)`` but free of cancellation near the optimum,
    and nonnegative by construction.
    """
    E = bundle.K - plant.K_star
    return max(weighted_inner(E, plant.R @ E, bundle.Y), 0.0)


def taylor_second_order(plant: PlantModel, K, E) -> float:
    """Second-order model of ``J(K + E)`` around ``K``.

    ``J(K) + 2 Tr(E^T G Y_K) + Tr(E^T R E Y_K) + 2 Tr(E^T G dY)`` with
    ``G = RK - B^T P_K`` and ``dY`` the first-order change of ``Y_K``,
    which solves ``(A-BK) dY + dY (A-BK)^T - B E Y_K - Y_K E^T B^T = 0``.
    """
    g = _gain_array(plant, K)
    E = _as_matrix(E, "E")
    if E.shape != g.K.shape:
        raise DimensionMismatch(f"E must have shape {g.K.shape}, got {E.shape}")
    _gain_array(plant, g.K + E)
    b = evaluate(plant, g.K)
    G = 0.5 * b.nat_grad
    BEY = plant.B @ E @ b.Y
    dY = solve_lyapunov(plant.closed_loop(g.K), -(BEY + BEY.T), "plain", plant.tol)
    return float(
        b.cost
        + 2.0 * np.trace(E.T @ G @ b.Y)
        + np.trace(E.T @ plant.R @ E @ b.Y)
        + 2.0 * np.trace(E.T @ G @ dY)
    )


@dataclass(frozen=True)
class WeightedInner:
    """Inner product ``<K1, K2>_Y = Tr(K1^T K2 Y)``."""

    Y: np.ndarray

    def __call__(self, K1, K2) -> float:
        return weighted_inner(K1, K2, self.Y)

    def norm(self, K) -> float:
        return float(np.sqrt(max(self(K, K), 0.0)))


def weighted_inner(K1, K2, Y=None) -> float:
    K1 = _as_matrix(K1, "K1")
    K2 = _as_matrix(K2, "K2")
    if K1.shape != K2.shape:
        raise DimensionMismatch(f"{K1.shape} vs {K2.shape}")
    if Y is None:
        return float(np.sum(K1 * K2))
    Y = _as_matrix(Y, "Y")
    if Y.shape != (K1.shape[1], K1.shape[1]):
        raise DimensionMismatch(f"Y must be {K1.shape[1]}x{K1.shape[1]}, got {Y.shape}")
    # Tr(K1^T K2 Y) without forming the product
    return float(np.sum(K1 * (K2 @ Y.T)))


# ---------------------------------------------------------------------------
# Riccati equation


def are_residual(plant: PlantModel, P) -> np.ndarray:
    A, B = plant.A, plant.B
    return A.T @ P + P @ A + plant.Q - P @ B @ plant.R_inv @ B.T @ P


def _kleinman(A, plant, K, max_iters, history=None):
    """Policy iteration on ``(A, B, Q, R)``; ``A`` may be a shifted copy."""
    B, Q, R, R_inv, tol = plant.B, plant.Q, plant.R, plant.R_inv, plant.tol
    for _ in range(max_iters):
        try:
            P = solve_lyapunov(A - B @ K, Q + K.T @ R @ K, "transpose", tol)
        except (NotHurwitz, IllConditioned) as exc:
            raise Stalled(f"Kleinman iterate left the stabilizing set: {exc}") from exc
        res = A.T @ P + P @ A + Q - P @ B @ R_inv @ B.T @ P
        res = float(np.linalg.norm(res) / (1.0 + np.linalg.norm(P)))
        if history is not None:
            history.append((float(np.trace(P)), res))
        K_next = R_inv @ B.T @ P
        step = np.linalg.norm(K_next - K)
        K = K_next
        if res <= 1e-13 or (step <= 1e-14 * (1.0 + np.linalg.norm(K)) and res <= 1e-10):
            return K, res
    return K, res


def _heuristic_gain(plant: PlantModel, max_doublings: int = 40):
    """``c B^T S`` with ``S`` from the Lyapunov equation of ``A - beta I``,
    doubling ``c`` until the closed loop is Hurwitz. ``None`` on failure."""
    A, B, tol = plant.A, plant.B, plant.tol
    beta = spectral_abscissa(A) + 1.0
    S = solve_lyapunov(A - beta * np.eye(plant.n), np.eye(plant.n), "transpose", tol)
    base = B.T @ S
    c = 1.0 / max(np.linalg.norm(base, 2), 1e-300)
    for _ in range(max_doublings):
        K0 = c * base
        if gain(plant, K0).stabilizing:
            return K0
        c *= 2.0
    return None


def _shift_continuation(plant: PlantModel, max_shifts: int = 200) -> np.ndarray:
    """Stabilizing gain by solving Riccati equations for ``A - beta I``.

    ``K = 0`` stabilizes the first shift. The optimal gain for one shift
    keeps a closed-loop margin, so ``beta`` can drop by half of it while the
    gain stays stabilizing; repeat until the gain stabilizes ``A`` itself.
    """
    A, B, n = plant.A, plant.B, plant.n
    beta = max(spectral_abscissa(A), 0.0) + 1.0
    K = np.zeros((plant.m, n))
    for _ in range(max_shifts):
        A_beta = A - beta * np.eye(n)
        K, _ = _kleinman(A_beta, plant, K, 100)
        if gain(plant, K).stabilizing:
            return K
        margin = -spectral_abscissa(A_beta - B @ K)
        if not margin > 0:
            break
        beta = max(beta - 0.5 * margin, 0.0)
    raise NoStabilizingInit("shift continuation did not reach a stabilizing gain")


def _initial_gain(plant: PlantModel) -> np.ndarray:
    if spectral_abscissa(plant.A) < -plant.tol.margin:
        return np.zeros((plant.m, plant.n))
    K0 = _heuristic_gain(plant)
    if K0 is None:
        K0 = _shift_continuation(plant)
    return K0


def solve_are(plant: PlantModel, K0=None, max_iters: int = 100) -> OptimalTriple:
    """Solve the Riccati equation by Kleinman's policy iteration.

    Starting from a stabilizing ``K0``, iterate ``K <- R^{-1} B^T P_K``.
    Costs are nonincreasing and convergence is quadratic near the
    solution. The returned ``history`` holds ``(Tr(P_K), rel. residual)``
    for every iterate.

    Without ``K0``: zero if ``A`` is Hurwitz, else a scaled ``B^T S``
    guess, else a shift continuation. If the iteration breaks down from the
    cheap guess it is restarted from the continuation gain.
    """
    tol = plant.tol
    history = []
    if K0 is not None:
        K, res = _kleinman(plant.A, plant, _gain_array(plant, K0).K, max_iters, history)
    else:
        K0 = _initial_gain(plant)
        try:
            K, res = _kleinman(plant.A, plant, K0, max_iters, history)
        except Stalled:
            history = []
            K, res = _kleinman(plant.A, plant, _shift_continuation(plant), max_iters, history)
    if res > 1e-10:
        raise Stalled(f"ARE residual {res:.3e} after {max_iters} iterations")
    op = LyapunovOperator(plant.closed_loop(K), tol)
    P_star = op.solve(plant.Q + K.T @ plant.R @ K, "transpose")
    K_star = plant.R_inv @ plant.B.T @ P_star
    res = np.linalg.norm(are_residual(plant, P_star))
    if res > 1e-10 * (1.0 + np.linalg.norm(P_star)):
        raise Stalled(f"ARE residual {res:.3e} above tolerance")
    Y_star = solve_lyapunov(plant.closed_loop(K_star), np.eye(plant.n), "plain", tol)
    for X in (K_star, P_star, Y_star):
        X.setflags(write=False)
    return OptimalTriple(K_star, P_star, Y_star, tuple(history))


# ---------------------------------------------------------------------------
# JSON interchange


def plant_to_dict(plant: PlantModel) -> dict:
    return {k: getattr(plant, k).tolist() for k in ("A", "B", "Q", "R")}


def plant_from_dict(doc: dict, **kwargs) -> PlantModel:
    missing = {"A", "B", "Q", "R"} - set(doc)
    if missing:
        raise InvalidPlant(f"plant document missing {sorted(missing)}")
    extra = set(doc) - {"A", "B", "Q", "R"}
    if extra:
        raise InvalidPlant(f"unknown plant fields {sorted(extra)}")
    return PlantModel(doc["A"], doc["B"], doc["Q"], doc["R"], **kwargs)


def load_plant(path, **kwargs) -> PlantModel:
    with open(path) as fh:
        return plant_from_dict(json.load(fh), **kwargs)


def save_plant(plant: PlantModel, path) -> None:
    Path(path).write_text(json.dumps(plant_to_dict(plant), indent=2) + "\n")
