import json
import math

import numpy as np
import pytest
from scipy import linalg

from lqriss import PlantModel, Tolerances, evaluate, gain, solve_are, solve_lyapunov, taylor_second_order
from lqriss.errors import (DimensionMismatch, IllConditioned, InvalidPlant, NotHurwitz, NotStabilizing,
                           NumericalError)
from lqriss.model import (LyapunovOperator, WeightedInner, are_residual, batch_cost_changes, batch_costs,
                          batch_gramians, cost, excess_cost,
                          load_plant, plant_from_dict, plant_to_dict, save_plant, spectral_abscissa,
                          value_matrix, weighted_inner)
from lqriss.plants import random_plant, sample_gain, sample_gains

SQ2 = math.sqrt(2.0)


def J1(k):
    return (1 + k * k) / (2 * (k - 1))


def dJ1(k):
    return (k * k - 2 * k - 1) / (2 * (k - 1) ** 2)


# ---- Lyapunov solver against scipy's Bartels-Stewart


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_lyapunov_matches_scipy(n, rng):
    A = rng.normal(size=(n, n)) - (abs(np.linalg.eigvals(rng.normal(size=(n, n)))).max() + 3) * np.eye(n)
    M = rng.normal(size=(n, n))
    C = M @ M.T + np.eye(n)
    X = solve_lyapunov(A, C, "transpose")
    ref = linalg.solve_continuous_lyapunov(A.T, -C)
    assert np.allclose(X, ref, atol=1e-12, rtol=1e-10)
    Y = solve_lyapunov(A, C, "plain")
    assert np.allclose(Y, linalg.solve_continuous_lyapunov(A, -C), atol=1e-12, rtol=1e-10)
    assert np.array_equal(X, X.T)


def test_lyapunov_rejects_unstable():
    with pytest.raises(NotHurwitz):
        solve_lyapunov(np.eye(2), np.eye(2))
    # eigenvalue inside the margin still counts as not Hurwitz
    with pytest.raises(NotHurwitz):
        solve_lyapunov(np.array([[-1e-12]]), np.eye(1))


def test_lyapunov_ill_conditioned():
    tol = Tolerances(cond_cap=10.0)
    with pytest.raises(IllConditioned):
        LyapunovOperator(np.diag([-1.0, -1e-3]), tol)


def test_lyapunov_shape_errors():
    with pytest.raises(DimensionMismatch):
        solve_lyapunov(-np.eye(2), np.eye(3))
    with pytest.raises(DimensionMismatch):
        solve_lyapunov(-np.ones((2, 3)), np.eye(2))
    with pytest.raises(ValueError):
        LyapunovOperator(-np.eye(2)).solve(np.eye(2), side="sideways")


def test_dimension_cap():
    with pytest.raises(DimensionMismatch):
        LyapunovOperator(-np.eye(33))


def test_spectral_abscissa():
    assert spectral_abscissa(np.array([[-2.0]])) == -2.0
    assert spectral_abscissa(np.array([[0.0, 1.0], [-1.0, -0.5]])) == pytest.approx(-0.25)


# ---- scalar plant closed forms


def test_scalar_optimum(scalar):
    assert scalar.K_star[0, 0] == pytest.approx(1 + SQ2, abs=1e-12)
    assert scalar.P_star[0, 0] == pytest.approx(1 + SQ2, abs=1e-12)
    assert scalar.Y_star[0, 0] == pytest.approx(SQ2 / 4, abs=1e-12)


@pytest.mark.parametrize("k", [1.01, 1.5, 2.0, 3.0, 10.0, 1e3])
def test_scalar_cost_and_gradient(scalar, k):
    b = evaluate(scalar, [[k]])
    assert b.cost == pytest.approx(J1(k), rel=1e-12)
    assert b.grad[0, 0] == pytest.approx(dJ1(k), rel=1e-10, abs=1e-12)
    assert b.Y[0, 0] == pytest.approx(1 / (2 * (k - 1)), rel=1e-12)
    assert cost(scalar, [[k]]) == b.cost
    assert value_matrix(scalar, [[k]])[0, 0] == pytest.approx(J1(k), rel=1e-12)


def test_scalar_not_stabilizing(scalar):
    assert not gain(scalar, [[1.0]]).stabilizing
    assert gain(scalar, [[1.5]]).stabilizing
    with pytest.raises(NotStabilizing):
        evaluate(scalar, [[0.5]])


# ---- Riccati solver


@pytest.mark.parametrize("n,m,seed", [(2, 1, 0), (4, 2, 7), (6, 3, 11), (5, 1, 9)])
def test_are_matches_scipy(n, m, seed):
    p = random_plant(n, m, seed)
    ref = linalg.solve_continuous_are(p.A, p.B, p.Q, p.R)
    assert np.allclose(p.P_star, ref, rtol=1e-8, atol=1e-9)
    assert np.linalg.norm(are_residual(p, p.P_star)) <= 1e-9 * (1 + np.linalg.norm(p.P_star))
    assert gain(p, p.K_star).stabilizing


def test_are_quadratic_convergence(plant42):
    hist = plant42.optimal.history
    res = [r for _, r in hist if r > 1e-13]
    # once in the basin, log residual at least roughly doubles per step
    tail = [math.log10(r) for r in res[-3:]]
    if len(tail) == 3 and tail[0] < -2:
        assert tail[2] - tail[1] <= 1.5 * (tail[1] - tail[0])
    costs = [c for c, _ in hist]
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(costs, costs[1:]))


def test_are_from_given_gain(plant42):
    K0 = plant42.K_star + 0.05
    opt = solve_are(plant42, K0=K0)
    assert np.allclose(opt.K_star, plant42.K_star, atol=1e-9)


def test_are_rejects_nonstabilizing_init(scalar):
    with pytest.raises(NumericalError):
        solve_are(scalar, K0=[[0.0]])


def test_unstabilizable_plant():
    # uncontrollable unstable mode
    with pytest.raises(NumericalError):
        PlantModel(np.diag([1.0, -1.0]), [[0.0], [1.0]], np.eye(2), [[1.0]])


# ---- plant validation and I/O


def test_plant_validation():
    with pytest.raises(DimensionMismatch):
        PlantModel(np.eye(2), np.ones((3, 1)), np.eye(2), [[1.0]])
    with pytest.raises(DimensionMismatch):
        PlantModel(np.eye(2), np.ones((2, 1)), np.eye(3), [[1.0]])
    with pytest.raises(InvalidPlant):
        PlantModel(-np.eye(2), np.ones((2, 1)), [[1.0, 2.0], [0.0, 1.0]], [[1.0]])
    with pytest.raises(InvalidPlant):
        PlantModel(-np.eye(2), np.ones((2, 1)), np.eye(2), [[0.0]])


def test_plant_arrays_read_only(plant42):
    with pytest.raises(ValueError):
        plant42.A[0, 0] = 1.0


def test_plant_json_roundtrip(plant42, tmp_path):
    path = tmp_path / "p.json"
    save_plant(plant42, path)
    q = load_plant(path)
    assert np.array_equal(q.A, plant42.A) and np.array_equal(q.R, plant42.R)
    doc = json.loads(path.read_text())
    doc["extra"] = 1
    with pytest.raises(InvalidPlant):
        plant_from_dict(doc)
    with pytest.raises(InvalidPlant):
        plant_from_dict({"A": [[1.0]]})
    assert plant_to_dict(q) == plant_to_dict(plant42)


# ---- evaluated quantities


def test_bundle_invariants(plant42, rng):
    for radius in (0.1, 1.0, 5.0):
        g = sample_gain(plant42, rng, radius)
        b = evaluate(plant42, g.K)
        b.check(plant42)
        # standard gradient is the natural gradient times Y_K
        assert np.allclose(b.grad, b.nat_grad @ b.Y, atol=1e-12)
        assert np.allclose(b.newton_dir, -(b.K - b.K_prime))
        assert excess_cost(plant42, b) == pytest.approx(b.cost - np.trace(plant42.P_star),
                                                        rel=1e-8, abs=1e-10)


def test_batch_costs_match(plant42, scalar, rng):
    Ks = np.stack([sample_gain(plant42, rng, 2.0).K for _ in range(10)] + [np.zeros((2, 4)) + 100])
    out = batch_costs(plant42, Ks)
    for K, c in zip(Ks[:-1], out[:-1]):
        assert c == pytest.approx(cost(plant42, K), rel=1e-11)
    if not gain(plant42, Ks[-1]).stabilizing:
        assert out[-1] == np.inf
    s = batch_costs(scalar, np.array([[[3.0]], [[0.5]]]))
    assert s[0] == pytest.approx(J1(3.0)) and s[1] == np.inf


def test_gradient_matches_finite_differences(plant42, rng):
    K = sample_gain(plant42, rng, 1.0).K
    b = evaluate(plant42, K)
    h = 1e-5
    fd = np.zeros_like(K)
    for idx in np.ndindex(K.shape):
        D = np.zeros_like(K)
        D[idx] = h
        fd[idx] = (cost(plant42, K + D) - cost(plant42, K - D)) / (2 * h)
    assert np.linalg.norm(fd - b.grad) <= 1e-6 * np.linalg.norm(b.grad)


def test_taylor_third_order_remainder(plant42, rng):
    K = sample_gain(plant42, rng, 1.0).K
    D = rng.normal(size=K.shape)
    D /= np.linalg.norm(D)
    errs = [abs(cost(plant42, K + t * D) - taylor_second_order(plant42, K, t * D)) for t in (1e-2, 5e-3)]
    assert 6.0 <= errs[0] / errs[1] <= 10.0


def test_taylor_shape_error(plant42):
    with pytest.raises(DimensionMismatch):
        taylor_second_order(plant42, plant42.K_star, np.zeros((4, 2)))


def test_weighted_inner(rng):
    K1, K2 = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
    M = rng.normal(size=(3, 3))
    Y = M @ M.T + np.eye(3)
    assert weighted_inner(K1, K2, Y) == pytest.approx(np.trace(K1.T @ K2 @ Y))
    assert weighted_inner(K1, K2) == pytest.approx(np.trace(K1.T @ K2))
    w = WeightedInner(Y)
    assert w.norm(K1) ** 2 == pytest.approx(w(K1, K1))
    with pytest.raises(DimensionMismatch):
        weighted_inner(K1, K2, np.eye(2))


def test_sample_gains_deterministic(plant42):
    a = sample_gains(plant42, 5, 1.0, seed=3)
    b = sample_gains(plant42, 5, 1.0, seed=3)
    for x, y in zip(a, b):
        assert np.array_equal(x.K, y.K)
        assert np.linalg.norm(x.K - plant42.K_star) <= 1.0


def test_random_plant_deterministic():
    p, q = random_plant(3, 2, 5), random_plant(3, 2, 5)
    assert np.array_equal(p.A, q.A) and np.array_equal(p.K_star, q.K_star)
    assert np.trace(p.P_star) <= 1e3


def test_batch_cost_changes(plant42, scalar, rng):
    K = sample_gain(plant42, rng, 1.0).K
    Ds = 0.1 * rng.normal(size=(6, 2, 4))
    out = batch_cost_changes(plant42, K, Ds)
    for D, c in zip(Ds, out):
        if gain(plant42, K + D).stabilizing:
            assert c == pytest.approx(cost(plant42, K + D) - cost(plant42, K), rel=1e-9, abs=1e-11)
        else:
            assert c == np.inf
    s = batch_cost_changes(scalar, [[3.0]], np.array([[[0.5]], [[-2.5]]]))
    assert s[0] == pytest.approx(J1(3.5) - J1(3.0), rel=1e-12) and s[1] == np.inf


def test_batch_gramians(plant42, rng):
    Ks = np.stack([sample_gain(plant42, rng, 1.0).K for _ in range(3)])
    Y, ok = batch_gramians(plant42, Ks)
    assert ok.all()
    for K, y in zip(Ks, Y):
        assert np.allclose(y, evaluate(plant42, K).Y, rtol=1e-10, atol=1e-12)
