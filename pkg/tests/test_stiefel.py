import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lindblad_riemann import stiefel
from lindblad_riemann.exceptions import ConfigError, NumericError
from lindblad_riemann.stiefel import CANONICAL, EUCLIDEAN, MetricParams

from conftest import random_isometry

shapes = st.tuples(st.integers(1, 6), st.integers(0, 6)).map(lambda t: (t[0] + t[1], t[0]))


def _setup(seed, shape):
    rng = np.random.default_rng(seed)
    n, p = shape
    return rng, random_isometry(rng, n, p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), shapes)
def test_projection_properties(seed, shape):
    rng, X = _setup(seed, shape)
    Y = rng.standard_normal(shape)
    Z = stiefel.project_tangent(Y, X)
    assert stiefel.tangent_defect(Z, X) < 1e-12
    assert np.allclose(stiefel.project_tangent(Z, X), Z, atol=1e-13)
    assert abs(np.sum(Z * (Y - Z))) < 1e-12 * max(1.0, np.sum(Y * Y))
    N = stiefel.project_normal(Y, X)
    assert np.allclose(Z + N, Y, atol=1e-13)
    W = rng.standard_normal(shape)
    # self-adjointness under the Euclidean inner product
    assert np.sum(stiefel.project_tangent(W, X) * Y) == pytest.approx(np.sum(W * Z), abs=1e-12)


def test_normal_space_cases(rng):
    X = random_isometry(rng, 8, 3)
    C = rng.standard_normal((3, 3))
    C = C + C.T
    assert np.allclose(stiefel.project_tangent(X @ C, X), 0, atol=1e-13)
    assert np.allclose(stiefel.project_normal(X @ C, X), X @ C, atol=1e-13)
    Z = stiefel.project_tangent(rng.standard_normal((8, 3)), X)
    assert np.allclose(stiefel.project_normal(Z, X), 0, atol=1e-13)


def test_metric_values(rng):
    X = random_isometry(rng, 8, 3)
    A = rng.standard_normal((3, 3))
    A = A - A.T
    Z = X @ A
    assert stiefel.metric_inner(Z, Z, X, CANONICAL) == pytest.approx(0.5 * np.trace(A.T @ A))
    assert stiefel.metric_inner(Z, Z, X, EUCLIDEAN) == pytest.approx(np.trace(A.T @ A))
    W = stiefel.project_tangent(rng.standard_normal((8, 3)), X)
    assert stiefel.metric_inner(W, W, X, MetricParams(2.0, 0.3)) > 0


def test_metric_rejects_nonpositive():
    with pytest.raises(ConfigError):
        MetricParams(0.0, 1.0)
    with pytest.raises(ConfigError):
        MetricParams(1.0, -0.5)


def test_gradient_of_normal_direction_vanishes(rng):
    X = random_isometry(rng, 8, 3)
    C = rng.standard_normal((3, 3))
    C = C + C.T
    assert np.allclose(stiefel.riemannian_gradient(X @ C, X, CANONICAL), 0, atol=1e-13)


def test_euclidean_gradient_is_projection(rng):
    X = random_isometry(rng, 8, 3)
    G = rng.standard_normal((8, 3))
    assert np.allclose(stiefel.riemannian_gradient(G, X, EUCLIDEAN), stiefel.project_tangent(G, X), atol=1e-12)


@pytest.mark.parametrize("metric", [CANONICAL, EUCLIDEAN, MetricParams(1.0, 0.2)])
def test_gradient_directional_derivative(rng, metric):
    X = random_isometry(rng, 9, 3)
    M = rng.standard_normal((9, 3))

    def f(Y):
        return float(np.sum(np.sin(Y) * M)) + 0.5 * float(np.sum((Y.T @ M) ** 2))

    egrad = np.cos(X) * M + M @ (M.T @ X)
    grad = stiefel.riemannian_gradient(egrad, X, metric)
    assert stiefel.tangent_defect(grad, X) < 1e-12
    for _ in range(5):
        Z = stiefel.project_tangent(rng.standard_normal(X.shape), X)
        h = 1e-5
        fd = (f(stiefel.retract_polar(X, h * Z)) - f(stiefel.retract_polar(X, -h * Z))) / (2 * h)
        assert stiefel.metric_inner(grad, Z, X, metric) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_retraction_properties(rng):
    X = random_isometry(rng, 10, 4)
    assert np.allclose(stiefel.retract_polar(X, np.zeros_like(X)), X, atol=1e-14)
    Z = stiefel.project_tangent(rng.standard_normal(X.shape), X)
    ratios = []
    for t in (1e-2, 1e-3, 1e-4):
        Y = stiefel.retract_polar(X, t * Z)
        assert np.linalg.norm(Y.T @ Y - np.eye(4)) < 1e-12
        ratios.append(np.linalg.norm(Y - X - t * Z) / t**2)
    assert max(ratios) < 10 * np.linalg.norm(Z) ** 2


def test_retraction_of_normal_perturbation(rng):
    X = random_isometry(rng, 10, 4)
    C = rng.standard_normal((4, 4))
    C = C + C.T
    for eps in (1e-2, 1e-3):
        err = np.linalg.norm(stiefel.retract_polar(X, eps * X @ C) - X)
        assert err < 10 * eps**2


def test_retraction_rank_deficient():
    X = np.eye(3)[:, :2]
    with pytest.raises(NumericError):
        stiefel.retract_polar(X, -X)


def test_complement_cases(rng):
    X = np.eye(6)[:, :2]
    P = stiefel.orthogonal_complement(X)
    assert P.shape == (6, 4)
    assert np.allclose(P[:2], 0, atol=1e-15)
    assert stiefel.orthogonal_complement(np.eye(4)).shape == (4, 0)
    X = random_isometry(rng, 9, 4)
    P = stiefel.orthogonal_complement(X)
    assert np.allclose(X @ X.T + P @ P.T, np.eye(9), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), shapes)
def test_param_roundtrip_with_two_completions(seed, shape):
    rng, X = _setup(seed, shape)
    Z = stiefel.project_tangent(rng.standard_normal(shape), X)
    P1 = stiefel.orthogonal_complement(X)
    n, p = shape
    Q, _ = np.linalg.qr(rng.standard_normal((n - p, n - p))) if n > p else (np.zeros((0, 0)), None)
    P2 = P1 @ Q
    for P in (P1, P2):
        c = stiefel.tangent_to_param(Z, X, P)
        assert c.size == stiefel.dof(n, p)
        assert np.allclose(stiefel.param_to_tangent(c, X, P), Z, atol=1e-12)


def test_dof_counts():
    assert 3 * stiefel.dof(40, 4) == 450
    assert 9 * stiefel.dof(40, 4) == 1350
    assert stiefel.dof(4, 4) == 6
    for n in range(1, 13):
        for p in range(1, n + 1):
            assert stiefel.dof(n, p) == p * (p - 1) // 2 + (n - p) * p


def test_param_rejects_non_tangent(rng):
    X = random_isometry(rng, 6, 2)
    with pytest.raises(NumericError):
        stiefel.tangent_to_param(X, X, stiefel.orthogonal_complement(X))


def test_elementary_first_direction(rng):
    X = random_isometry(rng, 12, 4)
    P = stiefel.orthogonal_complement(X)
    E = np.zeros((4, 4))
    E[0, 1], E[1, 0] = 1, -1
    assert np.allclose(stiefel.elementary_direction(X, P, 0), X @ E)


@pytest.mark.parametrize("metric,weights", [(CANONICAL, (1.0, 1.0)), (EUCLIDEAN, (2.0, 1.0))])
def test_elementary_gram_is_diagonal(rng, metric, weights):
    X = random_isometry(rng, 8, 3)
    P = stiefel.orthogonal_complement(X)
    k = stiefel.dof(8, 3)
    dirs = [stiefel.elementary_direction(X, P, i) for i in range(k)]
    G = np.array([[stiefel.metric_inner(a, b, X, metric) for b in dirs] for a in dirs])
    expected = stiefel.coordinate_weights(8, 3, metric)
    assert np.allclose(G, np.diag(expected), atol=1e-13)
    assert set(expected) == set(weights)
    with pytest.raises(ConfigError):
        stiefel.elementary_direction(X, P, k)


def test_suboptimal_direction_cases(rng):
    X = np.eye(5)[:, :2]
    # E_{2,0} lies in the complement block, already tangent
    E = np.zeros((5, 2))
    E[2, 0] = 1
    assert np.allclose(stiefel.suboptimal_direction(X, 2, 0), E)
    assert np.allclose(stiefel.suboptimal_direction(X, 0, 0), 0)
    Y = random_isometry(rng, 5, 2)
    norms = [stiefel.metric_inner(D, D, Y) for D in (stiefel.suboptimal_direction(Y, i, j) for i in range(5) for j in range(2))]
    assert any(abs(v - 1) > 1e-3 for v in norms)
