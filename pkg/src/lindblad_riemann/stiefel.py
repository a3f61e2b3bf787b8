"""Geometry of the real Stiefel manifold ``St(n, p) = {X : X^T X = I_p}``.

Tangent vectors at ``X`` are ``Z = X A + X_perp B`` with ``A`` skew and ``B``
arbitrary.  Coordinates list the strict upper triangle of ``A`` (row-major)
followed by all of ``B`` (row-major), ``p (2n - p - 1) / 2`` numbers in total.
The metric family is ``<Z, W> = tr Z^T (a0 (I - X X^T) + a1 X X^T) W``, with
``(1, 1)`` Euclidean and ``(1, 1/2)`` canonical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, NumericError


@dataclass(frozen=True)
class MetricParams:
    alpha0: float = 1.0
    alpha1: float = 0.5

    def __post_init__(self):
        if not (self.alpha0 > 0 and self.alpha1 > 0):
            raise ConfigError("metric", f"alpha0 and alpha1 must be positive, got {self}")

    @property
    def connection_weight(self):
        return (self.alpha0 - self.alpha1) / self.alpha0


CANONICAL = MetricParams(1.0, 0.5)
EUCLIDEAN = MetricParams(1.0, 1.0)


def skew(M):
    return 0.5 * (M - M.T)


def sym(M):
    return 0.5 * (M + M.T)


def tangent_defect(Z, X):
    """``||X^T Z + Z^T X||_F``; zero exactly for tangent vectors."""
    XtZ = X.T @ Z
    return float(np.linalg.norm(XtZ + XtZ.T))


def project_tangent(Y, X):
    """Euclidean projection ``(I - X X^T) Y + X skew(X^T Y)`` onto ``T_X St``."""
    XtY = X.T @ Y
    return Y - X @ sym(XtY)


def project_normal(Y, X):
    """Projection ``X sym(X^T Y)`` onto the normal space."""
    return X @ sym(X.T @ Y)


def apply_metric(Z, X, params=CANONICAL):
    """``G_X Z = a0 (I - X X^T) Z + a1 X X^T Z``."""
    XXtZ = X @ (X.T @ Z)
    return params.alpha0 * (Z - XXtZ) + params.alpha1 * XXtZ


def metric_inner(Z, W, X, params=CANONICAL):
    return float(np.sum(Z * apply_metric(W, X, params)))


def riemannian_gradient(egrad, X, params=CANONICAL):
    """Riemannian gradient of a function with ambient gradient ``egrad``.

    Implements ``G/a0 + (1/a1 - 2/a0)/2 X X^T G - X G^T X / (2 a1)``.  At
    ``(1, 1)`` this is the tangent projection of ``G``; at ``(1, 1/2)`` it is
    ``G - X G^T X``.  The formula is also evaluated at non-isometric ``X``,
    which extends the gradient to a smooth field on the ambient space.
    """
    a0, a1 = params.alpha0, params.alpha1
    return (
        egrad / a0
        + 0.5 * (1.0 / a1 - 2.0 / a0) * (X @ (X.T @ egrad))
        - (X @ (egrad.T @ X)) / (2.0 * a1)
    )


def connection_terms(grad, Z, X, params=CANONICAL):
    """Christoffel terms added to ``D grad[Z]`` to form ``Hess f[Z]``."""
    out = 0.5 * X @ (grad.T @ Z + Z.T @ grad)
    c = params.connection_weight
    if c:
        M = (grad @ (Z.T @ X)) + (Z @ (grad.T @ X))
        out = out + c * (M - X @ (X.T @ M))
    return out


def retract_polar(X, Z):
    """Polar retraction ``U I_{n,p} V^T`` from the thin SVD of ``X + Z``."""
    U, s, Vt = np.linalg.svd(X + Z, full_matrices=False)
    if s[-1] <= s[0] * 1e-13 or s[-1] == 0.0:
        raise NumericError("X + Z is rank deficient; polar retraction undefined")
    return U @ Vt


def orthogonal_complement(X):
    """Orthonormal basis ``X_perp`` of the complement of ``span(X)`` (``n x (n - p)``)."""
    n, p = X.shape
    if n == p:
        return np.zeros((n, 0))
    Q, _ = np.linalg.qr(np.hstack([X, np.eye(n)]), mode="complete")
    Xperp = Q[:, p:n]
    # one Gram-Schmidt pass against X removes the O(eps) overlap from the QR
    Xperp = Xperp - X @ (X.T @ Xperp)
    Q2, R2 = np.linalg.qr(Xperp)
    return Q2 * np.sign(np.diag(R2))


def dof(n, p):
    """Dimension ``p (2n - p - 1) / 2`` of ``St(n, p)``."""
    return p * (2 * n - p - 1) // 2


def _upper(p):
    return np.triu_indices(p, k=1)


def tangent_to_param(Z, X, Xperp, check=True):
    """Coordinates ``(upper(A), B)`` of a tangent vector."""
    A = X.T @ Z
    if check and np.linalg.norm(A + A.T) > 1e-8 * max(1.0, np.linalg.norm(Z)):
        raise NumericError("Z is not tangent at X: X^T Z is not skew-symmetric")
    iu = _upper(X.shape[1])
    return np.concatenate([skew(A)[iu], (Xperp.T @ Z).ravel()])


def param_to_tangent(coords, X, Xperp):
    """Inverse of :func:`tangent_to_param`."""
    n, p = X.shape
    iu = _upper(p)
    k = len(iu[0])
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (k + (n - p) * p,):
        raise ConfigError("coords", f"expected {k + (n - p) * p} coordinates, got {coords.shape}")
    A = np.zeros((p, p))
    A[iu] = coords[:k]
    A -= A.T
    return X @ A + Xperp @ coords[k:].reshape(n - p, p)


def direction_index(idx, n, p):
    """Map a zero-based flat index to ``("A", i, j)`` or ``("B", i, j)``."""
    k = p * (p - 1) // 2
    if not 0 <= idx < dof(n, p):
        raise ConfigError("idx", f"direction index {idx} out of range [0, {dof(n, p)})")
    if idx < k:
        iu = _upper(p)
        return "A", int(iu[0][idx]), int(iu[1][idx])
    i, j = divmod(idx - k, p)
    return "B", i, j


def elementary_direction(X, Xperp, idx):
    """``E^A_ij = X (E_ij - E_ji)`` for the first ``p(p-1)/2`` indices, else ``X_perp E_ij``."""
    n, p = X.shape
    kind, i, j = direction_index(idx, n, p)
    if kind == "A":
        Z = np.zeros((n, p))
        Z[:, j] += X[:, i]
        Z[:, i] -= X[:, j]
        return Z
    return np.outer(Xperp[:, i], np.eye(p)[j])


def unit_direction(n, p, idx):
    """Raw unit matrix at the position of the ``idx``-th coordinate when ``X = I_{n,p}``."""
    kind, i, j = direction_index(idx, n, p)
    U = np.zeros((n, p))
    U[i if kind == "A" else p + i, j] = 1.0
    return U


def suboptimal_direction(X, i, j):
    """``pi_T(E_ij)`` for the unit matrix ``E_ij`` in ``R^{n x p}``."""
    E = np.zeros(X.shape)
    E[i, j] = 1.0
    return project_tangent(E, X)


def coordinate_weights(n, p, params=CANONICAL):
    """Metric norm squared of each elementary direction (the diagonal Gram)."""
    k = p * (p - 1) // 2
    w_a = 2.0 * params.alpha1
    w_b = params.alpha0
    return np.concatenate([np.full(k, w_a), np.full((n - p) * p, w_b)])
