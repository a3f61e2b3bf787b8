"""Quantum-channel representations for real two-site channels.

All vectorization is row-major: ``vec_row(M)[i * d + j] == M[i, j]``, so that
``vec_row(A @ rho @ B) == kron(A, B.T) @ vec_row(rho)`` and ``L rho L^T``
vectorizes to ``kron(L, L)``.  A superoperator ``S`` acting on a
``d' x d'`` operator has index pairs ``S[(i, j), (k, l)]`` with ``(i, j)`` the
output ket/bra indices and ``(k, l)`` the input ones.  The Choi matrix is the
reshuffle ``C[(i, k), (j, l)] = S[(i, j), (k, l)]``, which for a Kraus form
``S = sum_q kron(E_q, E_q)`` equals ``sum_q vec_row(E_q) vec_row(E_q)^T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import ChannelError

NATURAL_RANK_TOL = 1e-10
NEGATIVE_EIG_CLAMP = 1e-10
NEGATIVE_EIG_ERROR = 1e-6


def _int_sqrt(value, what):
    root = int(round(np.sqrt(value)))
    if root * root != value:
        raise ChannelError(f"{what} {value} is not a perfect square")
    return root


def _as_array(S):
    return np.asarray(S.matrix if isinstance(S, Superoperator) else S, dtype=float)


@dataclass(frozen=True)
class Superoperator:
    """Dense real superoperator on ``sites`` sites of local dimension ``local_dim``."""

    matrix: np.ndarray
    sites: int
    local_dim: int = 2

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        side = self.local_dim ** (2 * self.sites)
        if matrix.shape != (side, side):
            raise ChannelError(
                f"superoperator on {self.sites} sites (d={self.local_dim}) must be "
                f"{side}x{side}, got {matrix.shape}"
            )
        object.__setattr__(self, "matrix", matrix)

    def trace_defect(self):
        """Max deviation of ``vec(I)^T S`` from ``vec(I)^T`` (zero for trace preserving maps)."""
        dim = self.local_dim**self.sites
        vec_identity = np.eye(dim).ravel()
        return float(np.max(np.abs(vec_identity @ self.matrix - vec_identity)))


@dataclass(frozen=True)
class KrausSet:
    """Ordered real Kraus operators, stored as an array of shape ``(R, dim, dim)``."""

    ops: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=float)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2] or ops.shape[0] < 1:
            raise ChannelError(f"Kraus operators must have shape (R, dim, dim), got {ops.shape}")
        object.__setattr__(self, "ops", ops)

    @property
    def rank(self):
        return self.ops.shape[0]

    def __len__(self):
        return self.rank

    def __iter__(self):
        return iter(self.ops)

    def completeness(self):
        """Return ``sum_q E_q^T E_q``."""
        return np.einsum("qki,qkj->ij", self.ops, self.ops)


@dataclass(frozen=True)
class LegPermutation:
    """Reordering of the ``2N`` legs of an N-site vectorized operator.

    ``perm[k]`` is the global leg that sits at position ``k`` of the local
    ordering, so ``to_local(v)`` reorders a global vector into local order and
    ``as_matrix @ v_global == v_local``.  A superoperator transforms by
    conjugation, ``S_local = P S_global P^T``.
    """

    perm: tuple
    local_dim: int = 2
    _indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ChannelError(f"{perm} is not a permutation")
        object.__setattr__(self, "perm", perm)
        legs = len(perm)
        side = self.local_dim**legs
        idx = np.arange(side).reshape((self.local_dim,) * legs).transpose(perm).ravel()
        object.__setattr__(self, "_indices", idx)

    @property
    def side(self):
        return self.local_dim ** len(self.perm)

    @cached_property
    def as_matrix(self):
        P = np.zeros((self.side, self.side), dtype=np.int8)
        P[np.arange(self.side), self._indices] = 1
        return P

    def inverse(self):
        return LegPermutation(tuple(int(i) for i in np.argsort(self.perm)), self.local_dim)

    def compose(self, other):
        """Permutation applying ``other`` first, then ``self``."""
        return LegPermutation(tuple(other.perm[p] for p in self.perm), self.local_dim)

    def is_identity(self):
        return self.perm == tuple(range(len(self.perm)))

    def to_local(self, vectors):
        """Reorder the rows of a global-order vector or matrix into local order."""
        return np.asarray(vectors)[self._indices]

    def conjugate(self, S):
        """``P S P^T`` computed by index gathering."""
        S = _as_array(S)
        return S[np.ix_(self._indices, self._indices)]


def vec_row(M):
    """Row-major flattening of a square matrix."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ChannelError(f"vec_row expects a square matrix, got shape {M.shape}")
    return M.reshape(-1).copy()


def unvec_row(v):
    """Inverse of :func:`vec_row`."""
    v = np.asarray(v)
    dim = _int_sqrt(v.size, "vector length")
    return v.reshape(dim, dim).copy()


def reshuffle(S):
    """Index reshuffle ``C[(i, k), (j, l)] = S[(i, j), (k, l)]``; an involution."""
    S = _as_array(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ChannelError(f"superoperator must be square, got {S.shape}")
    dim = _int_sqrt(S.shape[0], "superoperator side")
    return S.reshape(dim, dim, dim, dim).transpose(0, 2, 1, 3).reshape(dim * dim, dim * dim)


def superop_to_choi(S, local_dim=2):
    """Choi matrix of a two-site superoperator (side ``local_dim**4``)."""
    S = _as_array(S)
    side = local_dim**4
    if S.shape != (side, side):
        raise ChannelError(f"two-site superoperator must be {side}x{side}, got {S.shape}")
    return reshuffle(S)


def _sorted_eigh(C):
    C = np.asarray(C, dtype=float)
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    # fix the sign of each eigenvector so the factorization is deterministic
    pivots = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivots, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return w, V * signs


def natural_rank(C, tol=NATURAL_RANK_TOL):
    """Number of Choi eigenvalues above ``tol`` times the largest one."""
    w = np.linalg.eigvalsh(0.5 * (C + C.T))
    top = np.max(np.abs(w))
    if top == 0.0:
        return 0
    return int(np.count_nonzero(w > tol * top))


def choi_to_kraus(C, rank=None, local_dim=2):
    """Factor a PSD Choi matrix into its ``rank`` dominant real Kraus operators.

    The truncated eigendecomposition ``C_R = V D V^T = (V sqrt(D)) (V sqrt(D))^T``
    gives the best rank-``R`` PSD approximation; each scaled column is reshaped
    row-major into a ``local_dim**2 x local_dim**2`` Kraus operator.

    Parameters
    ----------
    C : ndarray
        Symmetric Choi matrix of side ``local_dim**4``.
    rank : int, optional
        Number of Kraus operators to keep; defaults to the natural rank.

    Raises
    ------
    ChannelError
        If ``rank`` is outside ``[1, local_dim**4]`` or ``C`` has eigenvalues
        below ``-1e-6`` (the input is not completely positive).
    """
    C = np.asarray(C, dtype=float)
    side = local_dim**4
    if C.shape != (side, side):
        raise ChannelError(f"Choi matrix must be {side}x{side}, got {C.shape}")
    if rank is None:
        rank = max(natural_rank(C), 1)
    if not 1 <= rank <= side:
        raise ChannelError(f"rank must lie in [1, {side}], got {rank}")
    w, V = _sorted_eigh(C)
    if w[-1] < -NEGATIVE_EIG_ERROR:
        raise ChannelError(f"Choi matrix has eigenvalue {w[-1]:.3e}; channel is not CP")
    w = w[:rank]
    if np.any(w < -NEGATIVE_EIG_CLAMP):
        raise ChannelError(
            f"retained Choi eigenvalue {w.min():.3e} is negative; reduce the rank"
        )
    w = np.clip(w, 0.0, None)
    columns = V[:, :rank] * np.sqrt(w)
    dim = local_dim**2
    return KrausSet(columns.T.reshape(rank, dim, dim))


def kraus_to_stiefel(kraus):
    """Stack Kraus operators vertically into ``X = [E_1; ...; E_R]``."""
    ops = kraus.ops if isinstance(kraus, KrausSet) else np.asarray(kraus, dtype=float)
    if ops.ndim != 3 or ops.shape[0] == 0:
        raise ChannelError("need a nonempty list of square Kraus operators")
    return ops.reshape(-1, ops.shape[2]).copy()


def stiefel_blocks(X):
    """View the stacked matrix ``X`` (``R p x p``) as ``(R, p, p)`` blocks."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n % p:
        raise ChannelError(f"row count {n} is not a multiple of column count {p}")
    return X.reshape(n // p, p, p)


def stiefel_to_superop(X):
    """Superoperator ``sum_q kron(E_q, E_q)`` of the Kraus blocks stacked in ``X``."""
    E = stiefel_blocks(X)
    p = E.shape[1]
    return np.einsum("qik,qjl->ijkl", E, E).reshape(p * p, p * p)


def global_local_perm(sites, offset=0, local_dim=2):
    """Leg permutation taking global order to local pair order.

    Global legs are ``(1, ..., N, 1*, ..., N*)``.  With ``offset=0`` the local
    order is ``(1, 2, 1*, 2*, 3, 4, 3*, 4*, ...)``; with ``offset=1`` sites are
    first shifted cyclically by one, giving pairs ``(2, 3), (4, 5), ..., (N, 1)``.
    """
    if sites < 2 or sites % 2:
        raise ChannelError(f"number of sites must be even and >= 2, got {sites}")
    if offset not in (0, 1):
        raise ChannelError(f"offset must be 0 or 1, got {offset}")
    perm = []
    for s1, s2 in site_pairs(sites, offset):
        perm += [s1, s2, sites + s1, sites + s2]
    return LegPermutation(tuple(perm), local_dim)


def site_pairs(sites, offset):
    """Zero-based site pairs coupled by a layer with the given offset."""
    return [((2 * k + offset) % sites, (2 * k + 1 + offset) % sites) for k in range(sites // 2)]


def choi_rank(S, tol=NATURAL_RANK_TOL):
    """Numerical rank of the reshuffled superoperator (singular values > ``tol`` * max)."""
    if not 0.0 < tol < 1.0:
        raise ChannelError(f"tolerance must lie in (0, 1), got {tol}")
    s = np.linalg.svd(reshuffle(S), compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))
