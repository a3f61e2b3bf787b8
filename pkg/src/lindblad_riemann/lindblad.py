"""Dissipative nearest-neighbour Lindbladians for qubit chains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConfigError, MemoryCapError, NumericError

LOCAL_DIM = 2
DEFAULT_MAX_SIDE = 4096

_I2 = np.eye(2)
_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])  # a|1> = |0>
_RAISE = _LOWER.T
_PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

MODELS = ("kitaev", "pspl", "kitaev-literal")


@dataclass(frozen=True)
class LindbladModel:
    """Named two-site dissipative model with its real jump operators."""

    name: str
    gamma: float = 1.0

    def __post_init__(self):
        name = self.name.lower()
        if name not in MODELS:
            raise ConfigError("model", f"unknown model {self.name!r}; choose from {MODELS}")
        if not self.gamma > 0:
            raise ConfigError("gamma", f"noise strength must be positive, got {self.gamma}")
        object.__setattr__(self, "name", name)

    @property
    def jump_ops(self):
        return jump_operators(self.name, self.gamma)


def as_model(model, gamma=1.0):
    return model if isinstance(model, LindbladModel) else LindbladModel(model, gamma)


def jump_operators(model, gamma=1.0):
    """Real 4x4 jump operators of a two-site model.

    ``kitaev`` is the dissipative Kitaev-wire operator
    ``(sqrt(g)/4) (a^dag x I + I x a^dag)(a x I - I x a)``; ``kitaev-literal`` is the
    bare ``(sqrt(g)/4)(a^dag x I + I x a)``; ``pspl`` gives
    ``sqrt(g)(X x I - I x X)`` and ``sqrt(g)(Z x I - I x Z)``.
    """
    name = model.name if isinstance(model, LindbladModel) else str(model).lower()
    if not gamma > 0:
        raise ConfigError("gamma", f"noise strength must be positive, got {gamma}")
    root = np.sqrt(gamma)
    if name == "kitaev":
        creation = np.kron(_RAISE, _I2) + np.kron(_I2, _RAISE)
        hopping = np.kron(_LOWER, _I2) - np.kron(_I2, _LOWER)
        return [root / 4 * creation @ hopping]
    if name == "kitaev-literal":
        return [root / 4 * (np.kron(_RAISE, _I2) + np.kron(_I2, _LOWER))]
    if name == "pspl":
        return [
            root * (np.kron(_PAULI_X, _I2) - np.kron(_I2, _PAULI_X)),
            root * (np.kron(_PAULI_Z, _I2) - np.kron(_I2, _PAULI_Z)),
        ]
    raise ConfigError("model", f"unknown model {model!r}; choose from {MODELS}")


def dissipator(jump_ops, dim):
    """Row-major vectorized generator ``sum_k L(x)L - (L^T L (x) I + I (x) L^T L)/2``."""
    D = np.zeros((dim * dim, dim * dim))
    eye = np.eye(dim)
    for L in jump_ops:
        L = np.asarray(L, dtype=float)
        if L.shape != (dim, dim):
            raise ConfigError("jump_ops", f"expected {dim}x{dim} operators, got {L.shape}")
        LtL = L.T @ L
        D += np.kron(L, L) - 0.5 * (np.kron(LtL, eye) + np.kron(eye, LtL))
    return D


def local_dissipator(jump_ops):
    """16x16 two-site generator of a list of real 4x4 jump operators."""
    return dissipator(jump_ops, LOCAL_DIM**2)


def embed_two_site(op, sites, first, second):
    """Embed a two-site operator acting on ``(first, second)`` into ``sites`` qubits.

    ``first`` carries the left tensor factor of ``op``; for the periodic bond the
    call ``embed_two_site(op, N, N - 1, 0)`` puts it on site N and the right
    factor on site 1.
    """
    d = LOCAL_DIM
    if first == second or not (0 <= first < sites and 0 <= second < sites):
        raise ConfigError("sites", f"invalid site pair ({first}, {second}) for N={sites}")
    rest = [s for s in range(sites) if s not in (first, second)]
    full = np.kron(np.asarray(op, dtype=float), np.eye(d ** (sites - 2)))
    order = [first, second] + rest
    # tensor legs of `full` follow `order`; move them back to natural order
    inverse = np.argsort(order)
    T = full.reshape((d,) * (2 * sites))
    T = T.transpose(list(inverse) + [sites + i for i in inverse])
    return T.reshape(d**sites, d**sites)


def full_liouvillian(model, sites, gamma=1.0, max_side=DEFAULT_MAX_SIDE):
    """Translation-invariant N-site generator with periodic boundary term.

    Sums the vectorized generator of every bond ``(l, l+1)``, ``l = 1..N``,
    with the bond ``(N, 1)`` closing the ring.
    """
    if sites < 2 or sites % 2:
        raise ConfigError("sites", f"number of sites must be even and >= 2, got {sites}")
    side = LOCAL_DIM ** (2 * sites)
    if side > max_side:
        raise MemoryCapError(f"Liouvillian side {side} exceeds the cap {max_side}")
    ops = model if isinstance(model, (list, tuple)) else as_model(model, gamma).jump_ops
    dim = LOCAL_DIM**sites
    total = np.zeros((side, side))
    for bond in range(sites):
        embedded = [embed_two_site(L, sites, bond, (bond + 1) % sites) for L in ops]
        total += dissipator(embedded, dim)
    return total


def expm(M):
    """Matrix exponential by scaling and squaring with a Pade approximant."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NumericError(f"expm expects a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericError("expm input has non-finite entries")
    return scipy.linalg.expm(M)
