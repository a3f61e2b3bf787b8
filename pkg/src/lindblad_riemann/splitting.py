"""Second-order Trotter layer schedule, layer ansatz and global composition.

A layer with parity ``odd`` applies the two-site channel to the pairs
(1,2), (3,4), ...; an ``even`` layer applies it to (2,3), ..., (N,1).  The
global superoperator of a layer is ``P^T (Phi x ... x Phi) P`` with ``P`` the
global-to-local leg permutation, but it is never formed densely: layers act on
the leg tensor of their operand one pair at a time.  Composition puts layer 1
rightmost, so it acts first on the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chanrep
from .exceptions import ChannelError, ConfigError
from .lindblad import LOCAL_DIM, as_model, expm, full_liouvillian, local_dissipator

ODD, EVEN = "odd", "even"
ISOMETRY_TOL = 1e-12


@dataclass(frozen=True)
class LayerSchedule:
    """Ordered ``(coefficient, parity)`` entries of the ``2 n_tau + 1`` layer pattern."""

    entries: tuple
    n_tau: int

    @property
    def m(self):
        return len(self.entries)

    @property
    def coefficients(self):
        return [c for c, _ in self.entries]

    @property
    def offsets(self):
        return [0 if parity == ODD else 1 for _, parity in self.entries]


def layer_schedule(n_tau):
    """Layer pattern ``[(1/2, odd), (1, even), (1, odd), ..., (1, even), (1/2, odd)]``.

    Interior half steps of consecutive Trotter steps are merged into full odd
    layers, giving ``m = 2 n_tau + 1`` layers.
    """
    if int(n_tau) != n_tau or n_tau < 1:
        raise ConfigError("n_tau", f"number of time steps must be an integer >= 1, got {n_tau}")
    n_tau = int(n_tau)
    entries = [(0.5, ODD)]
    for step in range(n_tau):
        entries.append((1.0, EVEN))
        entries.append((0.5, ODD) if step == n_tau - 1 else (1.0, ODD))
    return LayerSchedule(tuple(entries), n_tau)


def build_trotter_layers(generator, tau, n_tau):
    """Two-site layer channels ``expm(c_alpha * (tau / n_tau) * D)``."""
    schedule = layer_schedule(n_tau)
    dt = tau / schedule.n_tau
    cache = {}
    layers = []
    for coeff in schedule.coefficients:
        if coeff not in cache:
            cache[coeff] = expm(coeff * dt * np.asarray(generator, dtype=float))
        layers.append(cache[coeff])
    return layers


@dataclass(frozen=True)
class IsometryVector:
    """One Stiefel point per layer, all of the same shape ``(R d^2, d^2)``."""

    layers: tuple
    schedule: LayerSchedule

    def __post_init__(self):
        layers = tuple(np.asarray(X, dtype=float) for X in self.layers)
        if len(layers) != self.schedule.m:
            raise ChannelError(f"expected {self.schedule.m} layers, got {len(layers)}")
        shapes = {X.shape for X in layers}
        if len(shapes) != 1:
            raise ChannelError(f"all layers must share one shape, got {sorted(shapes)}")
        object.__setattr__(self, "layers", layers)

    @property
    def shape(self):
        return self.layers[0].shape

    @property
    def rank(self):
        n, p = self.shape
        return n // p

    def isometry_defect(self):
        p = self.shape[1]
        return max(float(np.linalg.norm(X.T @ X - np.eye(p))) for X in self.layers)

    def replace(self, layers):
        return IsometryVector(tuple(layers), self.schedule)


def nearest_isometry(M):
    """Polar factor ``U V^T`` of ``M = U S V^T``."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float), full_matrices=False)
    return U @ Vt


def build_ansatz(layers, rank, schedule=None):
    """Isometries ``X_alpha = S_T(Lambda_alpha)`` at Kraus rank ``rank``.

    Below the natural Choi rank the stacked Kraus matrix is only
    sub-isometric; it is replaced by its nearest isometry.
    """
    schedule = schedule or layer_schedule((len(layers) - 1) // 2)
    Xs = []
    for channel in layers:
        kraus = chanrep.choi_to_kraus(chanrep.superop_to_choi(channel), rank)
        Xs.append(nearest_isometry(chanrep.kraus_to_stiefel(kraus)))
    return IsometryVector(tuple(Xs), schedule)


def _pair_legs(sites, offset):
    legs = []
    for s1, s2 in chanrep.site_pairs(sites, offset):
        legs += [s1, s2, sites + s1, sites + s2]
    return legs


def to_local(M, sites, offset):
    """Reshape the rows of ``M`` (side ``d^(2N)``) into ``(d^4,) * (N/2) + (cols,)``."""
    d = LOCAL_DIM
    cols = M.shape[1]
    T = M.reshape((d,) * (2 * sites) + (cols,))
    T = T.transpose(_pair_legs(sites, offset) + [2 * sites])
    return T.reshape((d**4,) * (sites // 2) + (cols,))


def from_local(T, sites, offset):
    """Inverse of :func:`to_local`."""
    d = LOCAL_DIM
    cols = T.shape[-1]
    T = T.reshape((d,) * (2 * sites) + (cols,))
    inverse = list(np.argsort(_pair_legs(sites, offset)))
    return T.transpose(inverse + [2 * sites]).reshape(d ** (2 * sites), cols)


def apply_slots(phi, T, skip=None):
    """Apply ``phi`` to every pair axis of a local tensor except ``skip``."""
    for k in range(T.ndim - 1):
        if k == skip:
            continue
        T = np.moveaxis(np.tensordot(phi, T, axes=([1], [k])), 0, k)
    return T


def apply_layer(phi, offset, M, sites, transpose=False):
    """Multiply ``M`` from the left by the global superoperator of one layer."""
    phi = np.asarray(phi).T if transpose else np.asarray(phi)
    T = apply_slots(phi, to_local(M, sites, offset))
    return from_local(T, sites, offset)


def layer_superop(phi, offset, sites):
    """Dense global superoperator of one layer."""
    side = LOCAL_DIM ** (2 * sites)
    return apply_layer(phi, offset, np.eye(side), sites)


def compose_superops(phis, offsets, sites, operand=None):
    """``T_m ... T_1 @ operand`` for two-site channels ``phis`` (identity operand by default)."""
    if sites < 2 or sites % 2:
        raise ConfigError("sites", f"number of sites must be even and >= 2, got {sites}")
    M = np.eye(LOCAL_DIM ** (2 * sites)) if operand is None else np.asarray(operand, dtype=float)
    for phi, offset in zip(phis, offsets):
        M = apply_layer(phi, offset, M, sites)
    return M


def compose_global(xvec, sites):
    """Full-system superoperator ``S(X)`` of an isometry vector."""
    phis = [chanrep.stiefel_to_superop(X) for X in xvec.layers]
    if phis[0].shape != (LOCAL_DIM**4, LOCAL_DIM**4):
        raise ChannelError(f"layers must encode two-site qubit channels, got {phis[0].shape}")
    return compose_superops(phis, xvec.schedule.offsets, sites)


def exact_superop(model, tau, sites, gamma=1.0, max_side=None):
    """Reference channel ``expm(tau L)`` of the full ring."""
    kwargs = {} if max_side is None else {"max_side": max_side}
    return expm(tau * full_liouvillian(model, sites, gamma, **kwargs))


def trotter_superop(model, tau, n_tau, sites, gamma=1.0):
    """Composite Trotter approximation built from exact two-site layers."""
    generator = local_dissipator(as_model(model, gamma).jump_ops)
    layers = build_trotter_layers(generator, tau, n_tau)
    return compose_superops(layers, layer_schedule(n_tau).offsets, sites)


def trotter_error(model, tau, n_tau, sites, gamma=1.0, reference=None):
    """Frobenius distance between the exact channel and its Trotter splitting."""
    if reference is None:
        reference = exact_superop(model, tau, sites, gamma)
    return float(np.linalg.norm(reference - trotter_superop(model, tau, n_tau, sites, gamma)))
