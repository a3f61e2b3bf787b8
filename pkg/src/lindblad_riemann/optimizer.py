"""Riemannian trust-region minimization of the layered-channel approximation error.

The objective is ``f(X) = ||E - S(X)||_F`` (not squared) over a product of
Stiefel manifolds, one factor per layer.  Its ambient gradient is computed
analytically by one forward and one adjoint sweep over the layers; Hessian
columns are central differences of the Riemannian gradient field plus the
connection terms of the chosen metric.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import chanrep, splitting, stiefel
from .exceptions import ConfigError, DegenerateObjectiveError, NumericError
from .stiefel import CANONICAL, MetricParams

logger = logging.getLogger(__name__)

DIRECTIONS = ("canonical", "projected-unit")
DEGENERATE_COST = 1e-14
DEFAULT_HESSIAN_CAP = 2000
THREADS_ENV = "LINDBLAD_RIEMANN_THREADS"


@dataclass(frozen=True)
class Objective:
    """Approximation-error objective for a fixed reference channel."""

    reference: np.ndarray
    schedule: splitting.LayerSchedule
    sites: int
    rank: int
    metric: MetricParams = CANONICAL
    directions: str = "canonical"

    def __post_init__(self):
        side = splitting.LOCAL_DIM ** (2 * self.sites)
        ref = np.asarray(self.reference, dtype=float)
        if ref.shape != (side, side):
            raise ConfigError("reference", f"expected a {side}x{side} superoperator, got {ref.shape}")
        if self.directions not in DIRECTIONS:
            raise ConfigError("directions", f"choose from {DIRECTIONS}, got {self.directions!r}")
        object.__setattr__(self, "reference", ref)

    @property
    def shape(self):
        p = splitting.LOCAL_DIM**2
        return self.rank * p, p

    @property
    def layer_dof(self):
        return stiefel.dof(*self.shape)

    @property
    def dof(self):
        return self.schedule.m * self.layer_dof


@dataclass
class TrustRegionConfig:
    """Trust-region constants; radii default to ``0.1 sqrt(DOF)`` and ``sqrt(DOF)``."""

    max_outer: int = 100
    delta0: float | None = None
    delta_max: float | None = None
    rho_accept: float = 0.1
    rho_shrink: float = 0.25
    rho_good: float = 0.75
    shrink: float = 0.25
    grow: float = 2.0
    cg_kappa: float = 0.1
    cg_theta: float = 1.0
    hess_fd_step: float = 1e-6
    grad_tol: float = 1e-10
    cost_tol: float = 1e-13
    hessian_cap: int = DEFAULT_HESSIAN_CAP

    def __post_init__(self):
        if not 0 < self.rho_accept < self.rho_good < 1:
            raise ConfigError("rho_accept", "need 0 < rho_accept < rho_good < 1")
        if not self.rho_accept <= self.rho_shrink <= self.rho_good:
            raise ConfigError("rho_shrink", "need rho_accept <= rho_shrink <= rho_good")
        if not 0 < self.shrink < 1:
            raise ConfigError("shrink", f"must lie in (0, 1), got {self.shrink}")
        if not self.grow > 1:
            raise ConfigError("grow", f"must exceed 1, got {self.grow}")
        if self.max_outer < 0:
            raise ConfigError("max_outer", f"must be >= 0, got {self.max_outer}")
        if not self.hess_fd_step > 0:
            raise ConfigError("hess_fd_step", f"must be positive, got {self.hess_fd_step}")


@dataclass
class OptimRecord:
    """History of a trust-region run; entry 0 of each list describes the starting point."""

    cost_history: list = field(default_factory=list)
    rho_history: list = field(default_factory=list)
    radius_history: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    final: object = None
    stop_reason: str = "max_outer"

    @property
    def initial_cost(self):
        return self.cost_history[0]

    @property
    def final_cost(self):
        return self.cost_history[-1]

    @property
    def final_isometries(self):
        return self.final

    @property
    def iterations(self):
        return len(self.cost_history) - 1


def _layers(xvec):
    return list(xvec.layers) if isinstance(xvec, splitting.IsometryVector) else list(xvec)


def _forward(phis, offsets, sites, prefix=None):
    """Partial products ``F[j] = T_j ... T_1`` for ``j = 0..m``; reuses ``prefix`` if given."""
    F = list(prefix) if prefix else [np.eye(splitting.LOCAL_DIM ** (2 * sites))]
    for a in range(len(F) - 1, len(phis)):
        F.append(splitting.apply_layer(phis[a], offsets[a], F[a], sites))
    return F


def cost(xvec, obj):
    """Frobenius norm ``||E - S(X)||``."""
    Xs = _layers(xvec)
    if len(Xs) != obj.schedule.m:
        raise ConfigError("layers", f"expected {obj.schedule.m} layers, got {len(Xs)}")
    phis = [chanrep.stiefel_to_superop(X) for X in Xs]
    S = splitting.compose_superops(phis, obj.schedule.offsets, obj.sites)
    return float(np.linalg.norm(S - obj.reference))


def _phi_gradient(phi, offset, B, F, sites):
    """Gradient of ``<G, T(phi)>`` w.r.t. ``phi`` where ``G = B F^T``."""
    Bl = splitting.to_local(B, sites, offset)
    Fl = splitting.to_local(F, sites, offset)
    slots = Bl.ndim - 1
    total = np.zeros_like(phi)
    for k in range(slots):
        Y = splitting.apply_slots(phi, Fl, skip=k)
        axes = [a for a in range(Bl.ndim) if a != k]
        total += np.tensordot(Bl, Y, axes=(axes, axes))
    return total


def _kraus_gradient(gphi, X):
    """Chain rule from ``phi = sum_q E_q (x) E_q`` to the stacked blocks of ``X``."""
    E = chanrep.stiefel_blocks(X)
    p = E.shape[1]
    g4 = gphi.reshape(p, p, p, p)
    grad = np.einsum("ijkl,qjl->qik", g4, E) + np.einsum("jilk,qjl->qik", g4, E)
    return grad.reshape(X.shape)


def _gradient_pass(Xs, obj, prefix=None):
    """Cost, ambient gradients and forward products at (possibly off-manifold) ``Xs``."""
    offsets = obj.schedule.offsets
    phis = [chanrep.stiefel_to_superop(X) for X in Xs]
    F = _forward(phis, offsets, obj.sites, prefix)
    residual = F[-1] - obj.reference
    f = float(np.linalg.norm(residual))
    if f < DEGENERATE_COST:
        raise DegenerateObjectiveError(f"cost {f:.3e} is zero; the gradient of the norm is undefined")
    grads = [None] * len(Xs)
    B = residual
    for a in range(len(Xs) - 1, -1, -1):
        gphi = _phi_gradient(phis[a], offsets[a], B, F[a], obj.sites)
        grads[a] = _kraus_gradient(gphi, Xs[a]) / f
        if a:
            B = splitting.apply_layer(phis[a], offsets[a], B, obj.sites, transpose=True)
    return f, grads, F


def ambient_gradient(xvec, obj):
    """Euclidean gradient of ``f`` with respect to each layer matrix."""
    return _gradient_pass(_layers(xvec), obj)[1]


def riemannian_gradients(Xs, egrads, metric):
    return [stiefel.riemannian_gradient(G, X, metric) for G, X in zip(egrads, Xs)]


def _rgrad_field(Xs, obj, prefix=None):
    _, egrads, _ = _gradient_pass(Xs, obj, prefix)
    return riemannian_gradients(Xs, egrads, obj.metric)


def _fd_step(Xs, step, fval):
    # the gradient of a norm varies on the length scale of the norm itself,
    # so the step shrinks with the cost once it drops below one
    return step * (1.0 + max(float(np.linalg.norm(X)) for X in Xs)) * min(1.0, fval)


def hess_vec(xvec, zvec, obj, step=1e-6, rgrads=None, prefix=None, fval=None):
    """Riemannian Hessian applied to a tangent vector of the product manifold.

    ``D grad f[Z]`` is a central difference of the Riemannian gradient field
    along the unit-normalized ``Z`` with step
    ``step * (1 + max ||X_a||) * min(1, f(X))``; the metric's connection terms
    are added and the result is projected onto the tangent space.
    """
    Xs = _layers(xvec)
    Zs = [np.asarray(Z, dtype=float) for Z in zvec]
    znorm = math.sqrt(sum(float(np.sum(Z * Z)) for Z in Zs))
    if znorm == 0.0:
        return [np.zeros_like(X) for X in Xs]
    if rgrads is None or fval is None:
        fval, egrads, _ = _gradient_pass(Xs, obj)
        rgrads = riemannian_gradients(Xs, egrads, obj.metric)
    h = _fd_step(Xs, step, fval) / znorm
    plus = _rgrad_field([X + h * Z for X, Z in zip(Xs, Zs)], obj, prefix)
    minus = _rgrad_field([X - h * Z for X, Z in zip(Xs, Zs)], obj, prefix)
    out = []
    for X, Z, g, gp, gm in zip(Xs, Zs, rgrads, plus, minus):
        H = (gp - gm) / (2.0 * h) + stiefel.connection_terms(g, Z, X, obj.metric)
        out.append(stiefel.project_tangent(H, X))
    return out


class _Frame:
    """Per-layer complements and coordinate bookkeeping at one iterate."""

    def __init__(self, Xs, obj):
        self.Xs = Xs
        self.obj = obj
        self.perps = [stiefel.orthogonal_complement(X) for X in Xs]
        n, p = obj.shape
        self.layer_dof = stiefel.dof(n, p)
        self.weights = np.tile(stiefel.coordinate_weights(n, p, obj.metric), len(Xs))

    def to_params(self, Zs):
        return np.concatenate(
            [stiefel.tangent_to_param(Z, X, P, check=False) for Z, X, P in zip(Zs, self.Xs, self.perps)]
        )

    def to_tangents(self, coords):
        k = self.layer_dof
        return [
            stiefel.param_to_tangent(coords[a * k : (a + 1) * k], X, P)
            for a, (X, P) in enumerate(zip(self.Xs, self.perps))
        ]

    def direction(self, column):
        a, idx = divmod(column, self.layer_dof)
        X = self.Xs[a]
        if self.obj.directions == "canonical":
            D = stiefel.elementary_direction(X, self.perps[a], idx)
        else:
            D = stiefel.project_tangent(stiefel.unit_direction(*X.shape, idx), X)
        Zs = [np.zeros_like(Y) for Y in self.Xs]
        Zs[a] = D
        return a, Zs


def _thread_count():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError as exc:
        raise ConfigError(THREADS_ENV, "must be a positive integer") from exc


def build_hessian(xvec, obj, step=1e-6, cap=DEFAULT_HESSIAN_CAP, rgrads=None, frame=None,
                  symmetrize=True):
    """Dense Riemannian Hessian in metric-scaled coordinates.

    Column ``(alpha, idx)`` holds the coordinates of ``Hess f[D]`` for the
    ``idx``-th direction on layer ``alpha``.  Coordinates are scaled by the
    square root of the diagonal Gram of the elementary directions, which makes
    the matrix symmetric for every metric of the family.
    """
    Xs = _layers(xvec)
    if obj.dof > cap:
        raise ConfigError("dof", f"Hessian dimension {obj.dof} exceeds the cap {cap}")
    frame = frame or _Frame(Xs, obj)
    if rgrads is None:
        rgrads = _rgrad_field(Xs, obj)
    fval = cost(Xs, obj)
    offsets = obj.schedule.offsets
    phis = [chanrep.stiefel_to_superop(X) for X in Xs]
    F = _forward(phis, offsets, obj.sites)

    def column(j):
        a, Zs = frame.direction(j)
        return frame.to_params(hess_vec(Xs, Zs, obj, step, rgrads, F[: a + 1], fval))

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cols = list(pool.map(column, range(obj.dof)))
    else:
        cols = [column(j) for j in range(obj.dof)]
    root = np.sqrt(frame.weights)
    H = np.column_stack(cols) * root[:, None] / root[None, :]
    return 0.5 * (H + H.T) if symmetrize else H


def tcg_solve(grad, H, delta, kappa=0.1, theta=1.0, max_iter=None):
    """Steihaug-Toint truncated CG for ``min g^T y + y^T H y / 2`` s.t. ``||y|| <= delta``.

    Returns
    -------
    step : ndarray
    reason : str
        ``"converged"``, ``"negative_curvature"``, ``"boundary"`` or ``"max_iter"``.
    """
    g = np.asarray(grad, dtype=float)
    H = np.asarray(H, dtype=float)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
        raise NumericError("non-finite gradient or Hessian in the trust-region subproblem")
    if not delta > 0:
        raise ConfigError("delta", f"trust-region radius must be positive, got {delta}")
    y = np.zeros_like(g)
    r = g.copy()
    r0 = float(np.linalg.norm(r))
    if r0 == 0.0:
        return y, "converged"
    target = r0 * min(kappa, r0**theta)
    d = -r
    rr = r0 * r0
    for _ in range(max_iter or g.size):
        Hd = H @ d
        dHd = float(d @ Hd)
        if dHd <= 0.0:
            return y + _to_boundary(y, d, delta) * d, "negative_curvature"
        alpha = rr / dHd
        y_next = y + alpha * d
        if np.linalg.norm(y_next) >= delta:
            return y + _to_boundary(y, d, delta) * d, "boundary"
        y = y_next
        r = r + alpha * Hd
        rr_next = float(r @ r)
        if math.sqrt(rr_next) <= target:
            return y, "converged"
        d = -r + (rr_next / rr) * d
        rr = rr_next
    return y, "max_iter"


def _to_boundary(y, d, delta):
    """Positive ``t`` with ``||y + t d|| = delta``."""
    dd = float(d @ d)
    yd = float(y @ d)
    yy = float(y @ y)
    disc = yd * yd + dd * (delta * delta - yy)
    return (-yd + math.sqrt(max(disc, 0.0))) / dd


def model_value(grad, H, y):
    return float(grad @ y + 0.5 * y @ (H @ y))


class StiefelProblem:
    """Adapter exposing an :class:`Objective` to the generic trust-region loop."""

    def __init__(self, obj, cfg):
        self.obj = obj
        self.cfg = cfg
        self.dof = obj.dof

    def cost(self, Xs):
        return cost(Xs, self.obj)

    def model(self, Xs):
        f, egrads, _ = _gradient_pass(Xs, self.obj)
        rgrads = riemannian_gradients(Xs, egrads, self.obj.metric)
        frame = _Frame(Xs, self.obj)
        g = frame.to_params(rgrads) * np.sqrt(frame.weights)
        H = build_hessian(Xs, self.obj, self.cfg.hess_fd_step, self.cfg.hessian_cap, rgrads, frame)
        return f, g, H, frame

    def retract(self, Xs, y, frame):
        Zs = frame.to_tangents(y / np.sqrt(frame.weights))
        return [stiefel.retract_polar(X, Z) for X, Z in zip(Xs, Zs)]


def trust_region_solve(problem, x0, cfg, callback=None):
    """Generic trust-region loop over a problem with ``cost``, ``model`` and ``retract``.

    ``callback(iteration, point, cost, accepted)`` is called after every outer step.
    """
    x = x0
    f = problem.cost(x)
    delta_max = cfg.delta_max if cfg.delta_max is not None else math.sqrt(problem.dof)
    delta = cfg.delta0 if cfg.delta0 is not None else 0.1 * math.sqrt(problem.dof)
    delta = min(delta, delta_max)
    rec = OptimRecord([f], [math.nan], [delta], [True], [math.nan])
    for it in range(cfg.max_outer):
        if f < cfg.cost_tol:
            rec.stop_reason = "cost_tol"
            break
        _, g, H, aux = problem.model(x)
        gnorm = float(np.linalg.norm(g))
        rec.grad_norms[-1] = gnorm
        if gnorm < cfg.grad_tol:
            rec.stop_reason = "grad_tol"
            break
        y, reason = tcg_solve(g, H, delta, cfg.cg_kappa, cfg.cg_theta)
        decrease = -model_value(g, H, y)
        candidate = problem.retract(x, y, aux)
        f_new = problem.cost(candidate)
        reg = max(1.0, abs(f)) * np.finfo(float).eps * 1e3
        rho = (f - f_new + reg) / (decrease + reg)
        accept = rho >= cfg.rho_accept
        if not accept or rho < cfg.rho_shrink:
            delta *= cfg.shrink
        elif rho > cfg.rho_good:
            delta = min(cfg.grow * delta, delta_max)
        if accept:
            x, f = candidate, f_new
        logger.info(
            "iter %d cost %.6e rho %.3f delta %.3e %s (%s)",
            it + 1, f, rho, delta, "accept" if accept else "reject", reason,
        )
        rec.cost_history.append(f)
        rec.rho_history.append(float(rho))
        rec.radius_history.append(delta)
        rec.accepted.append(bool(accept))
        rec.grad_norms.append(math.nan)
        if callback is not None:
            callback(it + 1, x, f, bool(accept))
    rec.final = x
    return rec


def trust_region_run(obj, x0, cfg=None, callback=None):
    """Minimize ``||E - S(X)||`` from the isometry vector ``x0``."""
    cfg = cfg or TrustRegionConfig()
    problem = StiefelProblem(obj, cfg)
    rec = trust_region_solve(problem, list(x0.layers), cfg, callback)
    rec.final = x0.replace(rec.final)
    return rec
