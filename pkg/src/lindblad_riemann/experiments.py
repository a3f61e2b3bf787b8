"""Rank studies, scheme comparisons, larger-system embedding and convergence runs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import chanrep, lindblad, optimizer, splitting
from .exceptions import ConfigError, MemoryCapError
from .stiefel import CANONICAL, EUCLIDEAN, MetricParams

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 500


@dataclass
class Problem:
    """Everything needed to optimize one (model, tau, n_tau, N, R) instance."""

    objective: optimizer.Objective
    start: splitting.IsometryVector
    trotter_error: float
    model: lindblad.LindbladModel
    tau: float

    @property
    def initial_cost(self):
        return optimizer.cost(self.start, self.objective)


def setup_problem(model, tau, n_tau, rank, sites=4, gamma=1.0, metric=CANONICAL,
                  directions="canonical", reference=None):
    """Reference channel, Trotter-initialized ansatz and objective for one instance."""
    model = lindblad.as_model(model, gamma)
    if reference is None:
        reference = splitting.exact_superop(model, tau, sites)
    generator = lindblad.local_dissipator(model.jump_ops)
    layers = splitting.build_trotter_layers(generator, tau, n_tau)
    start = splitting.build_ansatz(layers, rank)
    trotter = splitting.compose_superops(layers, start.schedule.offsets, sites)
    obj = optimizer.Objective(reference, start.schedule, sites, rank, metric, directions)
    return Problem(obj, start, float(np.linalg.norm(reference - trotter)), model, tau)


def random_density_matrix(dim, seed):
    """Real Ginibre density matrix ``A A^T / tr(A A^T)``."""
    if int(dim) != dim or dim < 1:
        raise ConfigError("dim", f"dimension must be a positive integer, got {dim}")
    A = np.random.default_rng(seed).standard_normal((int(dim), int(dim)))
    rho = A @ A.T
    return rho / np.trace(rho)


def average_error(scheme_superop, reference, n_samples, seed):
    """Mean Frobenius distance between the two channels' outputs over random states.

    Sample ``k`` uses the density matrix generated with seed ``(seed, k)``.
    """
    S = np.asarray(scheme_superop, dtype=float)
    E = np.asarray(reference, dtype=float)
    if S.shape != E.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ConfigError("scheme_superop", f"shape {S.shape} does not match reference {E.shape}")
    if n_samples < 1:
        raise ConfigError("samples", f"need at least one sample, got {n_samples}")
    dim = int(round(np.sqrt(S.shape[0])))
    diff = E - S
    rhos = np.stack([random_density_matrix(dim, [seed, k]).ravel() for k in range(n_samples)])
    return float(np.mean(np.linalg.norm(rhos @ diff.T, axis=1)))


@dataclass
class RankStudyResult:
    model: str
    tau: float
    n_tau: int
    rows: list = field(default_factory=list)

    def column(self, name):
        return [row[name] for row in self.rows]


def rank_study(model, tau, n_tau, ranks, iters, sites=4, tol=chanrep.NATURAL_RANK_TOL,
               config=None):
    """Optimize per ansatz rank and record costs and full Choi ranks before and after."""
    local = splitting.LOCAL_DIM**4
    bad = [R for R in ranks if not 2 <= R <= local]
    if bad:
        raise ConfigError("rank", f"ranks must lie in [2, {local}], got {bad}")
    reference = splitting.exact_superop(model, tau, sites)
    cfg = config or optimizer.TrustRegionConfig(max_outer=iters)
    result = RankStudyResult(lindblad.as_model(model).name, tau, n_tau)
    for R in sorted(ranks):
        prob = setup_problem(model, tau, n_tau, R, sites, reference=reference)
        before = chanrep.choi_rank(splitting.compose_global(prob.start, sites), tol)
        rec = optimizer.trust_region_run(prob.objective, prob.start, cfg)
        after = chanrep.choi_rank(splitting.compose_global(rec.final, sites), tol)
        result.rows.append({
            "rank": R,
            "initial_cost": rec.initial_cost,
            "final_cost": rec.final_cost,
            "rank_before": before,
            "rank_after": after,
            "rank_bound": R ** (2 * prob.start.schedule.m),
        })
    return result


def trotter_rank_sweep(model, tau, n_taus, sites=4, tol=chanrep.NATURAL_RANK_TOL):
    """Full Choi rank of the exact-layer Trotter composite for each ``n_tau``."""
    return [
        chanrep.choi_rank(splitting.trotter_superop(model, tau, n, sites), tol) for n in n_taus
    ]


def embed_larger_N(xvec, model, tau, sites, gamma=1.0, max_side=lindblad.DEFAULT_MAX_SIDE,
                   reference=None):
    """Errors of the Trotter and optimized schemes on a larger ring.

    The per-layer isometries of ``xvec`` are reused unchanged on every pair of
    the ``sites``-site ring; this relies on translational invariance with
    periodic boundaries.

    Returns
    -------
    trotter_error, riemannian_error : float
    """
    if sites < 4 or sites % 2:
        raise ConfigError("sites", f"target size must be even and >= 4, got {sites}")
    side = splitting.LOCAL_DIM ** (2 * sites)
    if side > max_side:
        raise MemoryCapError(f"superoperator side {side} exceeds the cap {max_side}")
    if reference is None:
        reference = splitting.exact_superop(model, tau, sites, gamma, max_side)
    trotter = splitting.trotter_superop(model, tau, xvec.schedule.n_tau, sites, gamma)
    t_err = float(np.linalg.norm(reference - trotter))
    del trotter
    r_err = float(np.linalg.norm(reference - splitting.compose_global(xvec, sites)))
    return t_err, r_err


METRIC_VARIANTS = (
    ("euclidean-projected", EUCLIDEAN, "projected-unit"),
    ("euclidean", EUCLIDEAN, "canonical"),
    ("canonical", CANONICAL, "canonical"),
)


def metric_comparison(model, tau, n_tau, iters, rank=2, sites=4):
    """Cost trajectories for the three metric / direction combinations.

    Returns a dict keyed by variant name; every trajectory starts at the
    shared ansatz cost.
    """
    reference = splitting.exact_superop(model, tau, sites)
    out = {}
    for name, metric, directions in METRIC_VARIANTS:
        prob = setup_problem(model, tau, n_tau, rank, sites, metric=metric,
                             directions=directions, reference=reference)
        rec = optimizer.trust_region_run(prob.objective, prob.start,
                                         optimizer.TrustRegionConfig(max_outer=iters))
        out[name] = _pad(rec.cost_history, iters)
    return out


def convergence_study(model, tau, rank, n_taus, iters, sites=4):
    """Normalized trajectories ``f(X^b) / f(X^0)`` per number of time steps."""
    reference = splitting.exact_superop(model, tau, sites)
    out = {}
    for n_tau in n_taus:
        prob = setup_problem(model, tau, n_tau, rank, sites, reference=reference)
        rec = optimizer.trust_region_run(prob.objective, prob.start,
                                         optimizer.TrustRegionConfig(max_outer=iters))
        costs = np.asarray(_pad(rec.cost_history, iters))
        out[n_tau] = list(costs / costs[0])
    return out


def _pad(history, iters):
    """Extend an early-stopped history with its last value up to ``iters + 1`` entries."""
    history = list(history)
    return history + [history[-1]] * (iters + 1 - len(history))


def metric_from(alpha0, alpha1):
    return MetricParams(float(alpha0), float(alpha1))
