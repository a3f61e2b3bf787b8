"""Command-line entry point: ``lindblad-riemann <command> [flags]``.

Settings come from defaults, then an optional ``key = value`` config file,
then command-line flags (flags win).  Every output file is written atomically.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import chanrep, experiments, io, lindblad, optimizer, splitting
from .exceptions import ChannelError, ConfigError, NumericError
from .stiefel import MetricParams

logger = logging.getLogger("lindblad_riemann")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("optimize", "benchmark", "ranks", "embed", "metrics", "converge")


@dataclass
class RunConfig:
    model: str = "pspl"
    tau: float = 1.0
    n_tau: int = 1
    sites: int = 4
    rank: int = 10
    iters: int = 100
    alpha0: float = 1.0
    alpha1: float = 0.5
    directions: str = "canonical"
    seed: int = 0
    samples: int = experiments.DEFAULT_SAMPLES
    choi_tol: float = chanrep.NATURAL_RANK_TOL
    hess_fd_step: float = 1e-6
    gamma: float = 1.0
    n_taus: str = "1,2,4,8"
    ranks: str = "2,5,10,16"
    target_sites: int = 6
    out_dir: str = "results"

    def validate(self):
        lindblad.as_model(self.model, self.gamma)
        if self.model.lower() == "kitaev-literal":
            logger.warning("model 'kitaev-literal' is a diagnostic variant")
        if not self.tau >= 0:
            raise ConfigError("tau", f"must be >= 0, got {self.tau}")
        for name in ("n_tau", "iters", "samples", "rank", "sites", "target_sites"):
            value = getattr(self, name)
            if value < (0 if name == "iters" else 1):
                raise ConfigError(name, f"out of range: {value}")
        if self.sites % 2 or self.sites < 2:
            raise ConfigError("sites", f"must be even and >= 2, got {self.sites}")
        if self.directions not in optimizer.DIRECTIONS:
            raise ConfigError("directions", f"choose from {optimizer.DIRECTIONS}")
        if not 0 < self.choi_tol < 1:
            raise ConfigError("choi_tol", f"must lie in (0, 1), got {self.choi_tol}")
        self.metric
        self.n_tau_list
        self.rank_list
        return self

    @property
    def metric(self):
        return MetricParams(self.alpha0, self.alpha1)

    @property
    def n_tau_list(self):
        return _int_list("n_taus", self.n_taus)

    @property
    def rank_list(self):
        return _int_list("ranks", self.ranks)

    def trust_region(self):
        return optimizer.TrustRegionConfig(max_outer=self.iters, hess_fd_step=self.hess_fd_step)


def _int_list(name, text):
    try:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(name, f"expected comma-separated integers, got {text!r}") from exc
    if not values or min(values) < 1:
        raise ConfigError(name, f"expected positive integers, got {text!r}")
    return values


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name, value):
    kind = type(getattr(RunConfig(), name))
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"cannot parse {value!r} as {kind.__name__}") from exc


def read_config_file(path):
    """Parse a ``key = value`` file (no section headers, ``#`` comments)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise ConfigError("config", f"config file {path} not found") from exc
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    values = {}
    for key, value in parser["run"].items():
        name = key.replace("-", "_")
        if name not in _FIELDS:
            raise ConfigError(name, f"unknown config key in {path}")
        values[name] = _coerce(name, value)
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lindblad-riemann",
        description="Optimize layered Kraus-channel approximations of Lindbladian dynamics.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--model", choices=lindblad.MODELS)
        p.add_argument("--tau", type=float)
        p.add_argument("--n-tau", type=int)
        p.add_argument("--sites", type=int)
        p.add_argument("--rank", type=int)
        p.add_argument("--iters", type=int)
        p.add_argument("--alpha0", type=float)
        p.add_argument("--alpha1", type=float)
        p.add_argument("--directions", choices=optimizer.DIRECTIONS)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--choi-tol", type=float)
        p.add_argument("--hess-fd-step", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--n-taus", help="comma-separated step counts")
        p.add_argument("--ranks", help="comma-separated ansatz ranks")
        p.add_argument("--target-sites", type=int, help="ring size for embed")
        p.add_argument("--out-dir")
    return parser


def resolve_config(args):
    values = read_config_file(args.config) if args.config else {}
    for name in _FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return RunConfig(**values).validate()


def _out(cfg, name):
    return Path(cfg.out_dir) / name


def _optimize(cfg, n_tau=None, sites=None, reference=None, problem=None):
    prob = problem or experiments.setup_problem(
        cfg.model, cfg.tau, n_tau or cfg.n_tau, cfg.rank, sites or cfg.sites, cfg.gamma,
        cfg.metric, cfg.directions, reference,
    )
    rec = optimizer.trust_region_run(prob.objective, prob.start, cfg.trust_region())
    return prob, rec


def cmd_optimize(cfg):
    prob, rec = _optimize(cfg)
    rows = [
        (i, c, r, d, a)
        for i, (c, r, d, a) in enumerate(
            zip(rec.cost_history, rec.rho_history, rec.radius_history, rec.accepted)
        )
    ]
    io.write_csv(_out(cfg, "cost_history.csv"), "cost_history",
                 ["iter", "cost", "rho", "delta", "accepted"], rows)
    io.save_archive(_out(cfg, "isometries.bin"), rec.final, prob.model.name, cfg.tau,
                    cfg.sites, cfg.metric)
    summary = {
        "config": asdict(cfg),
        "initial": rec.initial_cost,
        "final": rec.final_cost,
        "trotter_baseline": prob.trotter_error,
        "dof": prob.objective.dof,
        "iterations": rec.iterations,
        "stop_reason": rec.stop_reason,
    }
    io.write_json(_out(cfg, "summary.json"), summary)
    print(f"initial {rec.initial_cost:.6e}  final {rec.final_cost:.6e}  "
          f"trotter {prob.trotter_error:.6e}  dof {prob.objective.dof}")
    return rec


def cmd_benchmark(cfg):
    reference = splitting.exact_superop(cfg.model, cfg.tau, cfg.sites, cfg.gamma)
    rows = []
    for n_tau in cfg.n_tau_list:
        prob, rec = _optimize(cfg, n_tau=n_tau, reference=reference)
        trotter = splitting.trotter_superop(cfg.model, cfg.tau, n_tau, cfg.sites, cfg.gamma)
        schemes = (("trotter", trotter), ("riemannian", splitting.compose_global(rec.final, cfg.sites)))
        for scheme, superop in schemes:
            err = experiments.average_error(superop, reference, cfg.samples, cfg.seed)
            rows.append((n_tau, scheme, err, cfg.samples, cfg.seed))
    io.write_csv(_out(cfg, "benchmark.csv"), "benchmark",
                 ["n_tau", "scheme", "avg_error", "n_samples", "seed"], rows)
    return rows


def cmd_ranks(cfg):
    study = experiments.rank_study(cfg.model, cfg.tau, cfg.n_tau, cfg.rank_list, cfg.iters,
                                   cfg.sites, cfg.choi_tol, cfg.trust_region())
    rows = [
        (r["rank"], r["rank_before"], r["rank_after"], r["initial_cost"], r["final_cost"])
        for r in study.rows
    ]
    io.write_csv(_out(cfg, "ranks.csv"), "ranks",
                 ["R", "R_N", "R_N_opt", "initial_cost", "final_cost"], rows)
    sweep = experiments.trotter_rank_sweep(cfg.model, cfg.tau, cfg.n_tau_list, cfg.sites,
                                           cfg.choi_tol)
    io.write_csv(_out(cfg, "trotter_ranks.csv"), "trotter_ranks", ["n_tau", "R_N"],
                 list(zip(cfg.n_tau_list, sweep)))
    return rows


def cmd_embed(cfg):
    target = cfg.target_sites
    big_ref = splitting.exact_superop(cfg.model, cfg.tau, target, cfg.gamma)
    rows = []
    for n_tau in cfg.n_tau_list:
        prob, rec = _optimize(cfg, n_tau=n_tau)
        rows.append((n_tau, cfg.sites, prob.trotter_error, rec.final_cost))
        t_err, r_err = experiments.embed_larger_N(rec.final, cfg.model, cfg.tau, target,
                                                  cfg.gamma, reference=big_ref)
        rows.append((n_tau, target, t_err, r_err))
    io.write_csv(_out(cfg, "embed.csv"), "embed",
                 ["n_tau", "sites", "trotter_error", "riemannian_error"], rows)
    return rows


def cmd_metrics(cfg):
    curves = experiments.metric_comparison(cfg.model, cfg.tau, cfg.n_tau, cfg.iters, cfg.rank,
                                           cfg.sites)
    rows = [(i, name, c) for name, costs in curves.items() for i, c in enumerate(costs)]
    io.write_csv(_out(cfg, "metrics.csv"), "metrics", ["iter", "variant", "cost"], rows)
    return curves


def cmd_converge(cfg):
    curves = experiments.convergence_study(cfg.model, cfg.tau, cfg.rank, cfg.n_tau_list,
                                           cfg.iters, cfg.sites)
    rows = [(i, n, c) for n, costs in curves.items() for i, c in enumerate(costs)]
    io.write_csv(_out(cfg, "converge.csv"), "converge", ["iter", "n_tau", "normalized_cost"], rows)
    return curves


HANDLERS = {
    "optimize": cmd_optimize,
    "benchmark": cmd_benchmark,
    "ranks": cmd_ranks,
    "embed": cmd_embed,
    "metrics": cmd_metrics,
    "converge": cmd_converge,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        HANDLERS[args.command](cfg)
    except (ConfigError, MemoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ChannelError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
