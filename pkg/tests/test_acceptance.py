"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (also collected into the
"acceptance criteria" section of the pytest summary) and then asserts it.
Criteria 6, 8 and 9 run full optimizations and take tens of minutes together.
"""

import functools
import math

import numpy as np
import pytest

from lindblad_riemann import chanrep, cli, experiments, lindblad, optimizer, splitting, stiefel
from lindblad_riemann.stiefel import CANONICAL

from conftest import ACCEPTANCE_LINES, exact_reference, local_generator, random_isometry


def report(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@functools.lru_cache(maxsize=None)
def optimized(model, tau, n_tau, rank, iters):
    prob = experiments.setup_problem(model, tau, n_tau, rank, reference=exact_reference(model, tau))
    rec = optimizer.trust_region_run(prob.objective, prob.start,
                                     optimizer.TrustRegionConfig(max_outer=iters))
    return prob, rec


def test_criterion_01_channel_roundtrip():
    worst = 0.0
    for model in ("pspl", "kitaev"):
        for tau in (0.1, 0.5, 1.0):
            S = lindblad.expm(tau * local_generator(model))
            X = chanrep.kraus_to_stiefel(chanrep.choi_to_kraus(chanrep.superop_to_choi(S)))
            worst = max(worst, np.linalg.norm(chanrep.stiefel_to_superop(X) - S))
    report(1, worst < 1e-10, f"max ||S_P(S_T(e^tD)) - e^tD||_F = {worst:.2e} (< 1e-10)")


def test_criterion_02_natural_ranks():
    ranks = {m: chanrep.natural_rank(chanrep.superop_to_choi(lindblad.expm(local_generator(m))), 1e-10)
             for m in ("pspl", "kitaev")}
    report(2, ranks == {"pspl": 10, "kitaev": 2}, f"natural ranks {ranks} (expect pspl 10, kitaev 2)")


def _rank_table(tol):
    out = {}
    out["pspl exact"] = chanrep.choi_rank(exact_reference("pspl", 1.0), tol)
    layers = splitting.build_trotter_layers(local_generator("pspl"), 1.0, 1)
    out["pspl R=2"] = chanrep.choi_rank(splitting.compose_global(splitting.build_ansatz(layers, 2), 4), tol)
    out["kitaev exact"] = chanrep.choi_rank(exact_reference("kitaev", 0.5), tol)
    layers = splitting.build_trotter_layers(local_generator("kitaev"), 0.5, 4)
    for R in (2, 4, 8, 16):
        x = splitting.build_ansatz(layers, R)
        out[f"kitaev R={R}"] = chanrep.choi_rank(splitting.compose_global(x, 4), tol)
    for n_tau, r in zip((1, 2), experiments.trotter_rank_sweep("kitaev", 1.0, [1, 2], tol=tol)):
        out[f"kitaev trotter n_tau={n_tau}"] = r
    return out


RANK_TABLE = {
    "pspl exact": 256, "pspl R=2": 53, "kitaev exact": 45,
    "kitaev R=2": 45, "kitaev R=4": 45, "kitaev R=8": 45, "kitaev R=16": 45,
    "kitaev trotter n_tau=1": 36, "kitaev trotter n_tau=2": 45,
}


def test_criterion_03_rank_tables():
    default = _rank_table(chanrep.NATURAL_RANK_TOL)
    mismatches = {k: v for k, v in default.items() if v != RANK_TABLE[k]}
    stable = [tol for tol in (1e-12, 1e-11, 1e-10, 1e-9, 1e-8) if _rank_table(tol) == RANK_TABLE]
    report(3, not mismatches, f"{len(RANK_TABLE)} rank integers at tol 1e-10, mismatches {mismatches or 'none'}; "
           f"all integers reproduced at tol {stable}")


def test_criterion_04_dof():
    got = [optimizer.Objective(np.eye(256), splitting.layer_schedule(n), 4, 10).dof for n in (1, 4)]
    report(4, got == [450, 1350], f"DOF (m=3,R=10) and (m=9,R=10) = {got} (expect [450, 1350])")


def test_criterion_05_trotter_order():
    n_taus = np.array([4, 8, 16, 32])
    ref = exact_reference("kitaev", 1.0)
    errs = [splitting.trotter_error("kitaev", 1.0, int(n), 4, reference=ref) for n in n_taus]
    slope = -np.polyfit(np.log(n_taus), np.log(errs), 1)[0]
    report(5, abs(slope - 2.0) <= 0.3, f"Trotter log-log slope {slope:.3f} (expect 2.0 +- 0.3)")


def test_criterion_06_optimizer_efficacy():
    prob, rec = optimized("pspl", 1.0, 1, 10, 100)
    pspl_ratio = rec.final_cost / prob.trotter_error
    prob5, rec5 = optimized("pspl", 1.0, 1, 5, 50)
    crossing = next((i for i, c in enumerate(rec5.cost_history) if c < prob5.trotter_error), None)
    probk, reck = optimized("kitaev", 0.5, 4, 2, 60)
    kit_ratio = reck.final_cost / reck.initial_cost
    ok = pspl_ratio <= 0.2 and crossing is not None and 0.25 < kit_ratio < 0.85
    report(6, ok, f"PSPL R=10 final/Trotter {pspl_ratio:.4f} (<= 0.2); PSPL R=5 below Trotter at "
           f"iteration {crossing} (<= 50); Kitaev final/initial {kit_ratio:.4f} (in (0.25, 0.85))")


def test_criterion_07_property_suite():
    rng = np.random.default_rng(7)
    checks = {}
    prob = experiments.setup_problem("pspl", 1.0, 1, 2, reference=exact_reference("pspl", 1.0))
    obj, Xs = prob.objective, list(prob.start.layers)

    X = random_isometry(rng, 12, 4)
    Y = rng.standard_normal(X.shape)
    P = stiefel.project_tangent(Y, X)
    checks["projection"] = (np.linalg.norm(stiefel.project_tangent(P, X) - P) < 1e-12
                            and abs(np.sum(P * (Y - P))) < 1e-12)

    tangents = [stiefel.project_tangent(rng.standard_normal(Z.shape), Z) for Z in Xs]
    retracted = [stiefel.retract_polar(Z, 0.7 * T) for Z, T in zip(Xs, tangents)]
    checks["retraction isometry"] = max(np.linalg.norm(R.T @ R - np.eye(4)) for R in retracted) < 1e-12

    rgrads = optimizer.riemannian_gradients(Xs, optimizer.ambient_gradient(Xs, obj), CANONICAL)
    worst = 0.0
    for _ in range(10):
        Z = [stiefel.project_tangent(rng.standard_normal(A.shape), A) for A in Xs]
        t = 1e-5
        fp = optimizer.cost([stiefel.retract_polar(A, t * z) for A, z in zip(Xs, Z)], obj)
        fm = optimizer.cost([stiefel.retract_polar(A, -t * z) for A, z in zip(Xs, Z)], obj)
        inner = sum(stiefel.metric_inner(g, z, A) for g, z, A in zip(rgrads, Z, Xs))
        worst = max(worst, abs(inner - (fp - fm) / (2 * t)) / abs(inner))
    checks["gradient vs FD"] = worst < 1e-5

    H = optimizer.build_hessian(Xs, obj, symmetrize=False)
    checks["Hessian symmetry"] = np.linalg.norm(H - H.T) / np.linalg.norm(H) < 1e-4

    Z = [stiefel.project_tangent(rng.standard_normal(A.shape), A) for A in Xs]
    norm = math.sqrt(sum(stiefel.metric_inner(z, z, A) for z, A in zip(Z, Xs)))
    Z = [z / norm for z in Z]
    hz = optimizer.hess_vec(Xs, Z, obj)
    accel = [stiefel.project_tangent(-A @ (z.T @ z) + stiefel.connection_terms(z, z, A), A)
             for A, z in zip(Xs, Z)]
    g1 = sum(stiefel.metric_inner(g, z, A) for g, z, A in zip(rgrads, Z, Xs))
    h2 = sum(stiefel.metric_inner(h, z, A) + stiefel.metric_inner(g, a, A)
             for h, z, g, a, A in zip(hz, Z, rgrads, accel, Xs))
    f0 = optimizer.cost(Xs, obj)
    rem = [abs(optimizer.cost([stiefel.retract_polar(A, t * z) for A, z in zip(Xs, Z)], obj)
               - (f0 + t * g1 + 0.5 * t * t * h2)) for t in (1e-1, 1e-2)]
    checks["Taylor O(t^3)"] = rem[1] < rem[0] / 300

    rec = optimizer.trust_region_run(obj, prob.start, optimizer.TrustRegionConfig(max_outer=5))
    c = rec.cost_history
    checks["accepted monotone"] = all(b <= a + 1e-12 for a, b in zip(c, c[1:]))

    vec_identity = np.eye(16).ravel()
    instances = [prob.start, rec.final,
                 splitting.build_ansatz(splitting.build_trotter_layers(local_generator("kitaev"), 0.5, 4), 2)]
    tp = max(np.max(np.abs(vec_identity @ splitting.compose_global(x, 4) - vec_identity)) for x in instances)
    checks["trace preservation"] = tp < 1e-10
    checks["rank bound"] = all(chanrep.choi_rank(splitting.compose_global(x, 4)) <= x.rank ** (2 * x.schedule.m)
                               for x in instances)
    failed = [k for k, v in checks.items() if not v]
    report(7, not failed, f"{len(checks)} properties checked, failed: {failed or 'none'}")


def test_criterion_08_embedding():
    rows = []
    ok = True
    for model, rank in (("kitaev", 2), ("pspl", 10)):
        big_ref = splitting.exact_superop(model, 1.0, 6)
        for n_tau in (1, 2):
            iters = 100 if (model, n_tau) == ("pspl", 1) else 30
            prob, rec = optimized(model, 1.0, n_tau, rank, iters)
            t6, r6 = experiments.embed_larger_N(rec.final, model, 1.0, 6, reference=big_ref)
            ok &= r6 < t6
            row = f"{model} n_tau={n_tau}: N4 {rec.final_cost:.3e}, N6 riem {r6:.3e} < trotter {t6:.3e}"
            if model == "kitaev":
                spread = math.log10(r6 / rec.final_cost)
                ok &= abs(spread) < 0.5
                row += (f", |log10 N6/N4| {abs(spread):.2f} (< 0.5; Trotter grows by "
                        f"{math.log10(t6 / prob.trotter_error):.2f})")
            rows.append(row)
        del big_ref
    report(8, ok, "; ".join(rows))


def test_criterion_09_metric_study():
    curves = experiments.metric_comparison("kitaev", 0.5, 4, 20)
    final = {k: v[-1] for k, v in curves.items()}
    ok = (final["canonical"] <= final["euclidean"]
          and final["euclidean-projected"] == max(final.values()))
    report(9, ok, "final costs " + ", ".join(f"{k} {v:.4e}" for k, v in final.items()))


def test_criterion_10_determinism(tmp_path):
    args = ["--model", "kitaev", "--tau", "0.5", "--n-tau", "1", "--rank", "2", "--iters", "3",
            "--samples", "20", "--seed", "5", "--n-taus", "1,2"]
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        for command in ("optimize", "benchmark", "converge"):
            assert cli.main([command, *args, "--out-dir", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same = outputs[0] == outputs[1] and len(outputs[0]) == 3
    report(10, same, f"{len(outputs[0])} CSV files byte-identical across two runs: {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
