"""The desk-scale acceptance suite: thirteen seeded, self-checking experiments.

Each ``criterion_*`` function takes a base seed, runs its experiment over
seeds derived from it and returns a :class:`CriterionResult`.  The CLI
``bench`` command and the test suite both call :func:`run_suite`.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os
import time
import warnings

import numpy as np

from . import apps, cur, datasets, linalg, randsvd, regression, sketch, spsd
from .sketch import SketchSpec

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_suite", "derived_seeds",
           "fact_checks"]

N_SEEDS = 50


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict
    parameters: dict = field(default_factory=dict)
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:>2} {self.name}: {self.detail}"


def derived_seeds(base, count, stream):
    """``count`` independent 32-bit seeds for one criterion."""
    ss = np.random.SeedSequence([int(base) & (2**64 - 1), stream])
    return [int(x) for x in ss.generate_state(count, np.uint32)]


def _quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kwargs)


def _rate(flags):
    return float(np.mean(np.asarray(flags, dtype=bool)))


# ---------------------------------------------------------------- criteria

def criterion_subspace_embedding(seed):
    A = datasets.gaussian_matrix(10, 2000, derived_seeds(seed, 1, 100)[0])
    ops = {
        "gaussian": lambda t: SketchSpec("gaussian", 100, t),
        "count_sketch": lambda t: SketchSpec("count_sketch", 1000, t),
        "srht": lambda t: SketchSpec("srht", 400, t),
        "combined": lambda t: SketchSpec("combined", 800, t,
                                         stage2=SketchSpec("gaussian", 200, t + 1)),
    }
    metrics, parts, ok = {}, [], True
    for j, (name, make) in enumerate(ops.items()):
        gam = np.array([sketch.estimate_gamma(A, make(t), trials=100, seed=t + 7)
                        for t in derived_seeds(seed, N_SEEDS, 1 + j)])
        rate = _rate(gam <= 1.5)
        metrics[f"{name}_pass_rate"] = rate
        metrics[f"{name}_gamma_max"] = float(gam.max())
        ok &= rate >= 0.9
        parts.append(f"{name} {rate:.2f}")
    return CriterionResult(1, "subspace embedding", ok, metrics,
                           {"m": 10, "n": 2000, "trials": 100, "seeds": N_SEEDS},
                           "pass rate (need >=0.90): " + ", ".join(parts))


def criterion_low_rank_property(seed):
    A = datasets.powerlaw_matrix(200, 200, 1.0, derived_seeds(seed, 1, 200)[0])
    k, eps = 10, 0.1
    s = math.ceil(k / eps) + 1
    etas = []
    for t in derived_seeds(seed, N_SEEDS, 2):
        C = sketch.apply_sketch(A, SketchSpec("gaussian", s, t))
        etas.append(sketch.estimate_eta(A, C, k)[1])
    mean = float(np.mean(etas))
    return CriterionResult(2, "low-rank property", mean <= 1.2,
                           {"eta_best_mean": mean, "eta_best_max": float(np.max(etas))},
                           {"k": k, "s": s, "seeds": N_SEEDS},
                           f"mean eta_best {mean:.3f} (need <=1.2)")


def criterion_sketched_lsr(seed):
    ratios = []
    for t in derived_seeds(seed, N_SEEDS, 3):
        A, b, _ = datasets.noisy_lsr(2000, 10, 1.0, t)
        best = regression.lsr_exact(A, b).objective
        sol = regression.lsr_sketched(A, b, SketchSpec("count_sketch", 500, t + 1))
        ratios.append(sol.objective / best)
    ratios = np.array(ratios)
    rate = _rate(ratios <= 1.21)
    return CriterionResult(3, "sketched least squares", rate >= 0.9,
                           {"objective_ratio_max": float(ratios.max()), "pass_rate": rate},
                           {"n": 2000, "d": 10, "s": 500, "seeds": N_SEEDS},
                           f"ratio<=1.21 in {rate:.2f} of seeds (need >=0.90)")


def criterion_preconditioning(seed):
    n, d, eps = 2000, 20, 1e-8
    budget = regression.iteration_budget(eps)
    kappas, errs, iters = [], [], []
    for t in derived_seeds(seed, N_SEEDS, 4):
        A, b, _ = datasets.conditioned_lsr(n, d, 1e6, 1e-3, t)
        spec = SketchSpec("count_sketch", d * d, t + 1)
        sol = regression.lsr_preconditioned(A, b, eps=eps, spec=spec, report_kappa=True)
        x = regression.lsr_exact(A, b).x
        kappas.append(sol.kappa_estimate)
        errs.append(np.linalg.norm(sol.x - x) / np.linalg.norm(x))
        iters.append(sol.iterations)
    rate = _rate(np.array(kappas) <= 2.0)
    ok = rate >= 0.9 and max(errs) <= 1e-8 and max(iters) <= budget
    return CriterionResult(4, "preconditioned least squares", ok,
                           {"kappa_pass_rate": rate, "kappa_max": float(max(kappas)),
                            "solution_error_max": float(max(errs)),
                            "iterations_max": float(max(iters)), "budget": float(budget)},
                           {"n": n, "d": d, "s": d * d, "cond": 1e6, "eps": eps},
                           f"kappa<=2 in {rate:.2f}; max rel err {max(errs):.1e}; "
                           f"max iters {max(iters)}/{budget}")


def criterion_prototype_ksvd(seed):
    k, eps = 10, 0.2
    s = math.ceil(k / eps)
    A = datasets.powerlaw_matrix(200, 200, 1.0, derived_seeds(seed, 1, 500)[0])
    tail = np.sum(linalg.full_svd(A).s[k:] ** 2)
    ratios, passes = [], []
    for t in derived_seeds(seed, N_SEEDS, 5):
        res = randsvd.prototype_ksvd(A, k, s, t, evaluate=True)
        ratios.append(res.error_fro ** 2 / tail)
        passes.append(res.passes_over_A)
    exact = []
    for t in derived_seeds(seed, N_SEEDS, 6):
        B = datasets.low_rank_matrix(200, 200, k, t)
        res = randsvd.prototype_ksvd(B, k, k + 8, t, SketchSpec("gaussian", k + 8, t + 1),
                                     evaluate=True)
        exact.append(res.error_fro <= 1e-8 * np.linalg.norm(B))
        passes.append(res.passes_over_A)
    mean = float(np.mean(ratios))
    exact_rate = _rate(exact)
    ok = mean <= 1 + eps and exact_rate >= 0.95 and set(passes) == {2}
    return CriterionResult(5, "prototype k-SVD", ok,
                           {"ratio_mean": mean, "exact_recovery_rate": exact_rate,
                            "passes_max": float(max(passes))},
                           {"k": k, "s": s, "shape": "200x200", "seeds": N_SEEDS},
                           f"mean ratio {mean:.3f} (need <=1.2); exact recovery {exact_rate:.2f}; "
                           f"passes {sorted(set(passes))}")


def criterion_faster_ksvd(seed):
    k = 5
    s, p, p_cs = randsvd.faster_ksvd_defaults(k)
    A = datasets.powerlaw_matrix(500, 500, 1.0, derived_seeds(seed, 1, 600)[0])
    tail = np.sum(linalg.full_svd(A).s[k:] ** 2)
    ratios, passes = [], []
    for t in derived_seeds(seed, N_SEEDS, 7):
        res = _quiet(randsvd.faster_ksvd, A, k, s, p_cs, p, t, evaluate=True)
        ratios.append(res.error_fro ** 2 / tail)
        passes.append(res.passes_over_A)
    bound = 1.25 ** 3
    rate = _rate(np.array(ratios) <= bound)
    ok = rate >= 0.8 and set(passes) == {2}
    return CriterionResult(6, "faster k-SVD", ok,
                           {"pass_rate": rate, "ratio_max": float(max(ratios)),
                            "passes_max": float(max(passes))},
                           {"k": k, "s": s, "p": p, "p_cs": p_cs, "shape": "500x500"},
                           f"ratio<={bound:.3f} in {rate:.2f} of seeds (need >=0.80); "
                           f"passes {sorted(set(passes))}")


def criterion_block_lanczos(seed):
    errs = []
    for t in derived_seeds(seed, N_SEEDS, 8):
        A = datasets.gaussian_matrix(100, 80, t)
        sv = linalg.full_svd(A).s
        res = _quiet(randsvd.block_lanczos_ksvd, A, 10, 30, t + 1)
        errs.append(float(np.max(np.abs(res.factors.s - sv[:10]))))
    worst = max(errs)
    return CriterionResult(7, "block Lanczos", worst <= 1e-8,
                           {"sigma_error_max": worst},
                           {"shape": "100x80", "k": 10, "q": 30, "seeds": N_SEEDS},
                           f"max singular value error {worst:.1e} (need <=1e-8)")


def criterion_smw(seed):
    worst = 0.0
    for t in derived_seeds(seed, 10, 9):
        rng = np.random.default_rng(t)
        L = rng.standard_normal((200, 20))
        y = rng.standard_normal(200)
        for alpha in (1e-2, 1.0, 1e2):
            w = spsd.smw_solve(L, alpha, y)
            ref = np.linalg.solve(L @ L.T + alpha * np.eye(200), y)
            worst = max(worst, float(np.linalg.norm(w - ref) / np.linalg.norm(ref)))
    return CriterionResult(8, "SMW inversion", worst <= 1e-8,
                           {"relative_error_max": worst},
                           {"shape": "200x20", "alpha": [1e-2, 1.0, 1e2]},
                           f"max relative error {worst:.1e} (need <=1e-8)")


def _kernel_fixture(seed):
    X = np.random.default_rng(derived_seeds(seed, 1, 900)[0]).standard_normal((400, 5))
    return X, 2.0


def criterion_faster_spsd(seed):
    X, sigma = _kernel_fixture(seed)
    K = spsd.rbf_kernel(X, X, sigma)
    s, p, n = 20, 80, X.shape[0]
    ratios, budget_ok = [], []
    for t in derived_seeds(seed, N_SEEDS, 10):
        view = spsd.KernelView(X, sigma)
        sk = _quiet(spsd.spsd_faster, view, s, p, t)
        err = np.linalg.norm(K - sk.reconstruct()) ** 2
        best = np.linalg.norm(K - sk.Q @ spsd.best_core(K, sk.Q) @ sk.Q.T) ** 2
        ratios.append(err / best)
        budget_ok.append(view.entries_evaluated <= n * s + sk.secondary.size ** 2)
    rate = _rate(np.array(ratios) <= 1.25)
    ok = rate >= 0.8 and all(budget_ok)
    return CriterionResult(9, "faster SPSD sketch", ok,
                           {"pass_rate": rate, "ratio_max": float(max(ratios)),
                            "budget_rate": _rate(budget_ok)},
                           {"n": n, "d": 5, "sigma": sigma, "s": s, "p": p},
                           f"ratio<=1.25 in {rate:.2f} of seeds (need >=0.80); "
                           f"entry budget held in {_rate(budget_ok):.2f}")


def criterion_nystrom(seed):
    exact = []
    for t in derived_seeds(seed, 20, 11):
        X = datasets.repeated_points(400, 4, 3, t)
        K = spsd.rbf_kernel(X, X, 1.5)
        F = _quiet(spsd.nystrom, K, 40, None, t + 1)
        exact.append(float(np.linalg.norm(K - F.reconstruct()) / np.linalg.norm(K)))
    X, sigma = _kernel_fixture(seed)
    K = spsd.rbf_kernel(X, X, sigma)
    e_nys, e_fast = [], []
    for t in derived_seeds(seed, N_SEEDS, 12):
        e_nys.append(np.linalg.norm(K - _quiet(spsd.nystrom, K, 20, None, t).reconstruct()))
        e_fast.append(np.linalg.norm(K - _quiet(spsd.spsd_faster, K, 20, 80, t).reconstruct()))
    m_nys, m_fast = float(np.mean(e_nys)), float(np.mean(e_fast))
    ok = max(exact) <= 1e-6 and m_nys >= m_fast
    return CriterionResult(10, "Nystrom", ok,
                           {"exact_error_max": max(exact), "nystrom_error_mean": m_nys,
                            "faster_error_mean": m_fast},
                           {"rank": 4, "s": 40, "compare_s": 20},
                           f"rank-4 recovery error {max(exact):.1e} (need <=1e-6); "
                           f"mean error nystrom {m_nys:.3f} vs faster {m_fast:.3f}")


def criterion_cur(seed):
    rng = np.random.default_rng(derived_seeds(seed, 1, 1100)[0])
    B = rng.standard_normal((60, 40))
    full = cur.cur_prototype(B, 40, 60, 0)
    full_err = float(np.linalg.norm(B - full.reconstruct()) / np.linalg.norm(B))

    A = datasets.powerlaw_matrix(300, 300, 1.0, derived_seeds(seed, 1, 1101)[0])
    ratios = []
    for t in derived_seeds(seed, N_SEEDS, 13):
        f = _quiet(cur.cur_faster, A, 15, 15, seed=t, sampler="leverage")
        best = np.linalg.norm(A - f.C @ cur.optimal_core(A, f.C, f.R) @ f.R) ** 2
        ratios.append(np.linalg.norm(A - f.reconstruct()) ** 2 / best)
    rate = _rate(np.array(ratios) <= 1.25)

    Xte = rng.standard_normal((300, 5))
    Xtr = rng.standard_normal((300, 5))
    identical, budget = [], []
    for t in derived_seeds(seed, 10, 14):
        lazy = _quiet(cur.cur_faster_kernel, Xte, Xtr, 2.0, 15, 15, t)
        dense = _quiet(cur.cur_faster, spsd.rbf_kernel(Xte, Xtr, 2.0), 15, 15, seed=t)
        identical.append(all(np.array_equal(getattr(lazy, a), getattr(dense, a))
                             for a in ("C", "U", "R")))
        limit = 300 * 15 + 300 * 15 + lazy.secondary_rows.size * lazy.secondary_cols.size
        budget.append(lazy.entries_visited <= limit)
    ok = full_err <= 1e-10 and rate >= 0.8 and all(identical) and all(budget)
    return CriterionResult(11, "CUR", ok,
                           {"full_selection_error": full_err, "pass_rate": rate,
                            "ratio_max": float(max(ratios)),
                            "bit_identical_rate": _rate(identical), "budget_rate": _rate(budget)},
                           {"shape": "300x300", "c": 15, "r": 15, "sampler": "leverage"},
                           f"full selection err {full_err:.1e}; ratio<=1.25 in {rate:.2f} "
                           f"(need >=0.80); lazy==dense {_rate(identical):.2f}; "
                           f"budget {_rate(budget):.2f}")


def criterion_applications(seed):
    accs = []
    for t in derived_seeds(seed, N_SEEDS, 15):
        data = datasets.planted_blobs(300, 3, 2, 1.0, 6.0, t)
        try:
            labels, _ = _spectral_quiet(data.points, 2.0, 3, t + 1)
            accs.append(apps.cluster_accuracy(data.labels, labels))
        except linalg.DegenerateInputError:
            accs.append(0.0)
    cluster_rate = _rate(np.array(accs) >= 0.95)

    rng = np.random.default_rng(derived_seeds(seed, 1, 1200)[0])
    Xtr = rng.standard_normal((300, 5))
    Xte = rng.standard_normal((300, 5))
    model = _quiet(apps.kpca_train, Xtr, 2.0, 3, seed=derived_seeds(seed, 1, 1201)[0])
    direct = apps.kpca_test(Xtr, Xte, 2.0, model)
    via_cur = _quiet(apps.kpca_test, Xtr, Xte, 2.0, model, True,
                     derived_seeds(seed, 1, 1202)[0])
    kpca_err = float(np.linalg.norm(direct - via_cur) / np.linalg.norm(direct))

    X = rng.uniform(-1, 1, (300, 5))
    y = np.sin(X.sum(axis=1))
    alpha = 0.1
    w_exact = np.linalg.solve(spsd.rbf_kernel(X, X, 2.0) + alpha * np.eye(300), y)
    w = apps.gpr_train(X, y, 2.0, alpha, l=150, seed=derived_seeds(seed, 1, 1203)[0])
    gpr_err = float(np.linalg.norm(w - w_exact) / np.linalg.norm(w_exact))

    ok = cluster_rate >= 0.9 and kpca_err <= 0.1 and gpr_err <= 0.1
    return CriterionResult(12, "applications", ok,
                           {"cluster_pass_rate": cluster_rate, "cluster_accuracy_min": min(accs),
                            "kpca_relative_error": kpca_err, "gpr_relative_error": gpr_err},
                           {"n": 300, "clusters": 3, "kpca_k": 3, "gpr_l": 150, "alpha": alpha},
                           f"clustering >=95% in {cluster_rate:.2f} of seeds (need >=0.90); "
                           f"KPCA CUR err {kpca_err:.1e}; GPR weight err {gpr_err:.1e}")


def _spectral_quiet(X, sigma, k, seed):
    return _quiet(apps.spectral_cluster, X, sigma, k, "faster", seed)


def fact_checks(seed):
    """Evaluate the six matrix identities on one random instance; returns name -> bool."""
    rng = np.random.default_rng(seed)
    m, n, p = 12, 7, 4
    tol = 1e-10
    Q1 = linalg.thin_qr(rng.standard_normal((m, n))).Q
    Q2 = linalg.thin_qr(rng.standard_normal((n, p))).Q
    Q = Q1 @ Q2
    out = {"orthonormal_product": np.linalg.norm(Q.T @ Q - np.eye(p)) <= tol}

    A = rng.standard_normal((m, 3)) @ rng.standard_normal((3, n))
    B = rng.standard_normal((m, 5))
    UA = linalg.condensed_svd(A).U
    P1 = A @ linalg.pseudo_inverse(A) @ B
    P2 = UA @ (UA.T @ B)
    X = np.linalg.lstsq(A, B, rcond=None)[0]
    Z = np.linalg.lstsq(UA, B, rcond=None)[0]
    scale = np.linalg.norm(B)
    out["projection"] = max(np.linalg.norm(P1 - P2), np.linalg.norm(P1 - A @ X),
                            np.linalg.norm(P1 - UA @ Z)) <= 1e-9 * scale

    k = 2
    M = rng.standard_normal((m, n))
    Qs = linalg.thin_qr(rng.standard_normal((m, 5))).Q
    F = linalg.truncated_svd(Qs.T @ M, k)
    best = np.linalg.norm(M - Qs @ F.reconstruct())
    trials = [np.linalg.norm(M - Qs @ (rng.standard_normal((5, k)) @ rng.standard_normal((k, n))))
              for _ in range(50)]
    # rank-k neighbours of the optimum
    perturbed = [np.linalg.norm(M - Qs @ ((F.U * F.s) @ (F.V + 1e-3 * rng.standard_normal(F.V.shape)).T))
                 for _ in range(20)]
    out["rank_constrained_projection"] = best <= min(trials + perturbed) + 1e-12

    Ap = linalg.pseudo_inverse(A)
    out["pseudo_inverse"] = (np.linalg.norm(A @ Ap @ A - A) <= tol * np.linalg.norm(A)
                             and np.linalg.norm(Ap @ A @ Ap - Ap) <= tol * np.linalg.norm(Ap))

    T = rng.standard_normal((m, n))
    qr = linalg.thin_qr(T)
    out["pinv_via_qr"] = np.linalg.norm(
        linalg.pseudo_inverse(T) - linalg.pseudo_inverse(qr.R) @ qr.Q.T) <= tol * 10

    C = rng.standard_normal((m, 4))
    lev = [np.einsum("ij,ij->i", W, W) for W in
           (np.linalg.qr(C)[0], linalg.thin_qr(C).Q, linalg.condensed_svd(C).U)]
    lev_c = sketch.leverage_scores(C.T)
    out["leverage_invariance"] = all(np.max(np.abs(v - lev_c)) <= tol for v in lev)
    return {name: bool(v) for name, v in out.items()}


def criterion_facts(seed):
    results = [fact_checks(t) for t in derived_seeds(seed, 20, 16)]
    names = list(results[0])
    rates = {f"{name}_pass_rate": _rate([r[name] for r in results]) for name in names}
    ok = all(v == 1.0 for v in rates.values())
    failing = [n for n in names if rates[f"{n}_pass_rate"] < 1.0]
    return CriterionResult(13, "matrix facts", ok, rates, {"instances": 20},
                           "all six identities hold on 20 instances" if ok
                           else "failing: " + ", ".join(failing))


CRITERIA = {
    1: criterion_subspace_embedding,
    2: criterion_low_rank_property,
    3: criterion_sketched_lsr,
    4: criterion_preconditioning,
    5: criterion_prototype_ksvd,
    6: criterion_faster_ksvd,
    7: criterion_block_lanczos,
    8: criterion_smw,
    9: criterion_faster_spsd,
    10: criterion_nystrom,
    11: criterion_cur,
    12: criterion_applications,
    13: criterion_facts,
}


def run_criterion(number, seed=0):
    t0 = time.perf_counter()
    res = CRITERIA[number](seed)
    res.metrics["elapsed_ms"] = 1000.0 * (time.perf_counter() - t0)
    return res


def _threads():
    try:
        return max(1, int(os.environ.get("RANDNLA_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(seed=0, numbers=None, threads=None):
    """Run the selected criteria (all by default), in order, on up to ``threads`` workers.

    ``threads`` defaults to the ``RANDNLA_THREADS`` environment variable.
    Every criterion derives its own seeds, so results do not depend on the
    worker count.
    """
    numbers = sorted(CRITERIA) if numbers is None else list(numbers)
    threads = _threads() if threads is None else max(1, int(threads))
    if threads == 1:
        return [run_criterion(n, seed) for n in numbers]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda n: run_criterion(n, seed), numbers))
