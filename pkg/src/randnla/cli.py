"""``randnla`` command line: seeded runs of every algorithm with JSON-lines reports.

Each invocation prints one JSON report per line on stdout and a short
human-readable summary on stderr.  Exit status is 0 when every report is
``ok``, 2 when any is ``flagged`` and 1 on error.
"""

import argparse
import json
import math
import sys
import time
import warnings

import numpy as np

from . import __version__, acceptance, apps, bench, cur, datasets, io, randsvd, regression
from . import sketch, spsd
from .linalg import RankDeficientWarning
from .randsvd import KrylovCollapseWarning
from .sketch import SketchSpec

__all__ = ["main", "build_parser", "RunReport"]

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2
SEED_MAX = 2**64 - 1

_METHOD_KINDS = {
    "gaussian": "gaussian",
    "srht": "srht",
    "count-sketch": "count_sketch",
    "combined": "combined",
    "uniform": "uniform_columns",
    "leverage": "leverage_columns",
    "landmark": "landmark_columns",
}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with status 1, keeping 2 for flagged results."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


class RunReport:
    def __init__(self, command, seed, parameters=None):
        self.command = command
        self.seed = seed
        self.parameters = dict(parameters or {})
        self.metrics = {}
        self.status = "ok"
        self.notes = []

    def metric(self, name, value):
        self.metrics[name] = float(value)

    def flag(self, note):
        if self.status == "ok":
            self.status = "flagged"
        self.notes.append(note)

    def to_dict(self):
        bad = [k for k, v in self.metrics.items() if not math.isfinite(v)]
        if bad:
            self.status = "error"
            self.notes.append("non-finite metrics: " + ", ".join(bad))
            self.metrics = {k: v for k, v in self.metrics.items() if math.isfinite(v)}
        out = {"command": self.command, "seed": self.seed, "parameters": self.parameters,
               "metrics": self.metrics, "status": self.status}
        if self.notes:
            out["notes"] = self.notes
        return out


# ---------------------------------------------------------------- helpers

def _load(path, what):
    if path is None:
        raise CliError(f"missing required input: {what}")
    return io.load_matrix(path)


def _need_seed(args):
    if args.seed is None:
        raise CliError(f"--seed is required for '{args.command}'")
    return args.seed


def _spec(method, s, seed, cs_size=None):
    kind = _METHOD_KINDS[method]
    if kind == "combined":
        return SketchSpec("combined", cs_size or 4 * s, seed,
                          stage2=SketchSpec("gaussian", s, seed + 1 if seed < SEED_MAX else 0))
    return SketchSpec(kind, s, seed)


def _save(args, M):
    if args.output:
        io.save_matrix(M, args.output)


def _kernel_input(args):
    """An entry source from ``--data`` points (lazy kernel) or ``--input`` matrix."""
    if args.data is not None:
        if args.sigma is None:
            raise CliError("--sigma is required with --data")
        X = io.load_matrix(args.data)
        return spsd.KernelView(X, args.sigma), X
    if args.input is not None:
        return spsd.as_entry_source(io.load_matrix(args.input)), None
    raise CliError("missing required input: --data or --input")


# ---------------------------------------------------------------- commands

def cmd_sketch(args, report):
    seed = _need_seed(args)
    A = _load(args.input, "--input")
    spec = _spec(args.method, args.sketch_size, seed, args.cs_size)
    C = sketch.apply_sketch(A, spec)
    report.parameters.update(method=args.method, sketch_size=args.sketch_size)
    report.metric("rows", C.shape[0])
    report.metric("cols", C.shape[1])
    _save(args, C)


def cmd_verify(args, report):
    seed = _need_seed(args)
    if args.input is not None:
        A = io.load_matrix(args.input)
    elif args.property == "subspace-embedding":
        A = datasets.gaussian_matrix(args.m, args.n, seed)
    else:
        A = datasets.powerlaw_matrix(args.m, args.n, 1.0, seed)
    spec = _spec(args.method, args.s, seed, args.cs_size)
    report.parameters.update(property=args.property, method=args.method, s=args.s,
                             shape=list(A.shape))
    if args.property == "subspace-embedding":
        report.parameters["trials"] = args.trials
        report.metric("gamma", sketch.estimate_gamma(A, spec, args.trials, seed))
    else:
        report.parameters["k"] = args.k
        proj, best = sketch.estimate_eta(A, sketch.apply_sketch(A, spec), args.k)
        report.metric("eta", best)
        report.metric("eta_proj", proj)


def cmd_lsr(args, report):
    A = _load(args.input, "--input")
    b = _load(args.rhs, "--rhs").reshape(-1)
    exact = regression.lsr_exact(A, b)
    report.parameters.update(method=args.method, shape=list(A.shape))
    if args.method == "exact":
        sol = exact
    elif args.method == "cg":
        sol = regression.lsr_cg(A, b, tol=args.eps, maxit=args.maxit)
    elif args.method == "sketched":
        seed = _need_seed(args)
        s = args.sketch_size or min(A.shape[0], 20 * A.shape[1])
        sol = regression.lsr_sketched(A, b, SketchSpec("count_sketch", s, seed))
        report.parameters["sketch_size"] = s
    else:
        seed = _need_seed(args)
        spec = None
        if args.sketch_size:
            spec = SketchSpec("count_sketch", args.sketch_size, seed)
        sol = regression.lsr_preconditioned(A, b, eps=args.eps, seed=seed, spec=spec,
                                            method=args.solver, report_kappa=True)
        report.metric("kappa", sol.kappa_estimate)
    report.parameters["eps"] = args.eps
    report.metric("objective", sol.objective)
    report.metric("objective_ratio", sol.objective / exact.objective if exact.objective > 0
                  else float(sol.objective == 0.0))
    report.metric("iterations", sol.iterations)
    for f in sol.flags:
        report.flag(f)
    _save(args, sol.x)


def cmd_ksvd(args, report):
    seed = _need_seed(args)
    A = _load(args.input, "--input")
    k = args.k
    if args.method == "lanczos":
        res = randsvd.block_lanczos_ksvd(A, k, args.q, seed, evaluate=True)
        report.parameters["q"] = args.q
    elif args.method == "prototype":
        s = args.sketch_size or 2 * k
        res = randsvd.prototype_ksvd(A, k, s, seed, evaluate=True)
        report.parameters["sketch_size"] = s
    else:
        res = randsvd.faster_ksvd(A, k, args.sketch_size, args.p_cs, args.p, seed, evaluate=True)
    report.parameters.update(method=args.method, k=k)
    report.metric("error_fro", res.error_fro)
    report.metric("passes", res.passes_over_A)
    tail = np.sqrt(np.sum(np.linalg.svd(A, compute_uv=False)[k:] ** 2))
    if tail > 0:
        report.metric("error_ratio", (res.error_fro / tail) ** 2)
    _save(args, res.factors.s)


def cmd_spsd(args, report):
    seed = _need_seed(args)
    src, _ = _kernel_input(args)
    s = args.sketch_size
    if args.method == "prototype":
        sk = spsd.spsd_prototype(src, s, seed)
    else:
        sk = spsd.spsd_faster(src, s, args.p, seed)
    report.parameters.update(method=args.method, sketch_size=s)
    report.metric("entries_visited", src.entries_evaluated)
    if args.evaluate:
        K = src.materialize() if args.data is None else spsd.rbf_kernel(src.points, src.points,
                                                                        args.sigma)
        report.metric("error_fro", np.linalg.norm(K - sk.reconstruct()))
    if sk.flagged:
        report.flag("rank_deficient")
    if args.output:
        _save(args, sk.reconstruct())


def cmd_nystrom(args, report):
    seed = _need_seed(args)
    src, _ = _kernel_input(args)
    F = spsd.nystrom(src, args.sketch_size, args.k, seed)
    report.parameters.update(sketch_size=args.sketch_size, k=F.k)
    report.metric("entries_visited", src.entries_evaluated)
    if args.evaluate:
        K = src.materialize() if args.data is None else spsd.rbf_kernel(src.points, src.points,
                                                                        args.sigma)
        report.metric("error_fro", np.linalg.norm(K - F.reconstruct()))
    _save(args, F.L)


def cmd_cur(args, report):
    seed = _need_seed(args)
    if args.data is not None:
        if args.test_data is None or args.sigma is None:
            raise CliError("kernel CUR needs --data, --test-data and --sigma")
        Xtr, Xte = io.load_matrix(args.data), io.load_matrix(args.test_data)
        f = cur.cur_faster_kernel(Xte, Xtr, args.sigma, args.c, args.r, seed,
                                  sampler=args.sampler)
        dense = spsd.rbf_kernel(Xte, Xtr, args.sigma) if args.evaluate else None
    else:
        A = _load(args.input, "--input")
        if args.method == "prototype":
            f = cur.cur_prototype(A, args.c, args.r, seed)
        else:
            f = cur.cur_faster(A, args.c, args.r, seed=seed, sampler=args.sampler)
        dense = A
    report.parameters.update(method=args.method, c=args.c, r=args.r, sampler=args.sampler)
    report.metric("entries_visited", f.entries_visited)
    if dense is not None:
        report.metric("error_fro", np.linalg.norm(dense - f.reconstruct()))
    if f.flagged:
        report.flag("rank_deficient")
    _save(args, f.U)


def cmd_kpca(args, report):
    seed = _need_seed(args)
    if args.data is None or args.sigma is None:
        raise CliError("kpca needs --data and --sigma")
    Xtr = io.load_matrix(args.data)
    model = apps.kpca_train(Xtr, args.sigma, args.k, args.sketch_size, seed)
    feats = model.train_features
    if args.test_data is not None:
        feats = apps.kpca_test(Xtr, io.load_matrix(args.test_data), args.sigma, model,
                               use_cur=args.cur, seed=seed)
    report.parameters.update(k=args.k, sigma=args.sigma, cur=args.cur)
    report.metric("lambda_max", model.lambdas[0])
    report.metric("lambda_min", model.lambdas[-1])
    _save(args, feats)


def cmd_cluster(args, report):
    seed = _need_seed(args)
    if args.data is None or args.sigma is None:
        raise CliError("cluster needs --data and --sigma")
    X = io.load_matrix(args.data)
    labels, _ = apps.spectral_cluster(X, args.sigma, args.k, args.method, seed,
                                      s=args.sketch_size)
    report.parameters.update(k=args.k, sigma=args.sigma, method=args.method)
    if args.labels is not None:
        truth = io.load_matrix(args.labels).reshape(-1)
        report.metric("accuracy", apps.cluster_accuracy(truth, labels))
    _save(args, labels.astype(np.float64))


def cmd_gpr(args, report):
    seed = _need_seed(args)
    if args.data is None or args.labels is None or args.sigma is None:
        raise CliError("gpr needs --data, --labels and --sigma")
    X = io.load_matrix(args.data)
    y = io.load_matrix(args.labels).reshape(-1)
    w = apps.gpr_train(X, y, args.sigma, args.alpha, args.l, seed)
    Xte = io.load_matrix(args.test_data) if args.test_data is not None else X
    pred = apps.gpr_predict(X, Xte, args.sigma, w, use_cur=args.cur, seed=seed)
    report.parameters.update(sigma=args.sigma, alpha=args.alpha, l=args.l, cur=args.cur)
    report.metric("weight_norm", np.linalg.norm(w))
    if args.test_data is None:
        report.metric("train_rmse", np.sqrt(np.mean((pred - y) ** 2)))
    _save(args, pred)


def cmd_bench(args):
    seed = _need_seed(args)
    if args.suite == "kernels":
        report = RunReport("bench", seed, {"suite": "kernels", "repeats": args.repeats})
        for case, row in bench.time_kernels(args.repeats, seed=seed).items():
            report.metric(f"{case}_numpy_ms", row["numpy"])
            if row["numba"] is not None:
                report.metric(f"{case}_numba_ms", row["numba"])
        return [report]
    numbers = args.criteria or sorted(acceptance.CRITERIA)
    reports = []
    for res in acceptance.run_suite(seed, numbers, args.threads):
        rep = RunReport("bench", seed, {"suite": "acceptance", "criterion": res.number,
                                        "name": res.name, **res.parameters})
        for k, v in res.metrics.items():
            if k != "elapsed_ms" or args.timing:
                rep.metric(k, v)
        if not res.passed:
            rep.flag(res.detail)
        reports.append(rep)
    return reports


COMMANDS = {
    "sketch": cmd_sketch, "verify": cmd_verify, "lsr": cmd_lsr, "ksvd": cmd_ksvd,
    "spsd": cmd_spsd, "nystrom": cmd_nystrom, "cur": cmd_cur, "kpca": cmd_kpca,
    "cluster": cmd_cluster, "gpr": cmd_gpr,
}


# ---------------------------------------------------------------- parser

def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64 - 1]")
    return v


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return v
    return conv


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_seed, help="random seed (required on randomized paths)")
    common.add_argument("--output", help="write the main result matrix here")
    common.add_argument("--no-timing", dest="timing", action="store_false",
                        help="omit elapsed_ms so reports are byte-reproducible")

    p = _Parser(prog="randnla", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"randnla {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    methods = sorted(_METHOD_KINDS)

    q = sub.add_parser("sketch", parents=[common], help="sketch the columns of a matrix")
    q.add_argument("--input", "-i")
    q.add_argument("--method", choices=methods, default="count-sketch")
    q.add_argument("--sketch-size", type=_positive(int), required=True)
    q.add_argument("--cs-size", type=_positive(int), help="first-stage size for 'combined'")

    q = sub.add_parser("verify", parents=[common], help="measure an embedding property")
    q.add_argument("--property", choices=["subspace-embedding", "low-rank"], required=True)
    q.add_argument("--method", choices=methods, default="gaussian")
    q.add_argument("--input", "-i")
    q.add_argument("--m", type=_positive(int), default=10)
    q.add_argument("--n", type=_positive(int), default=2000)
    q.add_argument("--s", "--sketch-size", dest="s", type=_positive(int), default=100)
    q.add_argument("--cs-size", type=_positive(int))
    q.add_argument("--trials", type=_positive(int), default=100)
    q.add_argument("--k", type=_positive(int), default=10)

    q = sub.add_parser("lsr", parents=[common], help="least squares")
    q.add_argument("--method", choices=["exact", "cg", "sketched", "preconditioned"],
                   default="preconditioned")
    q.add_argument("--input", "-i")
    q.add_argument("--rhs")
    q.add_argument("--eps", type=_positive(float), default=1e-8)
    q.add_argument("--sketch-size", type=_positive(int))
    q.add_argument("--solver", choices=["gd", "cg"], default="gd")
    q.add_argument("--maxit", type=_positive(int), default=1000)

    q = sub.add_parser("ksvd", parents=[common], help="rank-k truncated SVD")
    q.add_argument("--method", choices=["lanczos", "prototype", "faster"], default="prototype")
    q.add_argument("--input", "-i")
    q.add_argument("--k", type=_positive(int), required=True)
    q.add_argument("--q", type=_positive(int), default=10)
    q.add_argument("--sketch-size", type=_positive(int))
    q.add_argument("--p", type=_positive(int))
    q.add_argument("--p-cs", type=_positive(int))

    for name, helptext in (("spsd", "SPSD / kernel sketch"), ("nystrom", "Nystrom factor")):
        q = sub.add_parser(name, parents=[common], help=helptext)
        q.add_argument("--input", "-i", help="explicit SPSD matrix")
        q.add_argument("--data", help="points (rows) for an RBF kernel")
        q.add_argument("--sigma", type=_positive(float))
        q.add_argument("--sketch-size", type=_positive(int), required=True)
        q.add_argument("--evaluate", action="store_true", help="report the Frobenius error")
        if name == "spsd":
            q.add_argument("--method", choices=["prototype", "faster"], default="faster")
            q.add_argument("--p", type=_positive(int))
        else:
            q.add_argument("--k", type=_positive(int))

    q = sub.add_parser("cur", parents=[common], help="CUR decomposition")
    q.add_argument("--method", choices=["prototype", "faster"], default="faster")
    q.add_argument("--input", "-i")
    q.add_argument("--data", help="training points (kernel columns)")
    q.add_argument("--test-data", help="test points (kernel rows)")
    q.add_argument("--sigma", type=_positive(float))
    q.add_argument("--c", type=_positive(int), required=True)
    q.add_argument("--r", type=_positive(int), required=True)
    q.add_argument("--sampler", choices=["uniform", "leverage"], default="uniform")
    q.add_argument("--evaluate", action="store_true")

    q = sub.add_parser("kpca", parents=[common], help="kernel PCA features")
    q.add_argument("--data", required=True)
    q.add_argument("--test-data")
    q.add_argument("--sigma", type=_positive(float), required=True)
    q.add_argument("--k", type=_positive(int), required=True)
    q.add_argument("--sketch-size", type=_positive(int))
    q.add_argument("--cur", action="store_true", help="CUR-mode test features")

    q = sub.add_parser("cluster", parents=[common], help="spectral clustering")
    q.add_argument("--data", required=True)
    q.add_argument("--labels", help="true labels, for an accuracy metric")
    q.add_argument("--sigma", type=_positive(float), required=True)
    q.add_argument("--k", type=_positive(int), required=True)
    q.add_argument("--method", choices=["faster", "nystrom"], default="faster")
    q.add_argument("--sketch-size", type=_positive(int))

    q = sub.add_parser("gpr", parents=[common], help="Gaussian process regression")
    q.add_argument("--data", required=True)
    q.add_argument("--labels", required=True, help="training targets")
    q.add_argument("--test-data")
    q.add_argument("--sigma", type=_positive(float), required=True)
    q.add_argument("--alpha", type=_positive(float), default=1.0)
    q.add_argument("--l", type=_positive(int), default=100)
    q.add_argument("--cur", action="store_true", help="CUR-mode prediction")

    q = sub.add_parser("bench", parents=[common], help="acceptance suite or kernel timings")
    q.add_argument("--suite", choices=["acceptance", "kernels"], default="acceptance")
    q.add_argument("--criteria", type=int, nargs="+", choices=sorted(acceptance.CRITERIA))
    q.add_argument("--threads", type=_positive(int),
                   help="worker threads (default: RANDNLA_THREADS or 1)")
    q.add_argument("--repeats", type=_positive(int), default=5)
    return p


def _emit(report, start, timing):
    if timing and report.command != "bench":
        report.metric("elapsed_ms", 1000.0 * (time.perf_counter() - start))
    d = report.to_dict()
    print(json.dumps(d, sort_keys=True), flush=True)
    summary = ", ".join(f"{k}={v:.6g}" for k, v in sorted(d["metrics"].items()))
    print(f"{d['command']}: {d['status']} {summary}", file=sys.stderr)
    for note in d.get("notes", []):
        print(f"  note: {note}", file=sys.stderr)
    return d["status"]


def main(argv=None):
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    if args.command == "bench":
        try:
            reports = cmd_bench(args)
        except Exception as exc:  # noqa: BLE001 - every failure becomes a report
            rep = RunReport("bench", args.seed, {"suite": args.suite})
            rep.status = "error"
            rep.notes.append(f"{type(exc).__name__}: {exc}")
            reports = [rep]
        statuses = [_emit(r, start, args.timing) for r in reports]
    else:
        report = RunReport(args.command, args.seed)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                COMMANDS[args.command](args, report)
            except Exception as exc:  # noqa: BLE001
                report.status = "error"
                report.notes.append(f"{type(exc).__name__}: {exc}")
        for w in caught:
            if issubclass(w.category, (RankDeficientWarning, KrylovCollapseWarning)):
                report.flag(str(w.message))
        statuses = [_emit(report, start, args.timing)]
    if "error" in statuses:
        return EXIT_ERROR
    if "flagged" in statuses:
        return EXIT_FLAGGED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
