import json
from importlib import resources
import shutil
import subprocess

import jsonschema
import numpy as np
import pytest

from randnla import cli
from randnla.datasets import conditioned_lsr, low_rank_matrix, planted_blobs, powerlaw_matrix
from randnla.io import load_matrix, save_matrix

SCHEMA = json.loads(resources.files("randnla").joinpath("schema/run_report.schema.json")
                    .read_text())


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out
    reports = [json.loads(line) for line in out.splitlines() if line.strip()]
    for r in reports:
        jsonschema.validate(r, SCHEMA)
    return code, reports, out


@pytest.fixture
def files(tmp_path):
    A, b, _ = conditioned_lsr(2000, 20, 1e6, seed=0)
    save_matrix(A, tmp_path / "A.mtx")
    save_matrix(b, tmp_path / "b.mtx")
    save_matrix(powerlaw_matrix(120, 100, 1.0, 1), tmp_path / "P.mtx")
    blobs = planted_blobs(150, 3, 2, 1.0, 6.0, 3)
    save_matrix(blobs.points, tmp_path / "X.csv")
    save_matrix(blobs.labels.astype(float), tmp_path / "labels.csv")
    save_matrix(np.sin(blobs.points.sum(axis=1) / 4), tmp_path / "y.csv")
    X = np.random.default_rng(2).standard_normal((60, 2))
    save_matrix(X, tmp_path / "Xtest.csv")
    return tmp_path


def test_verify_subspace_embedding(capsys):
    code, [r], _ = run(capsys, "verify", "--property", "subspace-embedding", "--method",
                       "gaussian", "--m", 10, "--n", 2000, "--s", 100, "--trials", 100,
                       "--seed", 7)
    assert code in (0, 2)
    assert r["metrics"]["gamma"] >= 1 and r["seed"] == 7


def test_verify_low_rank(capsys):
    code, [r], _ = run(capsys, "verify", "--property", "low-rank", "--m", 60, "--n", 50,
                       "--s", 30, "--k", 5, "--seed", 1)
    assert code == 0 and r["metrics"]["eta_proj"] <= r["metrics"]["eta"]


def test_lsr_preconditioned_kappa(capsys, files):
    code, [r], _ = run(capsys, "lsr", "--method", "preconditioned", "--input", files / "A.mtx",
                       "--rhs", files / "b.mtx", "--eps", "1e-8", "--seed", 1)
    assert code == 0 and r["status"] == "ok"
    assert r["metrics"]["kappa"] <= 2


@pytest.mark.parametrize("method", ["exact", "cg", "sketched"])
def test_lsr_methods(capsys, files, method):
    code, [r], _ = run(capsys, "lsr", "--method", method, "--input", files / "A.mtx",
                       "--rhs", files / "b.mtx", "--seed", 3, "--maxit", 5)
    assert r["metrics"]["objective_ratio"] >= 1 - 1e-9
    if method == "cg":
        assert code == 2 and r["status"] == "flagged"


def test_lsr_writes_solution(capsys, files, tmp_path):
    out = tmp_path / "x.mtx"
    code, _, _ = run(capsys, "lsr", "--method", "exact", "--input", files / "A.mtx",
                     "--rhs", files / "b.mtx", "--output", out)
    assert code == 0 and load_matrix(out).shape == (20, 1)


@pytest.mark.parametrize("method", ["gaussian", "srht", "count-sketch", "combined", "uniform",
                                    "leverage", "landmark"])
def test_sketch_methods(capsys, files, method):
    code, [r], _ = run(capsys, "sketch", "--input", files / "P.mtx", "--method", method,
                       "--sketch-size", 8, "--seed", 5)
    assert code == 0 and r["metrics"]["rows"] == 120
    assert r["metrics"]["cols"] <= 8


@pytest.mark.parametrize("method, extra", [("lanczos", ["--q", 4]), ("prototype", []),
                                           ("faster", ["--sketch-size", 6, "--p", 20,
                                                        "--p-cs", 60])])
def test_ksvd(capsys, files, method, extra):
    code, [r], _ = run(capsys, "ksvd", "--method", method, "--input", files / "P.mtx", "--k", 3,
                       "--seed", 2, *extra)
    assert r["metrics"]["error_ratio"] >= 1 - 1e-9
    if method != "lanczos":
        assert r["metrics"]["passes"] == 2


def test_spsd_and_nystrom_on_points(capsys, files):
    code, [r], _ = run(capsys, "spsd", "--data", files / "X.csv", "--sigma", 2, "--sketch-size",
                       10, "--seed", 4, "--evaluate")
    assert code in (0, 2) and r["metrics"]["entries_visited"] > 0
    code, [r], _ = run(capsys, "nystrom", "--data", files / "X.csv", "--sigma", 2,
                       "--sketch-size", 10, "--seed", 4, "--evaluate")
    assert code == 0 and r["metrics"]["entries_visited"] == 150 * 10


def test_spsd_prototype_on_matrix(capsys, tmp_path):
    K = low_rank_matrix(40, 5, 5, 0)
    save_matrix(K @ K.T, tmp_path / "K.mtx")
    code, [r], _ = run(capsys, "spsd", "--input", tmp_path / "K.mtx", "--method", "prototype",
                       "--sketch-size", 8, "--seed", 1, "--evaluate")
    assert code == 0 and r["metrics"]["error_fro"] <= 1e-8 * np.linalg.norm(K @ K.T)


def test_cur_matrix_and_kernel(capsys, files):
    code, [r], _ = run(capsys, "cur", "--input", files / "P.mtx", "--c", 10, "--r", 10,
                       "--sampler", "leverage", "--seed", 3)
    assert "error_fro" in r["metrics"]
    code, [r], _ = run(capsys, "cur", "--data", files / "X.csv", "--test-data",
                       files / "Xtest.csv", "--sigma", 2, "--c", 5, "--r", 5, "--seed", 3)
    assert r["metrics"]["entries_visited"] > 0


def test_kpca(capsys, files):
    code, [r], _ = run(capsys, "kpca", "--data", files / "X.csv", "--sigma", 2, "--k", 2,
                       "--seed", 1)
    assert code == 0 and r["metrics"]["lambda_max"] >= r["metrics"]["lambda_min"] > 0


def test_cluster_accuracy_metric(capsys, files):
    code, [r], _ = run(capsys, "cluster", "--data", files / "X.csv", "--labels",
                       files / "labels.csv", "--sigma", 2, "--k", 3, "--seed", 1)
    assert code == 0 and r["metrics"]["accuracy"] >= 0.95


def test_gpr(capsys, files):
    code, [r], _ = run(capsys, "gpr", "--data", files / "X.csv", "--labels", files / "y.csv",
                       "--sigma", 2, "--alpha", 0.01, "--l", 50, "--seed", 1)
    assert code == 0 and r["metrics"]["train_rmse"] < 0.1


def test_missing_seed_is_an_error(capsys, files):
    code, [r], _ = run(capsys, "sketch", "--input", files / "P.mtx", "--sketch-size", 4)
    assert code == 1 and r["status"] == "error" and "--seed" in r["notes"][0]


def test_missing_input_is_an_error(capsys):
    code, [r], _ = run(capsys, "ksvd", "--k", 2, "--seed", 0)
    assert code == 1 and r["status"] == "error"


@pytest.mark.parametrize("argv", [["sketch", "--bogus"], ["frobnicate"], ["ksvd", "--seed", "0"],
                                  ["verify", "--property", "subspace-embedding", "--seed", "-1"]])
def test_argument_errors_exit_1(capsys, argv):
    with pytest.raises(SystemExit) as ex:
        cli.main(argv)
    assert ex.value.code == 1


def test_identical_flags_give_identical_bytes(capsys, files):
    argv = ["cur", "--input", files / "P.mtx", "--c", 6, "--r", 6, "--seed", 9, "--no-timing"]
    _, _, first = run(capsys, *argv)
    _, _, second = run(capsys, *argv)
    assert first == second and "elapsed_ms" not in first


def test_elapsed_ms_reported_by_default(capsys, files):
    _, [r], _ = run(capsys, "lsr", "--method", "exact", "--input", files / "A.mtx",
                    "--rhs", files / "b.mtx")
    assert r["metrics"]["elapsed_ms"] >= 0


def test_bench_acceptance_selected_criteria(capsys):
    code, reports, _ = run(capsys, "bench", "--suite", "acceptance", "--criteria", 7, 8,
                           "--seed", 42, "--no-timing")
    assert [r["parameters"]["criterion"] for r in reports] == [7, 8]
    assert code == 0


def test_bench_kernels(capsys):
    code, [r], _ = run(capsys, "bench", "--suite", "kernels", "--repeats", 1, "--seed", 0)
    assert code == 0 and r["metrics"]["fwht_numpy_ms"] > 0


def test_schema_rejects_nonconforming_reports():
    bad = {"command": "sketch", "seed": 1, "parameters": {}, "metrics": {"x": "nan"},
           "status": "ok"}
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, SCHEMA)


def test_report_turns_nonfinite_metric_into_error():
    rep = cli.RunReport("sketch", 0)
    rep.metric("gamma", float("inf"))
    d = rep.to_dict()
    assert d["status"] == "error" and "gamma" not in d["metrics"]
    jsonschema.validate(d, SCHEMA)


@pytest.mark.skipif(shutil.which("randnla") is None, reason="console script not installed")
def test_console_script(files):
    out = subprocess.run(["randnla", "ksvd", "--input", str(files / "P.mtx"), "--k", "2",
                          "--seed", "0", "--no-timing"], capture_output=True, text=True)
    assert out.returncode == 0
    jsonschema.validate(json.loads(out.stdout), SCHEMA)
