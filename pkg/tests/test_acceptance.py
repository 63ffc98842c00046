"""End-to-end acceptance checks, one numbered test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one summary
line per criterion.  The benchmark fixture shared by criteria 7 and 8
trains 90 grid cells and takes a couple of minutes on one core.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

import oracles
from helpers import random_pair, random_rotation, random_transform
from itda.data_model import SourceDataset, TargetDataset, Transform, standardize_pair
from itda.evaluation import accuracy, identity_baseline, knn1_classify, pca_baseline
from itda.model_selection import HyperGrid, grid_search
from itda.objectives import domain_mi, gradient, source_error, target_mi, total_objective
from itda.optimizer import OptimizerConfig, minimize_restarts
from itda.synthetic import SyntheticConfig, generate

GRID_DIMS = (2, 3, 5)
GRID_LAMBDAS = (0.0, 1.0, 4.0)
BENCHMARK_SEEDS = range(10)

REPORT_KEYS = {
    "schema_version", "config_echo", "cells", "winner",
    "predictions", "metrics", "timings",
}
WINNER_KEYS = {
    "index", "d", "lam", "eps_s", "tie_break",
    "transform_file", "transform_space", "trajectory",
}


def check(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    line = f"criterion {num}: {status} ({detail})"
    print(line)
    assert ok, line


def fd_gradient(source, target, lam, matrix, h=1e-5):
    grad = np.zeros_like(matrix)
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            for sign in (1.0, -1.0):
                shifted = matrix.copy()
                shifted[i, j] += sign * h
                value = total_objective(Transform(shifted), source, target, lam).total
                grad[i, j] += sign * value / (2.0 * h)
    return grad


def test_criterion_1_gradient_matches_finite_differences():
    start = time.perf_counter()
    worst = 0.0
    for k in range(20):
        lam = (0.0, 1.0, 16.0)[k % 3]
        source, target = random_pair(n=20, m=15, dim=8, num_classes=3, seed=100 + k)
        transform = random_transform(3, 8, seed=200 + k)
        analytic = gradient(transform, source, target, lam)
        numeric = fd_gradient(source, target, lam, transform.matrix)
        scale = max(float(np.max(np.abs(analytic))), 1e-8)
        worst = max(worst, float(np.max(np.abs(numeric - analytic))) / scale)
    elapsed = time.perf_counter() - start
    check(
        1,
        worst <= 1e-4 and elapsed < 30.0,
        f"max relative error {worst:.2e} over 20 instances in {elapsed:.1f}s",
    )


def test_criterion_2_matches_brute_force_oracles():
    worst = 0.0
    for k in range(50):
        rng = np.random.default_rng(2000 + k)
        c = 2 + k % 2
        n = int(rng.integers(2 * c, 9))
        m = int(rng.integers(2, 9))
        dim = int(rng.integers(2, 6))
        d = int(rng.integers(1, dim + 1))
        source, target = random_pair(n=n, m=m, dim=dim, num_classes=c, seed=2100 + k)
        transform = random_transform(d, dim, seed=2200 + k)

        eps = source_error(transform, source)
        i_t = target_mi(transform, source, target)
        i_st = domain_mi(transform, source, target)
        xs, ys = source.features, source.labels
        worst = max(
            worst,
            abs(eps - oracles.source_error(transform.matrix, xs, ys, c)),
            abs(i_t - oracles.target_mi(transform.matrix, xs, ys, c, target.features)),
            abs(i_st - oracles.domain_mi(transform.matrix, xs, target.features)),
        )
    check(2, worst <= 1e-12, f"max oracle gap {worst:.2e} over 50 tiny instances")


def test_criterion_3_information_bounds():
    scales = (1e-2, 1.0, 10.0, 1e3)
    ok = True
    for k in range(200):
        rng = np.random.default_rng(3000 + k)
        c = 2 + k % 2
        n = int(rng.integers(2 * c, 12))
        m = int(rng.integers(2, 10))
        dim = int(rng.integers(2, 6))
        d = int(rng.integers(1, dim + 1))
        source, target = random_pair(n=n, m=m, dim=dim, num_classes=c, seed=3100 + k)
        if k == 0:
            transform = Transform(np.zeros((d, dim)))
        else:
            transform = random_transform(d, dim, seed=3200 + k, scale=scales[k % 4])
        value = total_objective(transform, source, target, 1.0)
        ok = ok and 0.0 <= value.i_t <= math.log(c) + 1e-9
        ok = ok and 0.0 <= value.i_st <= math.log(2.0) + 1e-9
        ok = ok and 0.0 <= value.eps_s <= 1.0
        if not ok:
            break
    check(3, ok, "0 <= I_t <= ln C, 0 <= I_st <= ln 2, eps_s in [0, 1] on 200 draws")


def test_criterion_4_zero_transform_domain_information():
    rng = np.random.default_rng(40)
    source = SourceDataset(rng.normal(size=(5, 3)), np.array([0, 0, 0, 1, 1]), 2)
    target = TargetDataset(rng.normal(size=(5, 3)))
    got = domain_mi(Transform(np.zeros((2, 3))), source, target)
    expected = math.log(2.0) + (4 / 9) * math.log(4 / 9) + (5 / 9) * math.log(5 / 9)
    gap = abs(got - expected)
    check(4, gap <= 1e-9, f"got {got:.9f}, closed form {expected:.9f}, gap {gap:.2e}")


def test_criterion_5_rotation_and_scaling_invariance():
    worst_drift = 0.0
    predictions_stable = True
    for k in range(5):
        source, target = random_pair(n=14, m=10, dim=6, num_classes=3, seed=500 + k)
        transform = random_transform(3, 6, seed=600 + k)
        rotated = Transform(random_rotation(3, seed=700 + k) @ transform.matrix)

        base = total_objective(transform, source, target, 4.0)
        spun = total_objective(rotated, source, target, 4.0)
        worst_drift = max(
            worst_drift,
            abs(base.total - spun.total),
            abs(base.i_t - spun.i_t),
            abs(base.i_st - spun.i_st),
            abs(base.eps_s - spun.eps_s),
        )

        labels = knn1_classify(transform, source, target)
        predictions_stable = predictions_stable and np.array_equal(
            labels, knn1_classify(rotated, source, target)
        )
        for factor in (1e-3, 7.0, 250.0):
            scaled = Transform(factor * transform.matrix)
            predictions_stable = predictions_stable and np.array_equal(
                labels, knn1_classify(scaled, source, target)
            )
    check(
        5,
        worst_drift <= 1e-9 and predictions_stable,
        f"objective drift {worst_drift:.2e} under rotation; predictions stable",
    )


def test_criterion_6_optimizer_contract():
    monotone = True
    bounded = True
    deterministic = True
    for k in range(5):
        lam = GRID_LAMBDAS[k % 3]
        source, target = random_pair(n=12, m=9, dim=4, num_classes=3, seed=800 + k)
        config = OptimizerConfig(max_iters=60, seed=k)
        transform, trace = minimize_restarts(source, target, lam, 2, config)
        again, trace_again = minimize_restarts(source, target, lam, 2, config)

        totals = [r.total for r in trace.records]
        monotone = monotone and all(b <= a for a, b in zip(totals, totals[1:]))
        bounded = bounded and all(r.trace_gram <= 2.0 + 1e-9 for r in trace.records)
        deterministic = (
            deterministic
            and np.array_equal(transform.matrix, again.matrix)
            and trace.records == trace_again.records
        )
    check(
        6,
        monotone and bounded and deterministic,
        f"monotone {monotone}, trace bound {bounded}, bitwise rerun {deterministic}",
    )


@pytest.fixture(scope="module")
def benchmark():
    start = time.perf_counter()
    grid = HyperGrid(GRID_DIMS, GRID_LAMBDAS)
    config = OptimizerConfig(max_iters=300)
    selected, lam0, identity = [], [], []
    pca_by_d = {d: [] for d in GRID_DIMS}
    for seed in BENCHMARK_SEEDS:
        source, target, truth = generate(SyntheticConfig(seed=seed))
        std_source, std_target = standardize_pair(source, target)
        report = grid_search(std_source, std_target, grid, config, restarts=3)

        winner = report.winner
        selected.append(accuracy(knn1_classify(winner.transform, std_source, std_target), truth))
        baseline = min(
            (c for c in report.cells if c.lam == 0.0 and not c.failed),
            key=lambda c: (round(c.eps_s, 12), c.d),
        )
        lam0.append(accuracy(knn1_classify(baseline.transform, std_source, std_target), truth))
        identity.append(identity_baseline(std_source, std_target, truth).accuracy)
        for d in GRID_DIMS:
            pca_by_d[d].append(pca_baseline(std_source, std_target, d, truth).accuracy)
    return {
        "selected": float(np.mean(selected)),
        "lam0": float(np.mean(lam0)),
        "identity": float(np.mean(identity)),
        "pca": max(float(np.mean(accs)) for accs in pca_by_d.values()),
        "elapsed": time.perf_counter() - start,
    }


def test_criterion_7_synthetic_benchmark(benchmark):
    sel, idn, pca = benchmark["selected"], benchmark["identity"], benchmark["pca"]
    elapsed = benchmark["elapsed"]
    ok = (
        sel - idn >= 0.10
        and sel - pca >= 0.10
        and sel > 0.85
        and elapsed < 300.0
    )
    check(
        7,
        ok,
        f"selected {sel:.4f} vs identity {idn:.4f} and best-d target-projection "
        f"{pca:.4f}, 10 seeds in {elapsed:.0f}s",
    )


def test_criterion_8_lambda_ablation(benchmark):
    sel, lam0 = benchmark["selected"], benchmark["lam0"]
    check(8, sel >= lam0, f"selected {sel:.4f} >= fixed-lambda-0 {lam0:.4f}")


def run_cli(args, cwd):
    env = os.environ.copy()
    env.pop("ITDA_THREADS", None)
    return subprocess.run(
        [sys.executable, "-m", "itda.cli", *args],
        cwd=str(cwd), env=env, capture_output=True, text=True,
    )


def run_pipeline(directory):
    synth = run_cli(
        ["synth", "--out-dir", ".", "--num-classes", "3", "--signal-dim", "5",
         "--noise-dim", "15", "--points-per-class", "40", "--cluster-std", "0.5",
         "--class-separation", "4.0", "--rotation-angle", str(math.pi / 6),
         "--translation", "1.0", "--noise-std", "2.0", "--seed", "0"],
        directory,
    )
    adapt = run_cli(
        ["adapt", "--source", "source.csv", "--target", "target.csv",
         "--out", "report.json", "--truth", "target_labels.csv", "--threads", "1"],
        directory,
    )
    evaluate = run_cli(
        ["eval", "--transform", "report.transform.csv", "--source", "source.csv",
         "--target", "target.csv", "--truth", "target_labels.csv",
         "--out", "metrics.json"],
        directory,
    )
    return synth, adapt, evaluate


def test_criterion_9_cli_end_to_end(tmp_path):
    first_dir = tmp_path / "first"
    second_dir = tmp_path / "second"
    first_dir.mkdir()
    second_dir.mkdir()

    exit_codes = []
    for result in run_pipeline(first_dir):
        exit_codes.append(result.returncode)
        assert result.returncode == 0, result.stderr

    report = json.loads((first_dir / "report.json").read_text())
    schema_ok = (
        set(report) == REPORT_KEYS
        and set(report["winner"]) == WINNER_KEYS
        and len(report["cells"]) == len(GRID_DIMS) * len(GRID_LAMBDAS)
        and len(report["predictions"]) == 120
        and report["metrics"] is not None
        and 0.0 <= report["metrics"]["accuracy"] <= 1.0
    )
    evaluated = json.loads((first_dir / "metrics.json").read_text())
    schema_ok = (
        schema_ok
        and evaluated["predictions"] == report["predictions"]
        and evaluated["metrics"]["accuracy"] == report["metrics"]["accuracy"]
    )

    for result in run_pipeline(second_dir):
        assert result.returncode == 0, result.stderr
    identical = True
    for name in ("source.csv", "target.csv", "target_labels.csv", "meta.json",
                 "report.transform.csv", "metrics.json"):
        identical = identical and (
            (first_dir / name).read_bytes() == (second_dir / name).read_bytes()
        )
    rerun = json.loads((second_dir / "report.json").read_text())
    report.pop("timings")
    rerun.pop("timings")
    identical = identical and report == rerun

    check(
        9,
        all(code == 0 for code in exit_codes) and schema_ok and identical,
        f"exit codes {exit_codes}, schema valid {schema_ok}, "
        f"rerun byte-identical except timings {identical}",
    )
