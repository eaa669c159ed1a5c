"""Acceptance checks, one test per numbered criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary lists
one PASS/FAIL line per criterion.
"""

import csv
import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from published_tables import BASE_AND_LEVEL1, LEVEL1_VS_LEVEL2
from stackreg.cli import EXIT_OK, main
from stackreg.data import Dataset, derive_partition, make_folds, split_train_test
from stackreg.evaluation import exact_p_value, nmse, signed_rank_counts, wilcoxon_signed_rank
from stackreg.experiment import ExperimentConfig, run_dataset
from stackreg.level0 import LEARNERS
from stackreg.level2 import fit_level2_all_at_once, fit_level2_two_step
from stackreg.selection import Rule, algorithm_s, build_decision_matrix
from stackreg.stacking import fit_full_models, simplex_objective, solve_simplex_ls

criterion = pytest.mark.criterion


def grid_objective(Z, y, step=1e-3):
    n = round(1 / step)
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = i + j <= n
    W = np.column_stack([i[keep], j[keep], n - i[keep] - j[keep]]) / n
    return float(((y[:, None] - Z @ W.T) ** 2).sum(0).min())


def quad_dataset(n, i, seed, noise=0.3):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, i))
    y = (X**2).sum(1) - X[:, 0] + noise * rng.normal(size=n)
    return Dataset(f"q{seed}", X, y, tuple(f"x{j}" for j in range(i)))


def write_csv(path, X, y):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(X.shape[1])] + ["y"])
        w.writerows(np.column_stack([X, y]).tolist())


@criterion(1, "simplex LS matches a 1e-3 grid search on 50 random 8x3 instances, < 1 s")
def test_simplex_ls_grid_oracle():
    rng = np.random.default_rng(2024)
    instances = [(rng.normal(size=(8, 3)), rng.normal(size=8)) for _ in range(50)]
    t0 = time.perf_counter()
    fits = [solve_simplex_ls(Z, y) for Z, y in instances]
    elapsed = time.perf_counter() - t0
    for (Z, y), fit in zip(instances, fits):
        grid = grid_objective(Z, y)
        assert fit.objective <= grid + 1e-8 * max(1.0, grid)
        assert fit.objective == pytest.approx(simplex_objective(Z, y, fit.w), rel=1e-12)
    assert elapsed < 1.0


@pytest.fixture(scope="module")
def fitted_suite():
    out = []
    for seed, (n, i) in enumerate([(60, 2), (45, 3), (80, 1)]):
        ds = quad_dataset(n, i, seed)
        folds = make_folds(ds.n, 5, seed=seed)
        full = fit_full_models(ds)
        out.append((ds, full, [fit_level2_two_step(ds, derive_partition(folds, m), full_models=full)
                               for m in range(6)]))
    return out


@criterion(2, "fitted ensembles never lose to any single member column on the CV objective")
def test_vertex_bound(fitted_suite):
    checked = 0
    for _, _, ensembles in fitted_suite:
        for ens in ensembles:
            for e1 in ens.level1:
                z, y = e1.level1_data.z, e1.level1_data.y
                for j in range(z.shape[1]):
                    assert e1.cv_objective <= simplex_objective(z[:, [j]], y, [1.0]) + 1e-9
                    checked += 1
            Z2 = ens.level2_inputs()
            for j in range(3):
                assert ens.cv_objective <= simplex_objective(Z2[:, [j]], ens.y, [1.0]) + 1e-9
                checked += 1
    assert checked == 3 * 6 * (9 + 3)


@criterion(3, "level-2 prediction equals the expanded base-learner weighting, 100 points, 1e-10")
def test_gamma_identity(fitted_suite):
    for ds, full, ensembles in fitted_suite:
        X = np.random.default_rng(7).uniform(-3, 3, size=(100, ds.n_features))
        P = np.column_stack([full[k].predict(X) for k in LEARNERS])
        for ens in ensembles:
            np.testing.assert_allclose(ens.predict(X), P @ ens.gamma().gamma, atol=1e-10, rtol=0)


@criterion(4, "two-step and all-at-once hold-out NMSE within 0.05 on 5 datasets; descent monotone")
def test_two_step_vs_all_at_once():
    for seed in range(5):
        ds = quad_dataset(100, 3, seed=10 + seed)
        train, test = split_train_test(ds, 0.8, seed=seed)
        part = derive_partition(make_folds(train.n, 5, seed=seed), 0)
        full = fit_full_models(train)
        two = fit_level2_two_step(train, part, full_models=full)
        joint = fit_level2_all_at_once(base_data=two.base_data, two_step=two)
        uniform = fit_level2_all_at_once(base_data=two.base_data)
        for res in (joint, uniform):
            assert np.all(np.diff(res.history) <= 0)
        a = nmse(test.target, two.predict(test.features)).value
        b = nmse(test.target, joint.predict(full, test.features)).value
        assert abs(a - b) < 0.05


@criterion(5, "selection traces: accept at MED, all-identical fallback, two-alternative fallback")
def test_selection_traces():
    res = algorithm_s(build_decision_matrix([(0.5, 0.6, 0.7), (0.4, 0.8, 0.9), (0.45, 0.5, 0.8)]))
    assert (res.chosen_m, res.rule_used) == (2, Rule.MED)
    res = algorithm_s(build_decision_matrix([(0.3, 0.3, 0.3)] * 3))
    assert (res.chosen_m, res.rule_used) == (0, Rule.FALLBACK_ORIGINAL)
    res = algorithm_s(build_decision_matrix([(0.2, 0.2, 0.2), (0.3, 0.3, 0.3)]))
    assert (res.chosen_m, res.rule_used) == (0, Rule.FALLBACK_ORIGINAL)
    assert [(e.segment, e.m, e.verdict) for e in res.trace[:2]] == [(1, 0, "reject"), (2, 1, "reject")]


@criterion(6, "exact signed-rank p equals 2^n enumeration for n <= 10; n=6 all positive gives 0.03125")
def test_wilcoxon_exact():
    for n in range(1, 11):
        sums = np.array([sum(r for r, s in zip(range(1, n + 1), signs) if s)
                         for signs in itertools.product((0, 1), repeat=n)])
        np.testing.assert_array_equal(signed_rank_counts(n), np.bincount(sums))
        for w in range(n * (n + 1) // 2 + 1):
            lower, upper = np.mean(sums <= w), np.mean(sums >= w)
            assert exact_p_value(w, n) == pytest.approx(min(1.0, 2 * min(lower, upper)), abs=1e-12)
    r = wilcoxon_signed_rank(np.arange(1.0, 7.0), np.zeros(6))
    assert r.method == "exact" and r.p_value == 0.03125


@criterion(7, "published-table statistics: p in [0.023, 0.043]; p in [0.069, 0.089], HL in [0.006, 0.010]")
def test_published_statistics():
    t0 = time.perf_counter()
    oracle = BASE_AND_LEVEL1[:, :4].min(axis=1)
    first = wilcoxon_signed_rank(oracle, BASE_AND_LEVEL1[:, 4])
    second = wilcoxon_signed_rank(LEVEL1_VS_LEVEL2[:, 0], LEVEL1_VS_LEVEL2[:, 1])
    elapsed = time.perf_counter() - t0
    print(f"oracle vs fE1: p={first.p_value:.4f}; fE* vs fE123*: p={second.p_value:.4f} "
          f"HL={second.hl_estimate:.4f}")
    assert 0.023 <= first.p_value <= 0.043
    assert 0.069 <= second.p_value <= 0.089
    assert 0.006 <= second.hl_estimate <= 0.010
    assert elapsed < 1.0


@criterion(8, "NMSE: mean predictor 1.0, perfect 0.0, (1,2,3) vs (1,1,1) gives 2.5")
def test_nmse_identities():
    y = np.array([3.0, -1.0, 4.0, 1.0, 5.0])
    assert nmse(y, np.full(5, y.mean())).value == 1.0
    assert nmse(y, y).value == 0.0
    assert nmse([1, 2, 3], [1, 1, 1]).value == 2.5


@criterion(9, "y = x^2 + noise, N=400: fE1 beats LR, selection costs at most 0.02 NMSE, < 60 s")
def test_end_to_end(tmp_path):
    rng = np.random.default_rng(9)
    x = rng.uniform(-3, 3, size=(400, 1))
    y = x[:, 0] ** 2 + 0.5 * rng.normal(size=400)
    write_csv(tmp_path / "square.csv", x, y)
    t0 = time.perf_counter()
    outcome = run_dataset(tmp_path / "square.csv", ExperimentConfig(k_folds=5, seed=3))
    elapsed = time.perf_counter() - t0
    row = outcome.row
    print(f"LR={row.base['LR']:.4f} fE1={row.level1['fE1']:.4f} "
          f"fE123_0={row.level2[0]:.4f} fE123*={row.selected:.4f} ({outcome.selection_label})")
    assert row.n_records == 400 and len(outcome.y_test) == 80
    assert row.level1["fE1"] < row.base["LR"]
    assert row.selected <= row.level2[0] + 0.02
    assert elapsed < 60.0


@criterion(10, "fixed-seed reruns are byte-identical; table schema and rule labels as expected")
def test_rerun_identical(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    for i in range(3):
        rng = np.random.default_rng(50 + i)
        X = rng.uniform(-2, 2, size=(50, 2))
        write_csv(data / f"set{i}.csv", X, X[:, 0] ** 2 - X[:, 1] + 0.2 * rng.normal(size=50))
    out = tmp_path / "out"
    argv = ["run", "--data", str(data), "--out", str(out), "--seed", "11", "--jobs", "1"]

    def snapshot():
        return {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}

    assert main(argv) == EXIT_OK
    first = snapshot()
    assert main(argv) == EXIT_OK
    assert snapshot() == first

    with open(out / "table1.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["DB", "CR", "LR", "QR", "RBF", "fE1", "fE2", "fE3", "Rec", "Var"]
    with open(out / "table2.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0])[:7] == ["DB"] + [f"fE123_{m}" for m in range(6)]
    labels = {"MED", "FALLBACK"} | {f"AR-L{s}" for s in range(2, 6)}
    assert len(rows) == 3 and all(r["Rule"] in labels for r in rows)
    with open(out / "table3.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["DB", "fE_star", "fE123_star", "Rec", "Var"]
    assert set(json.loads((out / "comparisons.json").read_text())["tests"]) >= {
        "Best_vs_fE1", "Best_vs_fE2", "Best_vs_fE3", "fE_star_vs_fE123_star", "Best_vs_fE123_star",
    }


if __name__ == "__main__":
    raise SystemExit(pytest.main([str(Path(__file__)), "-v"]))
