"""Per-dataset experiment pipeline and its configuration."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, DataError, derive_partition, load_dataset, make_folds, split_train_test
from .evaluation import DatasetRow, LEVEL1_NAMES, nmse, oracle_best
from .level0 import LEARNERS, Basis, LearnerConfigs, RbfConfig, RidgeConfig, FeatureMap
from .level2 import fit_level2_two_step
from .selection import algorithm_s, build_decision_matrix, error_correlations
from .stacking import cv_level1_data, fit_full_models


class ConfigError(ValueError):
    """Invalid experiment configuration."""


RIDGE_MODES = ("relative", "fixed")


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: str = ""
    output_dir: str = ""
    target_column: str = ""          # empty: last CSV column
    target_overrides: tuple[tuple[str, str], ...] = ()
    k_folds: int = 5
    holdout_fraction: float = 0.2
    seed: int = 0
    ridge_lambda_mode: str = "relative"
    ridge_lambda: float = 1e-6
    rbf_basis: str = "gaussian"
    rbf_center_grid: tuple[int, ...] | None = None
    rbf_inner_split: float = 0.2
    rbf_ridge_lambda: float = 1e-8
    nonneg_alpha: bool = True
    jobs: int = 0                    # 0: available parallelism
    baselines: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.k_folds < 2:
            raise ConfigError(f"k_folds must be >= 2, got {self.k_folds}")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError(f"holdout_fraction must lie in (0, 1), got {self.holdout_fraction}")
        if self.ridge_lambda_mode not in RIDGE_MODES:
            raise ConfigError(f"ridge_lambda_mode must be one of {RIDGE_MODES}")
        if self.ridge_lambda < 0 or self.rbf_ridge_lambda < 0:
            raise ConfigError("ridge lambdas must be >= 0")
        try:
            Basis(self.rbf_basis)
        except ValueError:
            raise ConfigError(
                f"unknown rbf_basis {self.rbf_basis!r}; choose from {[b.value for b in Basis]}"
            ) from None
        if not 0.0 < self.rbf_inner_split < 1.0:
            raise ConfigError("rbf_inner_split must lie in (0, 1)")
        if self.rbf_center_grid is not None and (
            not self.rbf_center_grid or min(self.rbf_center_grid) < 1
        ):
            raise ConfigError("rbf_center_grid entries must be >= 1")
        if self.jobs < 0:
            raise ConfigError("jobs must be >= 0")

    def target_for(self, dataset: str) -> str:
        return dict(self.target_overrides).get(dataset, self.target_column)

    def learner_configs(self, rbf_seed: int) -> LearnerConfigs:
        if self.ridge_lambda_mode == "relative":
            lr = RidgeConfig(lam=None, relative_lambda=self.ridge_lambda)
        else:
            lr = RidgeConfig(lam=self.ridge_lambda)
        qr = RidgeConfig(lam=lr.lam, feature_map=FeatureMap.QUADRATIC, relative_lambda=lr.relative_lambda)
        rbf = RbfConfig(
            basis=Basis(self.rbf_basis),
            center_grid=self.rbf_center_grid,
            inner_split_fraction=self.rbf_inner_split,
            seed=rbf_seed,
            ridge_lambda=self.rbf_ridge_lambda,
        )
        return LearnerConfigs(lr=lr, qr=qr, rbf=rbf)


def dataset_seeds(seed: int, name: str) -> dict:
    """Independent split/fold/RBF seeds derived from the run seed and dataset name."""
    ss = np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8"))])
    split, folds, rbf = (int(s.generate_state(1, np.uint32)[0]) for s in ss.spawn(3))
    return {"split": split, "folds": folds, "rbf": rbf}


def read_dataset(path, target_column: str = "") -> tuple[Dataset, str]:
    """Load a CSV; an empty ``target_column`` means the last header column.

    Returns the dataset and the resolved target column name.
    """
    path = Path(path)
    if not target_column:
        with path.open(encoding="utf-8") as fh:
            header = fh.readline().strip()
        if not header:
            raise DataError(f"{path}: empty file")
        target_column = header.split(",")[-1].strip()
    return load_dataset(path, target_column), target_column


@dataclass
class DatasetOutcome:
    """Everything the harness records for one dataset."""

    row: DatasetRow
    seeds: dict
    target_column: str
    test_rows: np.ndarray
    y_test: np.ndarray
    predictions: dict               # method -> test predictions
    best_learner: str
    selection_label: str
    trace: str
    correlations: list              # per m, criteria vector
    cv_nmse: list                   # per m, level-2 CV NMSE
    weights: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.row.name,
            "n_records": self.row.n_records,
            "n_vars": self.row.n_vars,
            "target_column": self.target_column,
            "seeds": self.seeds,
            "test_nmse": {
                "base": self.row.base,
                "level1": self.row.level1,
                "level2": self.row.level2,
                "selected": self.row.selected,
                "best": self.row.best[1],
            },
            "best_learner": self.best_learner,
            "chosen_m": self.row.chosen_m,
            "rule": self.selection_label,
            "cv_nmse_level2": self.cv_nmse,
            "correlations": self.correlations,
            "weights": self.weights,
        }


def run_dataset(path, cfg: ExperimentConfig, name: str | None = None) -> DatasetOutcome:
    """Full protocol on one CSV file.

    Hold out a test part, fit the base learners and level-1 ensembles on
    the training part, fit two-step level-2 ensembles for every CV
    partition m = 0..K, select a partition from error correlations and
    score everything on the held-out rows.
    """
    path = Path(path)
    name = name or path.stem
    ds, target = read_dataset(path, cfg.target_for(name))
    seeds = dataset_seeds(cfg.seed, name)
    train, test = split_train_test(ds, 1.0 - cfg.holdout_fraction, seeds["split"])
    configs = cfg.learner_configs(seeds["rbf"])
    X_test, y_test = test.features, test.target

    full = fit_full_models(train, LEARNERS, configs)
    preds = {k.value: full[k].predict(X_test) for k in LEARNERS}
    base = {k: nmse(y_test, p).value for k, p in preds.items()}
    best_learner, _ = oracle_best(base)

    folds = make_folds(train.n, cfg.k_folds, seeds["folds"])
    level2 = []
    for m in range(cfg.k_folds + 1):
        part = derive_partition(folds, m)
        z = cv_level1_data(train, part, LEARNERS, configs)
        level2.append(
            fit_level2_two_step(
                train, part, configs, cfg.nonneg_alpha, base_data=z, full_models=full
            )
        )

    for label, ens in zip(LEVEL1_NAMES, level2[0].level1):
        preds[label] = ens.predict(X_test)
    level1 = {label: nmse(y_test, preds[label]).value for label in LEVEL1_NAMES}

    vectors = [error_correlations(l2.error_matrix, l2.partition_m) for l2 in level2]
    sel = algorithm_s(build_decision_matrix(vectors))
    l2_scores = []
    for l2 in level2:
        p = l2.predict(X_test)
        preds[f"fE123_{l2.partition_m}"] = p
        l2_scores.append(nmse(y_test, p).value)
    preds["fE123_star"] = preds[f"fE123_{sel.chosen_m}"]

    row = DatasetRow(
        name=name,
        n_records=ds.n,
        n_vars=ds.n_features,
        base=base,
        level1=level1,
        level2=l2_scores,
        chosen_m=sel.chosen_m,
        rule=sel.label,
    )
    weights = {
        "alpha": {
            label: e.alpha_by_learner().tolist() for label, e in zip(LEVEL1_NAMES, level2[0].level1)
        },
        "beta": {str(l2.partition_m): l2.beta.w.tolist() for l2 in level2},
        "gamma": {str(l2.partition_m): l2.gamma().gamma.tolist() for l2 in level2},
    }
    return DatasetOutcome(
        row=row,
        seeds=seeds,
        target_column=target,
        test_rows=test.row_index.copy(),
        y_test=y_test.copy(),
        predictions=preds,
        best_learner=best_learner,
        selection_label=sel.label,
        trace=sel.trace_text(),
        correlations=[v.g.tolist() for v in vectors],
        cv_nmse=[l2.cv_nmse for l2 in level2],
        weights=weights,
    )
