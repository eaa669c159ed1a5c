"""Dataset ingestion, train/test splitting and K-fold partitions.

All randomness goes through ``numpy.random.default_rng`` (PCG64) seeded
explicitly, so every split is a pure function of its inputs and seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed input files or invalid split requests."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix plus target vector.

    ``row_index`` records each row's position in the source file so that
    subsets (train/test splits) can be traced back to raw data.
    """

    name: str
    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    row_index: np.ndarray = field(default=None)

    def __post_init__(self):
        X = _frozen(self.features)
        y = _frozen(self.target)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(
                f"target length {y.shape[0] if y.ndim == 1 else y.shape} "
                f"does not match {X.shape[0]} feature rows"
            )
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"dataset {self.name!r} needs N >= 1 and I >= 1, got {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError(f"dataset {self.name!r} contains non-finite values")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match feature columns")
        rows = np.arange(X.shape[0]) if self.row_index is None else self.row_index
        rows = _frozen(rows, dtype=np.int64)
        if rows.shape != (X.shape[0],):
            raise DataError("row_index length does not match feature rows")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "row_index", rows)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.name,
            self.features[idx],
            self.target[idx],
            self.feature_names,
            self.row_index[idx],
        )


def load_dataset(path, target_column: str, name: str | None = None) -> Dataset:
    """Read a header-row CSV of decimal reals.

    The target column is extracted; every other column becomes a feature,
    in file order. Unparseable or non-finite cells raise ``DataError``
    naming the (1-based) file line and the column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not in header {header}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {line_no} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: line {line_no}, column {col!r}: cannot parse {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: line {line_no}, column {col!r}: non-finite value {cell!r}"
                    )
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    t = header.index(target_column)
    keep = [j for j in range(len(header)) if j != t]
    if not keep:
        raise DataError(f"{path}: no feature columns besides the target")
    return Dataset(
        name=name if name is not None else path.stem,
        features=table[:, keep],
        target=table[:, t],
        feature_names=tuple(header[j] for j in keep),
    )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_train_test(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint split; the training part holds round(fraction * N) rows.

    Both parts keep the original row order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if ds.n < 2:
        raise DataError("need at least 2 rows to split")
    n_train = _round_half_up(train_fraction * ds.n)
    if n_train < 1 or n_train > ds.n - 1:
        raise DataError(
            f"split of {ds.n} rows at fraction {train_fraction} leaves one side empty"
        )
    perm = np.random.default_rng(seed).permutation(ds.n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass(frozen=True)
class FoldAssignment:
    """Fold label (1..k_folds) for each of ``n`` rows."""

    n: int
    k_folds: int
    fold_of: np.ndarray
    seed: int

    def __post_init__(self):
        fold_of = _frozen(self.fold_of, dtype=np.int64)
        if fold_of.shape != (self.n,):
            raise DataError("fold_of length must equal n")
        if fold_of.min() < 1 or fold_of.max() > self.k_folds:
            raise DataError("fold labels must lie in [1, k_folds]")
        sizes = np.bincount(fold_of, minlength=self.k_folds + 1)[1:]
        if sizes.min() == 0:
            raise DataError("every fold must be non-empty")
        object.__setattr__(self, "fold_of", fold_of)

    def fold(self, k: int) -> np.ndarray:
        """Row indices of fold ``k`` (1-based)."""
        return np.flatnonzero(self.fold_of == k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k_folds + 1)[1:]


def make_folds(n: int, k_folds: int, seed: int) -> FoldAssignment:
    """Shuffle ``range(n)`` and deal rows round-robin into ``k_folds`` folds."""
    if k_folds < 2:
        raise DataError(f"k_folds must be >= 2, got {k_folds}")
    if n < k_folds:
        raise DataError(f"cannot make {k_folds} folds from {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % k_folds + 1
    return FoldAssignment(n=n, k_folds=k_folds, fold_of=fold_of, seed=seed)


@dataclass(frozen=True)
class CvPartition:
    """K-fold layout whose training sets additionally drop fold ``m``.

    ``m = 0`` is ordinary K-fold CV. For ``m >= 1`` the training set for
    validation fold ``k`` is everything outside folds ``k`` and ``m``; when
    ``k == m`` only fold ``k`` is removed.
    """

    folds: FoldAssignment
    m: int

    def __post_init__(self):
        if not 0 <= self.m <= self.folds.k_folds:
            raise DataError(f"m must lie in [0, {self.folds.k_folds}], got {self.m}")

    @property
    def k_folds(self) -> int:
        return self.folds.k_folds

    def validation_indices(self, k: int) -> np.ndarray:
        return self.folds.fold(k)

    def training_indices(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.k_folds:
            raise DataError(f"fold k must lie in [1, {self.k_folds}], got {k}")
        excluded = self.folds.fold_of == k
        if self.m:
            excluded |= self.folds.fold_of == self.m
        return np.flatnonzero(~excluded)

    def splits(self):
        """Yield ``(k, training_indices, validation_indices)`` for k = 1..K."""
        for k in range(1, self.k_folds + 1):
            yield k, self.training_indices(k), self.validation_indices(k)


def derive_partition(folds: FoldAssignment, m: int) -> CvPartition:
    return CvPartition(folds=folds, m=m)
