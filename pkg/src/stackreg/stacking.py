"""Level-1 stacking: out-of-fold predictions and simplex-weighted ensembles."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import CvPartition, Dataset
from .level0 import LEARNERS, FitError, Learner, LearnerConfigs, fit_learner

#: Member sets of the three standard stacking ensembles f_E1, f_E2, f_E3.
MEMBER_SETS = (
    (Learner.CR, Learner.LR, Learner.QR),
    (Learner.CR, Learner.LR, Learner.RBF),
    (Learner.CR, Learner.QR, Learner.RBF),
)

WEIGHT_SUM_TOL = 1e-9
NEG_TOL = 1e-12
TIE_SLACK = 1e-12


@dataclass(frozen=True)
class Level1Data:
    """Out-of-fold predictions ``z`` (N x J) with targets ``y``."""

    z: np.ndarray
    y: np.ndarray
    member_kinds: tuple[Learner, ...]
    partition_m: int

    def select(self, kinds) -> "Level1Data":
        kinds = tuple(Learner(k) for k in kinds)
        cols = [self.member_kinds.index(k) for k in kinds]
        return Level1Data(self.z[:, cols], self.y, kinds, self.partition_m)


@dataclass(frozen=True)
class SimplexWeights:
    w: np.ndarray
    nonneg: bool
    objective: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        if self.nonneg and w.min() < -NEG_TOL:
            raise ValueError(f"negative weight {w.min()} under nonneg constraint")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.w.size


def cv_level1_data(
    ds: Dataset,
    partition: CvPartition,
    members=LEARNERS,
    configs: LearnerConfigs = LearnerConfigs(),
) -> Level1Data:
    """Fit each member on every training set of ``partition`` and predict its fold.

    Rows of the result follow ``ds`` order; row n only ever sees models
    trained without its own fold.
    """
    members = tuple(Learner(k) for k in members)
    if partition.folds.n != ds.n:
        raise ValueError(f"partition covers {partition.folds.n} rows, dataset has {ds.n}")
    z = np.full((ds.n, len(members)), np.nan)
    for k, train_idx, val_idx in partition.splits():
        train = ds.subset(train_idx)
        for j, kind in enumerate(members):
            if train.n == 0:
                raise FitError(
                    f"fold {k}, member {kind.value}: empty training set (m={partition.m})"
                )
            try:
                model = fit_learner(kind, train, configs)
            except (FitError, ValueError) as exc:
                raise FitError(f"fold {k}, member {kind.value} (m={partition.m}): {exc}") from exc
            z[val_idx, j] = model.predict(ds.features[val_idx])
    z.setflags(write=False)
    return Level1Data(z=z, y=ds.target, member_kinds=members, partition_m=partition.m)


# ---------------------------------------------------------------------------
# Simplex-constrained least squares


def _affine_ls(Zs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm minimizer of ||y - Zs w|| subject to sum(w) = 1."""
    s = Zs.shape[1]
    center = np.full(s, 1.0 / s)
    if s == 1:
        return center
    # Orthonormal basis of {v : sum(v) = 0}; w = center + B u keeps sum(w) = 1
    # and ||w||^2 = ||center||^2 + ||u||^2, so min-norm u gives min-norm w.
    q, _ = np.linalg.qr(np.column_stack([np.ones(s), np.eye(s)[:, : s - 1]]))
    B = q[:, 1:]
    ZB = Zs @ B
    U, sv, Vt = np.linalg.svd(ZB, full_matrices=False)
    # cutoff relative to Zs itself: directions along which the columns of Zs
    # agree to rounding error must not be amplified
    tol = max(Zs.shape) * np.finfo(float).eps * max(np.linalg.norm(Zs, 2), np.finfo(float).tiny)
    keep = sv > tol
    u = Vt[keep].T @ ((U[:, keep].T @ (y - Zs @ center)) / sv[keep])
    return center + B @ u


def simplex_objective(Z, y, w) -> float:
    r = np.asarray(y, dtype=float) - np.asarray(Z, dtype=float) @ np.asarray(w, dtype=float)
    return float(r @ r)


def solve_simplex_ls(Z, y, nonneg: bool = True) -> SimplexWeights:
    """Minimize ||y - Z w||^2 over sum(w) = 1 (and w >= 0 if ``nonneg``).

    Exact for small J: every support set is tried, smallest first and then
    lexicographically, solving the equality-constrained problem on it. The
    first candidate whose objective is not beaten by more than a 1e-12
    relative slack wins.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != y.shape[0] or Z.shape[0] < 1 or Z.shape[1] < 1:
        raise ValueError(f"bad shapes Z={Z.shape}, y={y.shape}")
    J = Z.shape[1]
    if not nonneg:
        w = _affine_ls(Z, y)
        return SimplexWeights(w, False, simplex_objective(Z, y, w))

    best_w, best_obj = None, np.inf
    for size in range(1, J + 1):
        for support in itertools.combinations(range(J), size):
            ws = _affine_ls(Z[:, support], y)
            if ws.min() < -NEG_TOL:
                continue
            w = np.zeros(J)
            w[list(support)] = np.maximum(ws, 0.0)
            w /= w.sum()
            obj = simplex_objective(Z, y, w)
            if best_w is None or obj < best_obj - TIE_SLACK * max(1.0, abs(best_obj)):
                best_w, best_obj = w, obj
    return SimplexWeights(best_w, True, best_obj)


# ---------------------------------------------------------------------------
# Level-1 ensembles


@dataclass(frozen=True)
class Level1Ensemble:
    """Simplex-weighted combination of base learners refit on all training data."""

    member_set: tuple[Learner, ...]
    alpha: SimplexWeights
    full_fit_members: tuple
    level1_data: Level1Data

    def __post_init__(self):
        if Learner.CR not in self.member_set:
            raise ValueError("constant regression must belong to every member set")

    def predict(self, X) -> np.ndarray:
        P = np.column_stack([m.predict(X) for m in self.full_fit_members])
        return P @ self.alpha.w

    def cv_predictions(self) -> np.ndarray:
        """Out-of-fold ensemble predictions ``z @ alpha``."""
        return self.level1_data.z @ self.alpha.w

    @property
    def cv_objective(self) -> float:
        return simplex_objective(self.level1_data.z, self.level1_data.y, self.alpha.w)

    def alpha_by_learner(self) -> np.ndarray:
        """Weights scattered into the fixed (CR, LR, QR, RBF) order."""
        out = np.zeros(len(LEARNERS))
        for kind, a in zip(self.member_set, self.alpha.w):
            out[LEARNERS.index(kind)] = a
        return out


def fit_full_models(ds: Dataset, kinds=LEARNERS, configs: LearnerConfigs = LearnerConfigs()) -> dict:
    return {Learner(k): fit_learner(k, ds, configs) for k in kinds}


def fit_level1(
    ds: Dataset,
    partition: CvPartition,
    member_set,
    configs: LearnerConfigs = LearnerConfigs(),
    nonneg: bool = True,
    *,
    level1_data: Level1Data | None = None,
    full_models: dict | None = None,
) -> Level1Ensemble:
    """Fit alpha on out-of-fold predictions, then refit members on all of ``ds``.

    ``level1_data`` and ``full_models`` may be passed to reuse fits shared
    between ensembles; ``level1_data`` may hold a superset of the members.
    """
    member_set = tuple(Learner(k) for k in member_set)
    if level1_data is None:
        level1_data = cv_level1_data(ds, partition, member_set, configs)
    data = level1_data.select(member_set)
    alpha = solve_simplex_ls(data.z, data.y, nonneg=nonneg)
    if full_models is None:
        full_models = fit_full_models(ds, member_set, configs)
    members = tuple(full_models[k] for k in member_set)
    return Level1Ensemble(member_set, alpha, members, data)


def predict_level1(ens: Level1Ensemble, x) -> np.ndarray | float:
    """Ensemble prediction; a 1-D ``x`` is one query point and returns a float."""
    x = np.asarray(x, dtype=float)
    out = ens.predict(x)
    return float(out[0]) if x.ndim == 1 else out
