"""Level-2 learning over the three standard stacking ensembles.

Two-step learning fits each ensemble's alpha first and then a simplex
weight beta over their out-of-fold outputs. All-at-once learning fits
alpha and beta jointly; the resulting combination collapses to a single
weight vector gamma over the four base learners.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import CvPartition, Dataset
from .level0 import LEARNERS, Learner, LearnerConfigs
from .stacking import (
    MEMBER_SETS,
    Level1Data,
    Level1Ensemble,
    SimplexWeights,
    cv_level1_data,
    fit_full_models,
    fit_level1,
    simplex_objective,
    solve_simplex_ls,
)


@dataclass(frozen=True)
class GammaWeights:
    """Base-learner weights in (CR, LR, QR, RBF) order."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        if g.shape != (len(LEARNERS),):
            raise ValueError(f"gamma must have {len(LEARNERS)} entries")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    def __getitem__(self, kind) -> float:
        return float(self.gamma[LEARNERS.index(Learner(kind))])


def _support_mask(member_set) -> np.ndarray:
    return np.array([k in member_set for k in LEARNERS])


def expand_gamma(alphas, beta, member_sets=MEMBER_SETS) -> GammaWeights:
    """gamma = sum_j beta_j * alpha_j with each alpha_j given over (CR, LR, QR, RBF).

    Raises ``ValueError`` if some alpha_j puts weight outside its member set.
    """
    b = beta.w if isinstance(beta, SimplexWeights) else np.asarray(beta, dtype=float)
    A = np.asarray(alphas, dtype=float)
    if A.shape != (len(member_sets), len(LEARNERS)) or b.shape != (len(member_sets),):
        raise ValueError(f"expected {len(member_sets)} alphas over {len(LEARNERS)} learners")
    for j, ms in enumerate(member_sets):
        if np.any(A[j][~_support_mask(ms)] != 0):
            raise ValueError(f"alpha {j + 1} has weight outside its members {[k.value for k in ms]}")
    return GammaWeights(b @ A)


@dataclass(frozen=True)
class Level2Ensemble:
    partition_m: int
    level1: tuple[Level1Ensemble, ...]
    beta: SimplexWeights
    error_matrix: np.ndarray
    cv_nmse: float
    base_data: Level1Data = field(repr=False)

    @property
    def y(self) -> np.ndarray:
        return self.base_data.y

    def level2_inputs(self) -> np.ndarray:
        """Out-of-fold outputs of the level-1 ensembles (N x 3)."""
        return np.column_stack([e.cv_predictions() for e in self.level1])

    @property
    def cv_objective(self) -> float:
        return simplex_objective(self.level2_inputs(), self.y, self.beta.w)

    def gamma(self) -> GammaWeights:
        return expand_gamma([e.alpha_by_learner() for e in self.level1], self.beta)

    def predict(self, X) -> np.ndarray:
        P = np.column_stack([e.predict(X) for e in self.level1])
        return P @ self.beta.w


def _sst(y: np.ndarray) -> float:
    return float(np.sum((y - y.mean()) ** 2))


def fit_level2_two_step(
    ds: Dataset,
    partition: CvPartition,
    configs: LearnerConfigs = LearnerConfigs(),
    nonneg_alpha: bool = True,
    *,
    base_data: Level1Data | None = None,
    full_models: dict | None = None,
) -> Level2Ensemble:
    """Two-step (beta) learning under one CV partition.

    Each base learner is fit once per fold and shared by the three
    ensembles. The error matrix is taken from the level-1 out-of-fold
    outputs before beta is solved.
    """
    if base_data is None:
        base_data = cv_level1_data(ds, partition, LEARNERS, configs)
    if full_models is None:
        full_models = fit_full_models(ds, LEARNERS, configs)
    level1 = tuple(
        fit_level1(
            ds, partition, ms, configs, nonneg_alpha,
            level1_data=base_data, full_models=full_models,
        )
        for ms in MEMBER_SETS
    )
    Z2 = np.column_stack([e.cv_predictions() for e in level1])
    y = base_data.y
    E = y[:, None] - Z2
    E.setflags(write=False)
    beta = solve_simplex_ls(Z2, y, nonneg=True)
    sst = _sst(y)
    cv_nmse = beta.objective / sst if sst > 0 else float("nan")
    return Level2Ensemble(partition.m, level1, beta, E, cv_nmse, base_data)


def predict_level2(ens: Level2Ensemble, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    out = ens.predict(x)
    return float(out[0]) if x.ndim == 1 else out


# ---------------------------------------------------------------------------
# All-at-once (gamma) learning


@dataclass(frozen=True)
class AllAtOnceResult:
    alphas: np.ndarray  # 3 x 4, rows over (CR, LR, QR, RBF)
    beta: np.ndarray
    gamma: GammaWeights
    objective: float
    history: tuple[float, ...]
    converged: bool
    start: str

    def predict(self, full_models: dict, X) -> np.ndarray:
        P = np.column_stack([full_models[k].predict(X) for k in LEARNERS])
        return P @ self.gamma.gamma


def joint_objective(Z: np.ndarray, y: np.ndarray, alphas: np.ndarray, beta: np.ndarray) -> float:
    return simplex_objective(Z, y, beta @ alphas)


def _alternate(Z, y, alphas, beta, max_rounds, tol, start):
    alphas = np.array(alphas, dtype=float)
    beta = np.array(beta, dtype=float)
    masks = [_support_mask(ms) for ms in MEMBER_SETS]
    obj = joint_objective(Z, y, alphas, beta)
    history = [obj]
    converged = False
    for _ in range(max_rounds):
        prev = obj
        C = Z @ alphas.T
        cand = solve_simplex_ls(C, y, nonneg=True).w
        cand_obj = joint_objective(Z, y, alphas, cand)
        if cand_obj <= obj:
            beta, obj = cand, cand_obj
        for j, mask in enumerate(masks):
            if beta[j] == 0.0:
                continue
            others = Z @ (beta @ alphas - beta[j] * alphas[j])
            w = solve_simplex_ls(beta[j] * Z[:, mask], y - others, nonneg=True).w
            trial = alphas.copy()
            trial[j] = 0.0
            trial[j, mask] = w
            trial_obj = joint_objective(Z, y, trial, beta)
            if trial_obj <= obj:
                alphas, obj = trial, trial_obj
        history.append(obj)
        if prev - obj <= tol * max(prev, np.finfo(float).tiny):
            converged = True
            break
    return alphas, beta, obj, history, converged, start


def fit_level2_all_at_once(
    ds: Dataset | None = None,
    partition: CvPartition | None = None,
    max_rounds: int = 200,
    tol: float = 1e-10,
    *,
    configs: LearnerConfigs = LearnerConfigs(),
    base_data: Level1Data | None = None,
    two_step: Level2Ensemble | None = None,
) -> AllAtOnceResult:
    """Jointly fit alpha' and beta' by block-coordinate descent.

    Each block (beta' or one alpha'_j) is an exact simplex least-squares
    solve, so the objective never increases. Two starts are run, uniform
    weights and the two-step solution when supplied, and the lower final
    objective is kept.
    """
    if base_data is None:
        if ds is None or partition is None:
            raise ValueError("need either base_data or (ds, partition)")
        base_data = cv_level1_data(ds, partition, LEARNERS, configs)
    if base_data.member_kinds != LEARNERS:
        base_data = base_data.select(LEARNERS)
    Z, y = base_data.z, base_data.y

    uniform = np.array([_support_mask(ms) / 3.0 for ms in MEMBER_SETS])
    starts = [(uniform, np.full(3, 1.0 / 3.0), "uniform")]
    if two_step is not None:
        A = np.array([e.alpha_by_learner() for e in two_step.level1])
        starts.append((A, two_step.beta.w, "two_step"))

    runs = [_alternate(Z, y, a, b, max_rounds, tol, s) for a, b, s in starts]
    alphas, beta, obj, history, converged, start = min(runs, key=lambda r: r[2])
    if not converged:
        warnings.warn(
            f"all-at-once learning stopped after {max_rounds} rounds "
            f"without converging (objective {obj:.6g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return AllAtOnceResult(
        alphas=alphas,
        beta=beta,
        gamma=GammaWeights(beta @ alphas),
        objective=obj,
        history=tuple(history),
        converged=converged,
        start=start,
    )
