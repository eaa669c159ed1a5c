"""Level-0 regressors: constant, ridge linear/quadratic, and RBF networks.

Every learner is fit by (regularized) least squares and returns an
immutable model object exposing ``predict(X)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .data import Dataset


class Learner(str, Enum):
    CR = "CR"
    LR = "LR"
    QR = "QR"
    RBF = "RBF"


#: Fixed learner order used for tie-breaking and for 4-vectors of weights.
LEARNERS = (Learner.CR, Learner.LR, Learner.QR, Learner.RBF)


class FitError(RuntimeError):
    """A learner could not be fit on the given data."""


class FeatureMap(str, Enum):
    IDENTITY = "identity"
    QUADRATIC = "quadratic"


class Basis(str, Enum):
    GAUSSIAN = "gaussian"
    MULTIQUADRIC = "multiquadric"
    INVERSE_MULTIQUADRIC = "inverse_multiquadric"
    THIN_PLATE_SPLINE = "thin_plate_spline"
    CUBIC = "cubic"
    LINEAR = "linear"


@dataclass(frozen=True)
class RidgeConfig:
    """Ridge settings.

    ``lam=None`` selects the scale-aware default
    ``relative_lambda * trace(Phi^T Phi) / p`` on the centred design.
    """

    lam: float | None = None
    feature_map: FeatureMap = FeatureMap.IDENTITY
    relative_lambda: float = 1e-6

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ValueError(f"ridge lambda must be >= 0, got {self.lam}")
        object.__setattr__(self, "feature_map", FeatureMap(self.feature_map))


@dataclass(frozen=True)
class RbfConfig:
    basis: Basis = Basis.GAUSSIAN
    center_grid: tuple[int, ...] | None = None
    inner_split_fraction: float = 0.2
    seed: int = 0
    ridge_lambda: float = 1e-8
    max_iter: int = 300

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis(self.basis))
        if self.center_grid is not None:
            grid = tuple(int(c) for c in self.center_grid)
            if not grid or min(grid) < 1:
                raise ValueError("center_grid candidates must be >= 1")
            object.__setattr__(self, "center_grid", grid)
        if not 0.0 < self.inner_split_fraction < 1.0:
            raise ValueError("inner_split_fraction must lie in (0, 1)")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")


@dataclass(frozen=True)
class LearnerConfigs:
    """Settings for the four base learners, bundled for pipeline calls."""

    lr: RidgeConfig = field(default_factory=RidgeConfig)
    qr: RidgeConfig = field(default_factory=lambda: RidgeConfig(feature_map=FeatureMap.QUADRATIC))
    rbf: RbfConfig = field(default_factory=RbfConfig)


# ---------------------------------------------------------------------------
# Models


def _as_matrix(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got array of shape {X.shape}")
    return X


@dataclass(frozen=True)
class ConstantModel:
    intercept: float
    n_features: int
    n_train: int
    train_mse: float
    kind: Learner = Learner.CR

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        return np.full(X.shape[0], self.intercept)


@dataclass(frozen=True)
class RidgeModel:
    """``intercept + design(x) @ coef`` with design per ``feature_map``."""

    intercept: float
    coef: np.ndarray
    feature_map: FeatureMap
    n_features: int
    lam: float
    n_train: int
    train_mse: float
    kind: Learner = Learner.LR

    def design(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        if self.feature_map is FeatureMap.QUADRATIC:
            return quadratic_design(X)
        return X

    def predict(self, X) -> np.ndarray:
        return self.intercept + self.design(X) @ self.coef

    @property
    def linear_coef(self) -> np.ndarray:
        return self.coef[: self.n_features]

    @property
    def quadratic_matrix(self) -> np.ndarray:
        """Symmetric Theta with the quadratic part written as 0.5 x^T Theta x."""
        I = self.n_features
        theta = np.zeros((I, I))
        if self.feature_map is not FeatureMap.QUADRATIC:
            return theta
        sq = self.coef[I : 2 * I]
        theta[np.diag_indices(I)] = 2.0 * sq
        iu, ju = np.triu_indices(I, k=1)
        cross = self.coef[2 * I :]
        theta[iu, ju] = cross
        theta[ju, iu] = cross
        return theta


@dataclass(frozen=True)
class RbfModel:
    """``intercept + sum_m weights[m] * phi(||z - centers[m]||)``.

    ``z`` is the input standardized with the training mean and scale.
    """

    intercept: float
    weights: np.ndarray
    centers: np.ndarray
    sigma: float
    basis: Basis
    mean: np.ndarray
    scale: np.ndarray
    n_train: int
    train_mse: float
    selection_scores: dict = field(default_factory=dict)
    kind: Learner = Learner.RBF

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def hidden(self, X) -> np.ndarray:
        Z = (_as_matrix(X, self.n_features) - self.mean) / self.scale
        return rbf_basis(self.basis, _distances(Z, self.centers), self.sigma)

    def predict(self, X) -> np.ndarray:
        return self.intercept + self.hidden(X) @ self.weights


# ---------------------------------------------------------------------------
# Constant and ridge regression


def fit_constant(train: Dataset) -> ConstantModel:
    y = train.target
    if y.size == 0:
        raise FitError("cannot fit constant model on an empty dataset")
    mean = float(np.mean(y))
    return ConstantModel(
        intercept=mean,
        n_features=train.n_features,
        n_train=y.size,
        train_mse=float(np.mean((y - mean) ** 2)),
    )


def expand_quadratic(x) -> np.ndarray:
    """Non-constant quadratic terms of ``x``.

    Order: the I singles, then the I squares, then the I(I-1)/2 cross
    products x_i x_j (i < j) in lexicographic order.
    """
    x = np.asarray(x, dtype=float)
    return quadratic_design(x[None, :])[0]


def quadratic_design(X: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(X.shape[1], k=1)
    return np.hstack([X, X**2, X[:, i] * X[:, j]])


def _ridge_solve(Phi: np.ndarray, y: np.ndarray, lam: float | None, relative: float):
    """Ridge with unpenalized intercept; returns (intercept, coef, lam)."""
    mu = Phi.mean(axis=0)
    ybar = float(y.mean())
    Pc = Phi - mu
    yc = y - ybar
    p = Pc.shape[1]
    G = Pc.T @ Pc
    if lam is None:
        tr = float(np.trace(G))
        lam = relative * tr / p if tr > 0 else 0.0
    if lam == 0.0:
        if not np.any(Pc):
            return ybar, np.zeros(p), 0.0
        if np.linalg.matrix_rank(Pc) < p:
            raise FitError(
                f"normal equations are singular at lambda=0 (rank < {p}); use lambda > 0"
            )
    A = G + lam * np.eye(p)
    try:
        coef = np.linalg.solve(A, Pc.T @ yc)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"ridge solve failed: {exc}") from exc
    return ybar - float(mu @ coef), coef, float(lam)


def fit_ridge(train: Dataset, cfg: RidgeConfig = RidgeConfig()) -> RidgeModel:
    """Minimize ||y - b0 - Phi b||^2 + lam ||b||^2 (LR for identity, QR for quadratic)."""
    X, y = train.features, train.target
    quad = cfg.feature_map is FeatureMap.QUADRATIC
    Phi = quadratic_design(X) if quad else X
    b0, coef, lam = _ridge_solve(Phi, y, cfg.lam, cfg.relative_lambda)
    if not (math.isfinite(b0) and np.all(np.isfinite(coef))):
        raise FitError("ridge fit produced non-finite coefficients")
    resid = y - b0 - Phi @ coef
    coef.setflags(write=False)
    return RidgeModel(
        intercept=b0,
        coef=coef,
        feature_map=cfg.feature_map,
        n_features=X.shape[1],
        lam=lam,
        n_train=y.size,
        train_mse=float(np.mean(resid**2)),
        kind=Learner.QR if quad else Learner.LR,
    )


# ---------------------------------------------------------------------------
# k-means and radial basis networks


def _sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d2 = (A**2).sum(1)[:, None] + (B**2).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def _distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.sqrt(_sq_distances(A, B))


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    sse_history: tuple[float, ...]
    n_iter: int
    converged: bool


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_distances(points, points[chosen]).ravel()
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_distances(points, points[[idx]]).ravel())
    return points[chosen].copy()


def kmeans_fit(points, n_centers: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm from a seeded k-means++ start.

    Iterates until the assignment stops changing or ``max_iter`` is hit.
    A cluster that empties is re-seeded at the point farthest from its
    currently assigned center.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    n = P.shape[0]
    if not 1 <= n_centers <= n:
        raise ValueError(f"need 1 <= centers <= {n}, got {n_centers}")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(P, n_centers, rng)
    labels = None
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_distances(P, C)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        point_cost = d2[np.arange(n), labels]
        for c in range(n_centers):
            members = labels == c
            if members.any():
                C[c] = P[members].mean(axis=0)
            else:
                far = int(point_cost.argmax())
                C[c] = P[far]
                labels[far] = c
                point_cost[far] = 0.0
    C.setflags(write=False)
    return KMeansResult(C, labels, tuple(history), it, converged)


def kmeans(points, n_centers: int, seed: int = 0, max_iter: int = 300) -> np.ndarray:
    """Return the ``n_centers x I`` matrix of final k-means centers."""
    return kmeans_fit(points, n_centers, seed, max_iter).centers


def rbf_basis(kind, r, sigma: float = 1.0):
    """Evaluate a radial basis function at radius ``r`` (scalar or array)."""
    kind = Basis(kind)
    r = np.asarray(r, dtype=float)
    if kind is Basis.GAUSSIAN:
        out = np.exp(-(r**2) / (2.0 * sigma**2))
    elif kind is Basis.MULTIQUADRIC:
        out = np.sqrt(r**2 + sigma**2)
    elif kind is Basis.INVERSE_MULTIQUADRIC:
        out = 1.0 / np.sqrt(r**2 + sigma**2)
    elif kind is Basis.THIN_PLATE_SPLINE:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0, r**2 * np.log(np.where(r > 0, r, 1.0)), 0.0)
    elif kind is Basis.CUBIC:
        out = r**3
    else:
        out = r.copy()
    return float(out) if out.ndim == 0 else out


SIGMA_FLOOR = 1e-6


def spread(centers: np.ndarray) -> float:
    """Common width d_max / sqrt(2M) from the maximum inter-center distance."""
    M = centers.shape[0]
    d_max = float(_distances(centers, centers).max()) if M > 1 else 0.0
    return max(d_max / math.sqrt(2.0 * M), SIGMA_FLOOR)


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def _fit_rbf_fixed(Z: np.ndarray, y: np.ndarray, n_centers: int, cfg: RbfConfig):
    centers = kmeans(Z, n_centers, seed=cfg.seed, max_iter=cfg.max_iter)
    sigma = spread(centers)
    H = rbf_basis(cfg.basis, _distances(Z, centers), sigma)
    b0, w, _ = _ridge_solve(H, y, cfg.ridge_lambda, 0.0)
    return b0, w, centers, sigma


def default_center_grid(n_inner: int) -> tuple[int, ...]:
    return tuple(sorted({c for c in (2, 5, 10, 25, min(50, n_inner)) if 1 <= c <= n_inner}))


def fit_rbf(train: Dataset, cfg: RbfConfig = RbfConfig()) -> RbfModel:
    """Fit an RBF network, choosing the number of centers on an inner split.

    Features are standardized; each candidate center count is scored by
    validation MSE on the last ceil(fraction * N) rows of a seeded shuffle,
    and the winner (ties to the smaller count) is refit on all rows.
    A grid with a single candidate skips the inner split.
    """
    X, y = train.features, train.target
    n = y.size
    if n < 2:
        raise FitError("RBF network needs at least 2 training rows")
    mean, scale = _standardize(X)
    Z = (X - mean) / scale

    n_val = min(max(math.ceil(cfg.inner_split_fraction * n), 1), n - 1)
    n_inner = n - n_val
    if cfg.center_grid is None:
        grid = default_center_grid(n_inner)
    else:
        grid = tuple(sorted(set(cfg.center_grid)))

    scores: dict[int, float] = {}
    if len(grid) == 1:
        if grid[0] > n:
            raise FitError(f"center count {grid[0]} exceeds {n} training rows")
        best = grid[0]
    else:
        feasible = [c for c in grid if c <= n_inner]
        if not feasible:
            raise FitError(f"no center count in {grid} fits {n_inner} inner-training rows")
        perm = np.random.default_rng(cfg.seed).permutation(n)
        inner, val = perm[:n_inner], perm[n_inner:]
        for c in feasible:
            b0, w, centers, sigma = _fit_rbf_fixed(Z[inner], y[inner], c, cfg)
            pred = b0 + rbf_basis(cfg.basis, _distances(Z[val], centers), sigma) @ w
            scores[c] = float(np.mean((y[val] - pred) ** 2))
        best = min(feasible, key=lambda c: (scores[c], c))

    b0, w, centers, sigma = _fit_rbf_fixed(Z, y, best, cfg)
    if not (math.isfinite(b0) and np.all(np.isfinite(w))):
        raise FitError("RBF weight solve produced non-finite values")
    fitted = b0 + rbf_basis(cfg.basis, _distances(Z, centers), sigma) @ w
    w.setflags(write=False)
    return RbfModel(
        intercept=b0,
        weights=w,
        centers=centers,
        sigma=sigma,
        basis=cfg.basis,
        mean=mean,
        scale=scale,
        n_train=n,
        train_mse=float(np.mean((y - fitted) ** 2)),
        selection_scores=scores,
    )


def fit_learner(kind, train: Dataset, configs: LearnerConfigs = LearnerConfigs()):
    """Dispatch to the fitting routine for ``kind``."""
    kind = Learner(kind)
    if kind is Learner.CR:
        return fit_constant(train)
    if kind is Learner.LR:
        return fit_ridge(train, replace(configs.lr, feature_map=FeatureMap.IDENTITY))
    if kind is Learner.QR:
        return fit_ridge(train, replace(configs.qr, feature_map=FeatureMap.QUADRATIC))
    return fit_rbf(train, configs.rbf)
