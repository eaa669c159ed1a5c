"""Error metrics, the per-dataset oracle, and paired signed-rank testing."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm, rankdata

from .level0 import LEARNERS, Learner


class MetricError(ValueError):
    """A metric or test is undefined for the given inputs."""


# ---------------------------------------------------------------------------
# NMSE and oracle


@dataclass(frozen=True, order=True)
class NmseValue:
    value: float
    n: int = field(compare=False)

    def __float__(self):
        return self.value


def nmse(y, yhat) -> NmseValue:
    """Squared error normalized by the spread of ``y`` about its own mean."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise MetricError(f"shape mismatch: y {y.shape}, yhat {yhat.shape}")
    if y.size < 2:
        raise MetricError("nmse needs at least 2 observations")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise MetricError("nmse undefined for a constant target")
    return NmseValue(float(np.sum((y - yhat) ** 2)) / sst, int(y.size))


def oracle_best(scores: dict) -> tuple:
    """Minimum-NMSE entry; ties resolve in (CR, LR, QR, RBF) order, then by key."""
    if not scores:
        raise MetricError("empty score map")

    def order(item):
        key, val = item
        try:
            pos = LEARNERS.index(Learner(key))
        except ValueError:
            pos = len(LEARNERS)
        return (float(val), pos, str(key))

    key, val = min(scores.items(), key=order)
    return key, val


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test

EXACT_MAX_N = 50
MIN_N = 5
_TIE_DECIMALS = 12


def signed_rank_counts(n: int) -> np.ndarray:
    """Number of sign patterns of ranks 1..n giving each positive-rank sum."""
    counts = np.zeros(n * (n + 1) // 2 + 1, dtype=np.int64)
    counts[0] = 1
    for r in range(1, n + 1):
        counts[r:] = counts[r:] + counts[:-r].copy()
    return counts


def signed_rank_cdf(n: int) -> np.ndarray:
    """P(W+ <= w) for w = 0..n(n+1)/2 under the null, no ties."""
    return np.cumsum(signed_rank_counts(n)) / 2.0**n


def exact_p_value(w: float, n: int) -> float:
    counts = signed_rank_counts(n)
    total = 2.0**n
    w = int(round(w))
    lower = counts[: w + 1].sum() / total
    upper = counts[w:].sum() / total
    return float(min(1.0, 2.0 * min(lower, upper)))


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    method: str
    n_effective: int
    hl_estimate: float
    ci_low: float
    ci_high: float
    confidence: float
    z: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _normalized_abs(d: np.ndarray) -> np.ndarray:
    absd = np.abs(d)
    scale = absd.max() if absd.size else 0.0
    if scale == 0.0:
        return np.zeros_like(absd)
    return np.round(absd / scale, _TIE_DECIMALS)


def walsh_averages(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    i, j = np.triu_indices(d.size)
    return (d[i] + d[j]) / 2.0


def hodges_lehmann(d, confidence: float = 0.95) -> tuple[float, float, float]:
    """Median of Walsh averages with its signed-rank confidence interval.

    The interval runs from the (k+1)-th smallest to the (k+1)-th largest
    Walsh average, k the largest integer with P(W+ <= k) <= (1 - c) / 2.
    """
    d = np.asarray(d, dtype=float)
    n = d.size
    w = np.sort(walsh_averages(d))
    alpha = (1.0 - confidence) / 2.0
    if n <= EXACT_MAX_N:
        cdf = signed_rank_cdf(n)
        ok = np.flatnonzero(cdf <= alpha)
        k = int(ok[-1]) if ok.size else -1
    else:
        mu = n * (n + 1) / 4.0
        sd = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0)
        k = int(math.floor(mu - 0.5 - norm.ppf(1.0 - alpha) * sd))
    k = max(k, -1)
    lo = w[k + 1] if k + 1 < w.size else w[-1]
    hi = w[w.size - 2 - k] if w.size - 2 - k >= 0 else w[0]
    return float(np.median(w)), float(lo), float(hi)


def wilcoxon_signed_rank(a, b, confidence: float = 0.95) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples ``a``, ``b``.

    Zero differences are dropped and tied |d| share average ranks (|d| are
    compared after normalizing by max|d| and rounding to 12 decimals, so
    floating noise does not split ties). The p-value is exact when at most
    50 non-zero differences remain and none are tied; otherwise a normal
    approximation with continuity and tie corrections is used.

    The Hodges-Lehmann estimate and confidence interval use all
    differences, zeros included.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise MetricError(f"paired samples must have equal length, got {a.shape} and {b.shape}")
    d = a - b
    key = _normalized_abs(d)
    nz = key > 0
    n = int(nz.sum())
    if n == 0:
        raise MetricError("no non-zero differences (p = 1 by convention)")
    if n < MIN_N:
        raise MetricError(f"too few non-zero differences: {n} < {MIN_N}")
    dn, kn = d[nz], key[nz]
    ranks = rankdata(kn)
    w_plus = float(ranks[dn > 0].sum())
    _, tie_counts = np.unique(kn, return_counts=True)
    ties = bool(np.any(tie_counts > 1))

    z = None
    if n <= EXACT_MAX_N and not ties:
        p = exact_p_value(w_plus, n)
        method = "exact"
    else:
        mu = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        diff = w_plus - mu
        z = (diff - 0.5 * np.sign(diff)) / math.sqrt(var)
        p = float(min(1.0, 2.0 * norm.sf(abs(z))))
        method = "normal_approx"
        z = float(z)

    est, lo, hi = hodges_lehmann(d, confidence)
    return WilcoxonResult(w_plus, p, method, n, est, lo, hi, confidence, z)


# ---------------------------------------------------------------------------
# Report tables

LEVEL1_NAMES = ("fE1", "fE2", "fE3")


@dataclass
class DatasetRow:
    """Test-set NMSEs for one dataset, the inputs to every report table."""

    name: str
    n_records: int
    n_vars: int
    base: dict            # learner name -> NMSE
    level1: dict          # fE1/fE2/fE3 -> NMSE
    level2: list          # NMSE of fE123^m for m = 0..M
    chosen_m: int
    rule: str
    baselines: dict = field(default_factory=dict)

    @property
    def best(self) -> tuple[str, float]:
        return oracle_best(self.base)

    @property
    def selected(self) -> float:
        return self.level2[self.chosen_m]


@dataclass
class EvalReport:
    table1: list
    table2: list
    table3: list
    differences: dict
    comparisons: dict
    best_level1: str


def signed_differences(names, first, second) -> list:
    """(name, first - second) sorted by absolute value; positive favours ``second``."""
    rows = [(n, float(f) - float(s)) for n, f, s in zip(names, first, second)]
    return sorted(rows, key=lambda r: (abs(r[1]), r[0]))


def _test_or_reason(a, b, confidence: float) -> dict:
    try:
        return {"test": wilcoxon_signed_rank(a, b, confidence).to_dict()}
    except MetricError as exc:
        return {"test": None, "reason": str(exc), "p_value": 1.0 if "no non-zero" in str(exc) else None}


def choose_best_level1(rows, confidence: float = 0.95) -> str:
    """Level-1 ensemble performing best against the oracle across datasets.

    Highest Wilcoxon p-value against the oracle wins; if the test is not
    computable for every ensemble, the lowest mean NMSE decides.
    """
    best = [r.best[1] for r in rows]
    pvals = {}
    for name in LEVEL1_NAMES:
        try:
            pvals[name] = wilcoxon_signed_rank(best, [r.level1[name] for r in rows], confidence).p_value
        except MetricError:
            pvals = None
            break
    means = {n: float(np.mean([r.level1[n] for r in rows])) for n in LEVEL1_NAMES}
    if pvals is None:
        return min(LEVEL1_NAMES, key=lambda n: (means[n], n))
    return min(LEVEL1_NAMES, key=lambda n: (-pvals[n], means[n], n))


def build_report(rows, confidence: float = 0.95) -> EvalReport:
    """Assemble the three result tables, difference series and paired tests."""
    rows = sorted(rows, key=lambda r: r.name)
    if not rows:
        raise MetricError("no dataset rows")
    n_level2 = {len(r.level2) for r in rows}
    if len(n_level2) != 1:
        raise MetricError(f"inconsistent number of partitions across rows: {sorted(n_level2)}")
    for r in rows:
        if set(r.base) != {k.value for k in LEARNERS} or set(r.level1) != set(LEVEL1_NAMES):
            raise MetricError(f"row {r.name!r} does not match the table schema")
        if not 0 <= r.chosen_m < len(r.level2):
            raise MetricError(f"row {r.name!r}: chosen partition {r.chosen_m} not reported")

    fe_star = choose_best_level1(rows, confidence)
    table1 = [dict(DB=r.name, **r.base, **r.level1, Rec=r.n_records, Var=r.n_vars) for r in rows]
    table2 = []
    for r in rows:
        rec = {"DB": r.name}
        rec.update({f"fE123_{m}": v for m, v in enumerate(r.level2)})
        rec.update(Rule=r.rule, Selected=r.chosen_m, Rec=r.n_records, Var=r.n_vars)
        table2.append(rec)
    table3 = [
        dict(DB=r.name, fE_star=r.level1[fe_star], fE123_star=r.selected, Rec=r.n_records, Var=r.n_vars)
        for r in rows
    ]

    names = [r.name for r in rows]
    best = [r.best[1] for r in rows]
    selected = [r.selected for r in rows]
    pairs = {f"Best_vs_{n}": (best, [r.level1[n] for r in rows]) for n in LEVEL1_NAMES}
    pairs["fE_star_vs_fE123_star"] = ([r.level1[fe_star] for r in rows], selected)
    pairs["Best_vs_fE123_star"] = (best, selected)
    baseline_names = sorted(set().union(*(r.baselines for r in rows)))
    for b in baseline_names:
        have = [r for r in rows if b in r.baselines]
        if len(have) != len(rows):
            continue
        pairs[f"{b}_vs_fE123_star"] = ([r.baselines[b] for r in rows], selected)

    differences = {k: signed_differences(names, f, s) for k, (f, s) in pairs.items()}
    comparisons = {k: _test_or_reason(f, s, confidence) for k, (f, s) in pairs.items()}
    return EvalReport(table1, table2, table3, differences, comparisons, fe_star)
