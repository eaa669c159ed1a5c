"""Choosing a CV partition from the error correlations of level-1 ensembles.

Each partition m yields an alternative: the vector of pairwise Pearson
correlations between the level-1 ensembles' out-of-fold errors. The
alternatives form a decision matrix whose per-criterion ranks drive a
segment-by-segment max-min selection. Lower correlation is better.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class CorrelationVector:
    m: int
    g: np.ndarray
    degenerate_columns: tuple[int, ...] = ()

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)


def error_correlations(E, m: int = 0) -> CorrelationVector:
    """Pearson correlations of error columns, ordered (r_12, r_13, ..., r_(J-1)J).

    A zero-variance column has undefined correlation; its entries are set
    to 0 and its index is recorded in ``degenerate_columns``.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] < 2 or E.shape[1] < 2:
        raise ValueError(f"need an N x J error matrix with N >= 2, J >= 2; got {E.shape}")
    C = E - E.mean(axis=0)
    norms = np.sqrt((C**2).sum(axis=0))
    scale = np.abs(E).max(axis=0)
    flat = norms <= 1e-14 * np.maximum(scale, 1.0) * np.sqrt(E.shape[0])
    safe = np.where(flat, 1.0, norms)
    R = (C.T @ C) / np.outer(safe, safe)
    R = np.clip(R, -1.0, 1.0)
    R[flat, :] = 0.0
    R[:, flat] = 0.0
    iu, ju = np.triu_indices(E.shape[1], k=1)
    return CorrelationVector(m, R[iu, ju], tuple(int(j) for j in np.flatnonzero(flat)))


@dataclass(frozen=True)
class DecisionMatrix:
    """Alternatives (rows, m = 0..M) by criteria (columns)."""

    G: np.ndarray
    ms: tuple[int, ...]
    g_min: np.ndarray
    ranks: np.ndarray
    ar_scores: np.ndarray
    degenerate: tuple[tuple[int, tuple[int, ...]], ...] = ()

    @property
    def n_alternatives(self) -> int:
        return self.G.shape[0]

    @property
    def n_criteria(self) -> int:
        return self.G.shape[1]


def build_decision_matrix(rows) -> DecisionMatrix:
    """Stack alternatives, take column minima, rank each column and sum ranks.

    Ranks are competition ranks: tied values share the smallest rank, and
    rank 1 is the smallest correlation.
    """
    rows = list(rows)
    if len(rows) < 2:
        raise ValueError("need at least two alternatives")
    gs = [np.asarray(r.g if isinstance(r, CorrelationVector) else r, dtype=float) for r in rows]
    if len({g.shape for g in gs}) != 1 or gs[0].ndim != 1 or gs[0].size < 1:
        raise ValueError("alternatives must all have the same number of criteria")
    ms = tuple(r.m if isinstance(r, CorrelationVector) else i for i, r in enumerate(rows))
    G = np.vstack(gs)
    ranks = np.column_stack(
        [rankdata(G[:, q], method="min").astype(np.int64) for q in range(G.shape[1])]
    )
    for a in (G, ranks):
        a.setflags(write=False)
    degenerate = tuple(
        (r.m, r.degenerate_columns)
        for r in rows
        if isinstance(r, CorrelationVector) and r.degenerate_columns
    )
    return DecisionMatrix(G, ms, G.min(axis=0), ranks, ranks.sum(axis=1), degenerate)


def med_rule(dm: DecisionMatrix) -> tuple[int, int]:
    """Return (row, criterion) holding the (lower) median of the column minima.

    The row is the alternative attaining that column's minimum; ties go to
    the smaller row index.
    """
    Q = dm.n_criteria
    order = np.argsort(dm.g_min, kind="stable")
    q_star = int(order[(Q - 1) // 2])
    row = int(np.argmin(dm.G[:, q_star]))
    return row, q_star


def find_best_ar(candidates, dm: DecisionMatrix, segment: int) -> tuple[int, int]:
    """Among candidate rows, pick the minimum ar score (ties to smaller row).

    Returns (row, criterion) where the criterion is the first with rank
    equal to ``segment``.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates left")
    row = min(candidates, key=lambda r: (dm.ar_scores[r], r))
    hits = np.flatnonzero(dm.ranks[row] == segment)
    if hits.size == 0:
        raise ValueError(f"row {row} has no criterion at rank {segment}")
    return row, int(hits[0])


def _has_outliers(rank_vec: np.ndarray, q_star: int, segment: int, worst: int) -> tuple[bool, str]:
    others = np.delete(rank_vec, q_star)
    if others.size and others.min() == segment:
        return True, "min"
    if rank_vec.max() == worst:
        return True, "max"
    return False, ""


class Rule(str, Enum):
    MED = "MED"
    AR_SEGMENT = "AR"
    FALLBACK_ORIGINAL = "FALLBACK"


@dataclass(frozen=True)
class TraceEntry:
    segment: int
    m: int
    rule: str
    verdict: str
    reason: str = ""

    def line(self) -> str:
        text = f"segment={self.segment} m={self.m} rule={self.rule} verdict={self.verdict}"
        return f"{text} reason={self.reason}" if self.reason else text


@dataclass(frozen=True)
class SelectionResult:
    chosen_m: int
    rule_used: Rule
    segment: int
    trace: tuple[TraceEntry, ...] = field(default=())

    @property
    def label(self) -> str:
        """Table label: MED, AR-L<segment> or FALLBACK."""
        if self.rule_used is Rule.AR_SEGMENT:
            return f"AR-L{self.segment}"
        return self.rule_used.value

    def trace_text(self) -> str:
        return "\n".join(e.line() for e in self.trace) + "\n"


def algorithm_s(dm: DecisionMatrix) -> SelectionResult:
    """Max-min rule-based selection of a partition.

    Segment 1 applies the median rule to the alternatives holding some
    rank 1. An alternative is rejected as carrying potential outliers when
    a second criterion also sits at the current segment's rank (min rule)
    or any of its ranks is the worst possible, M+1 (max rule). Rejection at
    segment 1 discards every rank-1 alternative. Segments 2..M+1 then take the
    remaining alternatives with some rank equal to the segment, best ar
    score first, discarding rejected ones individually. Segment M+1 is also
    visited so the trace records those candidates, although any of them
    necessarily fails the max rule. If nothing is accepted, the original
    partition (m = 0) is returned.
    """
    n_alt = dm.n_alternatives
    M = n_alt - 1
    worst = n_alt
    trace: list[TraceEntry] = []
    ranks = dm.ranks
    origin = dm.ms.index(0) if 0 in dm.ms else 0
    for m, cols in dm.degenerate:
        flat = ",".join(str(c + 1) for c in cols)
        trace.append(TraceEntry(0, m, "CORR", "warn", f"zero-variance-error-columns:{flat}"))

    remaining = set(range(n_alt))
    seg1 = {r for r in remaining if np.any(ranks[r] == 1)}
    row, q_star = med_rule(dm)
    bad, why = _has_outliers(ranks[row], q_star, 1, worst)
    if not bad:
        trace.append(TraceEntry(1, dm.ms[row], "MED", "accept"))
        return SelectionResult(dm.ms[row], Rule.MED, 1, tuple(trace))
    trace.append(TraceEntry(1, dm.ms[row], "MED", "reject", f"{why}-rule"))
    remaining -= seg1

    for segment in range(2, M + 2):
        if not remaining:
            break
        pool = sorted(r for r in remaining if np.any(ranks[r] == segment))
        while pool:
            row, q_star = find_best_ar(pool, dm, segment)
            bad, why = _has_outliers(ranks[row], q_star, segment, worst)
            rule = f"AR-L{segment}"
            if not bad:
                trace.append(TraceEntry(segment, dm.ms[row], rule, "accept"))
                return SelectionResult(dm.ms[row], Rule.AR_SEGMENT, segment, tuple(trace))
            trace.append(TraceEntry(segment, dm.ms[row], rule, "reject", f"{why}-rule"))
            pool.remove(row)
            remaining.discard(row)

    trace.append(TraceEntry(0, dm.ms[origin], "FALLBACK", "accept", "no alternative accepted"))
    return SelectionResult(dm.ms[origin], Rule.FALLBACK_ORIGINAL, 0, tuple(trace))
