"""Confidence calibration of retrieval rankings.

The ranking task is recast as multi-class classification: for each query the
top five retrieved documents form the classes, a softmax over their raw
scores gives a probability distribution, the rank-1 document is the
prediction and its probability the confidence.  Expected Calibration Error
then measures the gap between stated confidence and empirical accuracy::

    ECE = sum_m (|B_m| / n) * |acc(B_m) - conf(B_m)|

with M equal-width confidence bins (default 10); bin edges are left-open,
right-closed, except the first bin which also contains 0.  Softmax uses
temperature 1 with max-subtraction for numerical stability.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Mapping, Sequence, Tuple

import numpy as np

from .ensemble import CriterionWeights, ScoreBreakdown, aggregate
from .evaluation import QrelsLike, ScoredRun, _relevant


class EmptySamples(ValueError):
    """Calibration statistics were requested over zero samples."""


@dataclass(frozen=True)
class CalibrationSample:
    """One query's prediction: how confident the ranker was in its top
    document, and whether that document was actually relevant."""

    confidence: float
    correct: bool


@dataclass(frozen=True)
class SkippedQuery:
    query_id: str
    n_docs: int


@dataclass(frozen=True)
class BinStats:
    index: int
    count: int
    mean_confidence: float
    accuracy: float


def softmax(scores: Sequence[float]) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def confidence_run(
    breakdowns: Mapping[str, Sequence[ScoreBreakdown]],
    weights: CriterionWeights,
) -> ScoredRun:
    """Rescore stage output with the un-normalized weighted score combination.

    Ranking uses pool-normalized per-criterion scores, which compress every
    query's values into [0, 1]; a five-way softmax over such scores can never
    state more than e/(e+4) ≈ 0.40 confidence no matter how decisively the
    stage separated the documents.  Confidence therefore derives from the
    weighted mean of the *raw* per-criterion scores, which keeps the scorers'
    dynamic range.  Breakdowns without per-criterion evidence (base-query
    mode) already carry the raw scorer value and pass through unchanged.
    """

    run: ScoredRun = {}
    for query_id, items in breakdowns.items():
        scored = [
            (
                b.doc_id,
                aggregate(dict(b.raw), weights, active=tuple(b.raw))
                if b.raw
                else b.aggregated,
            )
            for b in items
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        run[query_id] = scored
    return run


def to_classification(
    run: ScoredRun, qrels: QrelsLike, top_n: int = 5
) -> Tuple[List[CalibrationSample], List[SkippedQuery]]:
    """One sample per query with at least ``top_n`` scored documents;
    shorter queries are skipped (reported, and warned once per call)."""

    samples: List[CalibrationSample] = []
    skipped: List[SkippedQuery] = []
    for query_id in sorted(run):
        docs = run[query_id]
        if len(docs) < top_n:
            skipped.append(SkippedQuery(query_id=query_id, n_docs=len(docs)))
            continue
        top = docs[:top_n]
        probs = softmax([score for _, score in top])
        predicted = int(np.argmax(probs))
        samples.append(
            CalibrationSample(
                confidence=float(probs[predicted]),
                correct=top[predicted][0] in _relevant(qrels, query_id),
            )
        )
    if skipped:
        warnings.warn(
            f"{len(skipped)} queries had fewer than {top_n} scored documents "
            "and were skipped",
            stacklevel=2,
        )
    return samples, skipped


def bin_index(confidence: float, m: int) -> int:
    """Equal-width binning of [0, 1]: bin b covers (b/m, (b+1)/m], with bin 0
    additionally containing 0."""

    if confidence <= 0.0:
        return 0
    return min(int(np.ceil(confidence * m)) - 1, m - 1)


def bin_stats(samples: Sequence[CalibrationSample], m: int = 10) -> List[BinStats]:
    if m < 1:
        raise ValueError("number of bins must be at least 1")
    if not samples:
        raise EmptySamples("no calibration samples")
    confidences = np.array([s.confidence for s in samples])
    correct = np.array([s.correct for s in samples], dtype=float)
    indices = np.array([bin_index(c, m) for c in confidences])
    stats = []
    for b in range(m):
        mask = indices == b
        count = int(mask.sum())
        if count == 0:
            stats.append(BinStats(index=b, count=0, mean_confidence=0.0, accuracy=0.0))
        else:
            stats.append(
                BinStats(
                    index=b,
                    count=count,
                    mean_confidence=float(confidences[mask].mean()),
                    accuracy=float(correct[mask].mean()),
                )
            )
    return stats


def ece(samples: Sequence[CalibrationSample], m: int = 10) -> float:
    stats = bin_stats(samples, m)
    n = len(samples)
    return sum(
        (b.count / n) * abs(b.accuracy - b.mean_confidence) for b in stats if b.count
    )


def reliability_diagram(
    samples: Sequence[CalibrationSample], m: int = 10
) -> List[BinStats]:
    """Per-bin (confidence, accuracy, count) records; plot accuracy against
    mean confidence and compare with the diagonal."""

    return bin_stats(samples, m)


def render_reliability_table(stats: Sequence[BinStats], m: int = 10) -> str:
    lines = ["bin        count  confidence  accuracy  gap"]
    for b in stats:
        low = b.index / m
        high = (b.index + 1) / m
        if b.count == 0:
            lines.append(f"({low:.1f},{high:.1f}]  {0:>5}  {'-':>10}  {'-':>8}  {'-':>5}")
        else:
            gap = b.accuracy - b.mean_confidence
            lines.append(
                f"({low:.1f},{high:.1f}]  {b.count:>5}  {b.mean_confidence:>10.4f}  "
                f"{b.accuracy:>8.4f}  {gap:>+.3f}"
            )
    return "\n".join(lines)
