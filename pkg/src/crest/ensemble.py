"""Criterion-ensemble aggregation and weight learning.

A document's final score is a weighted combination of its per-criterion
scores.  Raw scorer outputs live on incompatible scales, so scores are
min-max normalized per criterion over the candidate pool first, then
combined as::

    aggregated = sum(w_c * s_c for c in active) / sum(w_c for c in active)

The division renormalizes over whichever criteria are actually present for
a query, so a trouble report missing a field is not penalized relative to a
fully populated one.

Weights are constrained to [0, 1], trained by projected gradient descent on
a hinge loss over aggregated scores (relevant above irrelevant by a margin),
with per-epoch checkpoints and final selection by validation MRR.  One
weight vector exists per pipeline stage and scorer architecture.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .evaluation import mrr
from .scorers import RelevanceScore
from .tr_core import AUXILIARY_CRITERIA, CRITERION_ORDER, CriterionKind


class NoActiveCriteria(ValueError):
    """Aggregation was asked to combine an empty criterion set."""


class AllZeroWeights(ValueError):
    """Every active criterion has weight zero; the combination is undefined."""


class InsufficientValidationData(ValueError):
    """Weight training needs at least one query with both labels present."""


class LastCriterion(ValueError):
    """Ablation would leave the ensemble with no active criterion."""


def _canonical(criteria) -> Tuple[CriterionKind, ...]:
    return tuple(c for c in CRITERION_ORDER if c in set(criteria))


@dataclass(frozen=True)
class CriterionWeights:
    """Weight vector for one (stage, architecture) combination.

    ``active`` tracks which criteria participate in aggregation; ablation
    shrinks it without touching the underlying values, so exclude/re-include
    round-trips exactly.
    """

    values: Mapping[CriterionKind, float]
    stage: str  # "ir" | "rr"
    architecture: str
    active: Tuple[CriterionKind, ...]
    seed: Optional[int] = None
    validation_mrr: Optional[float] = None

    def __post_init__(self) -> None:
        if self.stage not in ("ir", "rr"):
            raise ValueError(f"stage must be 'ir' or 'rr', got {self.stage!r}")
        for kind, value in self.values.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"weight for {kind.value} out of [0, 1]: {value}")
        unknown = set(self.active) - set(self.values)
        if unknown:
            raise ValueError(f"active criteria without weights: {sorted(c.value for c in unknown)}")
        object.__setattr__(self, "values", dict(self.values))
        object.__setattr__(self, "active", _canonical(self.active))

    @classmethod
    def uniform(
        cls,
        stage: str,
        architecture: str,
        criteria: Sequence[CriterionKind] = AUXILIARY_CRITERIA,
    ) -> "CriterionWeights":
        criteria = _canonical(criteria)
        weight = 1.0 / len(criteria)
        return cls(
            values={c: weight for c in criteria},
            stage=stage,
            architecture=architecture,
            active=criteria,
        )

    def weight(self, kind: CriterionKind) -> float:
        return self.values[kind]

    def ablate(self, excluded: CriterionKind) -> "CriterionWeights":
        if excluded not in self.active:
            raise ValueError(f"{excluded.value} is not active")
        remaining = tuple(c for c in self.active if c != excluded)
        if not remaining:
            raise LastCriterion("cannot exclude the only active criterion")
        return CriterionWeights(
            values=self.values,
            stage=self.stage,
            architecture=self.architecture,
            active=remaining,
            seed=self.seed,
            validation_mrr=None,  # stale after changing the active set
        )

    def include(self, kind: CriterionKind) -> "CriterionWeights":
        if kind not in self.values:
            raise ValueError(f"{kind.value} has no trained weight to restore")
        if kind in self.active:
            return self
        return CriterionWeights(
            values=self.values,
            stage=self.stage,
            architecture=self.architecture,
            active=self.active + (kind,),
            seed=self.seed,
            validation_mrr=None,
        )

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "architecture": self.architecture,
            "values": {c.value: w for c, w in self.values.items()},
            "active": [c.value for c in self.active],
            "seed": self.seed,
            "validation_mrr": self.validation_mrr,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CriterionWeights":
        return cls(
            values={CriterionKind(k): float(v) for k, v in data["values"].items()},
            stage=data["stage"],
            architecture=data["architecture"],
            active=tuple(CriterionKind(k) for k in data["active"]),
            seed=data.get("seed"),
            validation_mrr=data.get("validation_mrr"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CriterionWeights":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# normalization + aggregation


def minmax_normalize(scores: np.ndarray) -> np.ndarray:
    """Map a criterion's candidate scores onto [0, 1].

    A constant column (max == min) normalizes to all zeros: it carries no
    ranking information, and zero keeps it from inflating every candidate
    equally after renormalization.
    """

    scores = np.asarray(scores, dtype=float)
    low = scores.min()
    high = scores.max()
    if high == low:
        return np.zeros_like(scores)
    return (scores - low) / (high - low)


def _check_active(
    weights: CriterionWeights, active: Optional[Sequence[CriterionKind]]
) -> Tuple[CriterionKind, ...]:
    chosen = _canonical(active) if active is not None else weights.active
    if not chosen:
        raise NoActiveCriteria("no criteria to aggregate over")
    unknown = set(chosen) - set(weights.values)
    if unknown:
        raise ValueError(
            f"criteria without weights: {sorted(c.value for c in unknown)}"
        )
    total = sum(weights.values[c] for c in chosen)
    if total == 0.0:
        raise AllZeroWeights(
            f"all active weights are zero for {[c.value for c in chosen]}"
        )
    return chosen


def aggregate(
    normalized: Mapping[CriterionKind, float],
    weights: CriterionWeights,
    active: Optional[Sequence[CriterionKind]] = None,
) -> float:
    """Weighted mean of one candidate's normalized criterion scores."""

    chosen = _check_active(weights, active)
    total = sum(weights.values[c] for c in chosen)
    return sum(weights.values[c] * normalized[c] for c in chosen) / total


def aggregate_pool(
    raw_scores: Mapping[CriterionKind, np.ndarray],
    weights: CriterionWeights,
    active: Optional[Sequence[CriterionKind]] = None,
) -> Tuple[np.ndarray, Dict[CriterionKind, np.ndarray]]:
    """Normalize each criterion over the candidate pool, then combine.

    Returns the aggregated score vector and the per-criterion normalized
    columns (the exact inputs to the combination, kept for breakdowns).
    """

    chosen = _check_active(weights, active)
    missing = [c.value for c in chosen if c not in raw_scores]
    if missing:
        raise ValueError(f"missing score columns for active criteria: {missing}")
    lengths = {len(np.asarray(raw_scores[c])) for c in chosen}
    if len(lengths) != 1:
        raise ValueError(f"criterion columns differ in length: {sorted(lengths)}")

    normalized = {c: minmax_normalize(np.asarray(raw_scores[c], dtype=float)) for c in chosen}
    total = sum(weights.values[c] for c in chosen)
    combined = sum(weights.values[c] * normalized[c] for c in chosen) / total
    return combined, normalized


@dataclass(frozen=True)
class ScoreBreakdown:
    """One candidate's per-criterion evidence plus the combined score.

    ``scores`` holds the normalized values that actually entered the
    combination (recomputable: ``aggregate`` over them with the same weights
    reproduces ``aggregated`` exactly); ``raw`` keeps the scorer outputs
    before normalization for transparency.
    """

    doc_id: str
    scores: Mapping[CriterionKind, RelevanceScore]
    raw: Mapping[CriterionKind, float]
    aggregated: float

    def recompute(self, weights: CriterionWeights) -> float:
        return aggregate(
            {c: s.value for c, s in self.scores.items()},
            weights,
            active=tuple(self.scores),
        )


def breakdown_pool(
    doc_ids: Sequence[str],
    raw_scores: Mapping[CriterionKind, np.ndarray],
    weights: CriterionWeights,
    scorer_id: str,
    active: Optional[Sequence[CriterionKind]] = None,
) -> List[ScoreBreakdown]:
    combined, normalized = aggregate_pool(raw_scores, weights, active=active)
    chosen = _canonical(normalized.keys())
    out = []
    for i, doc_id in enumerate(doc_ids):
        out.append(
            ScoreBreakdown(
                doc_id=doc_id,
                scores={
                    c: RelevanceScore(
                        value=float(normalized[c][i]), scorer_id=scorer_id, criterion=c
                    )
                    for c in chosen
                },
                raw={c: float(np.asarray(raw_scores[c])[i]) for c in chosen},
                aggregated=float(combined[i]),
            )
        )
    return out


# ---------------------------------------------------------------------------
# weight training


@dataclass(frozen=True)
class ValidationQuery:
    """Precomputed scoring state for one validation query: a candidate pool,
    raw per-criterion scores over it, and which candidates are relevant."""

    query_id: str
    doc_ids: Tuple[str, ...]
    criterion_scores: Mapping[CriterionKind, np.ndarray]
    relevant: FrozenSet[str]
    active: Tuple[CriterionKind, ...] = ()

    def __post_init__(self) -> None:
        active = self.active or _canonical(self.criterion_scores.keys())
        object.__setattr__(self, "active", _canonical(active))
        object.__setattr__(self, "relevant", frozenset(self.relevant))
        for kind in self.active:
            column = np.asarray(self.criterion_scores[kind], dtype=float)
            if column.shape != (len(self.doc_ids),):
                raise ValueError(
                    f"score column for {kind.value} has shape {column.shape}, "
                    f"expected ({len(self.doc_ids)},)"
                )


@dataclass
class WeightTrainConfig:
    margin: float = 0.3
    learning_rate: float = 0.2
    epochs: int = 60
    seed: int = 0

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


@dataclass
class WeightTrainingReport:
    epoch_losses: List[float] = field(default_factory=list)
    epoch_mrrs: List[float] = field(default_factory=list)
    best_epoch: int = 0


def _pool_mrr(
    pools: Sequence[ValidationQuery],
    normalized: Sequence[Mapping[CriterionKind, np.ndarray]],
    weight_values: Mapping[CriterionKind, float],
) -> float:
    run = {}
    qrels = {}
    for query, norm in zip(pools, normalized):
        total = sum(weight_values[c] for c in query.active)
        if total == 0.0:
            combined = np.zeros(len(query.doc_ids))
        else:
            combined = (
                sum(weight_values[c] * norm[c] for c in query.active) / total
            )
        order = sorted(
            range(len(query.doc_ids)),
            key=lambda i: (-combined[i], query.doc_ids[i]),
        )
        run[query.query_id] = [query.doc_ids[i] for i in order]
        qrels[query.query_id] = set(query.relevant)
    return mrr(run, qrels)


def train_weights(
    pools: Sequence[ValidationQuery],
    stage: str,
    architecture: str,
    config: Optional[WeightTrainConfig] = None,
    criteria: Optional[Sequence[CriterionKind]] = None,
) -> Tuple[CriterionWeights, WeightTrainingReport]:
    """Projected gradient descent on the pairwise hinge loss over aggregated
    scores; returns the per-epoch checkpoint with the best validation MRR.

    Scorer parameters are assumed frozen: only the combination weights move.
    Deterministic for a fixed config.  A step that would zero out every
    weight is skipped (the renormalized combination is undefined there).
    """

    config = config or WeightTrainConfig()
    if criteria is None:
        criteria = _canonical(
            {c for query in pools for c in query.active}
        )
    else:
        criteria = _canonical(criteria)
    if not criteria:
        raise InsufficientValidationData("no criteria present in the validation pool")

    usable: List[ValidationQuery] = []
    for query in pools:
        pos = [i for i, d in enumerate(query.doc_ids) if d in query.relevant]
        neg = [i for i, d in enumerate(query.doc_ids) if d not in query.relevant]
        if pos and neg and query.active:
            usable.append(query)
    if not usable:
        raise InsufficientValidationData(
            "no validation query has both relevant and irrelevant candidates"
        )

    normalized = [
        {c: minmax_normalize(np.asarray(q.criterion_scores[c], dtype=float)) for c in q.active}
        for q in usable
    ]
    positives = [
        [i for i, d in enumerate(q.doc_ids) if d in q.relevant] for q in usable
    ]
    negatives = [
        [i for i, d in enumerate(q.doc_ids) if d not in q.relevant] for q in usable
    ]

    index_of = {c: k for k, c in enumerate(criteria)}
    weights = np.full(len(criteria), 1.0 / len(criteria))

    def checkpoint(values: np.ndarray) -> Dict[CriterionKind, float]:
        return {c: float(values[index_of[c]]) for c in criteria}

    def loss_and_grad(values: np.ndarray) -> Tuple[float, np.ndarray]:
        total_loss = 0.0
        grad = np.zeros_like(values)
        n_pairs = 0
        for q_idx, query in enumerate(usable):
            active = [c for c in query.active if c in index_of]
            if not active:
                continue
            w_sum = sum(values[index_of[c]] for c in active)
            if w_sum == 0.0:
                continue
            norm = normalized[q_idx]
            combined = sum(values[index_of[c]] * norm[c] for c in active) / w_sum
            for p in positives[q_idx]:
                for n in negatives[q_idx]:
                    n_pairs += 1
                    violation = config.margin - combined[p] + combined[n]
                    if violation > 0.0:
                        total_loss += violation
                        for c in active:
                            k = index_of[c]
                            d_pos = (norm[c][p] - combined[p]) / w_sum
                            d_neg = (norm[c][n] - combined[n]) / w_sum
                            grad[k] += d_neg - d_pos
        if n_pairs == 0:
            raise InsufficientValidationData("no usable positive/negative pairs")
        return total_loss / n_pairs, grad / n_pairs

    report = WeightTrainingReport()
    best_values = weights.copy()
    best_mrr = _pool_mrr(usable, normalized, checkpoint(weights))
    report.epoch_mrrs.append(best_mrr)
    report.best_epoch = 0

    for epoch in range(1, config.epochs + 1):
        loss, grad = loss_and_grad(weights)
        report.epoch_losses.append(loss)
        stepped = np.clip(weights - config.learning_rate * grad, 0.0, 1.0)
        if np.any(stepped > 0.0):
            weights = stepped
        epoch_mrr = _pool_mrr(usable, normalized, checkpoint(weights))
        report.epoch_mrrs.append(epoch_mrr)
        if epoch_mrr > best_mrr:
            best_mrr = epoch_mrr
            best_values = weights.copy()
            report.best_epoch = epoch

    return (
        CriterionWeights(
            values=checkpoint(best_values),
            stage=stage,
            architecture=architecture,
            active=criteria,
            seed=config.seed,
            validation_mrr=best_mrr,
        ),
        report,
    )


def ablate(weights: CriterionWeights, excluded: CriterionKind) -> CriterionWeights:
    return weights.ablate(excluded)


def include(weights: CriterionWeights, kind: CriterionKind) -> CriterionWeights:
    return weights.include(kind)
