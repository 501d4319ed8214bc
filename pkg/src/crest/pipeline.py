"""End-to-end retrieval flows.

Two-stage mode: the initial-retrieval (IR) stage scores every indexed
document — per active criterion with weighted aggregation when the IR
ensemble is on, or with the single base query when off — and keeps the top
K.  The re-ranking (RR) stage then rescores only those K candidates (again
per criterion + aggregation, or base query) and produces the final order.
Isolated-RR mode skips the IR filter and re-ranks the whole collection,
which by construction equals two-stage with K = corpus size.

A query whose active criterion set is empty (e.g. headline-only input)
degrades to base-query mode in both stages regardless of the ensemble
toggles.

All rankings use the total order (descending score, ascending doc_id).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .ensemble import CriterionWeights, ScoreBreakdown, breakdown_pool
from .evaluation import ScoredRun
from .index import DocumentIndex, ranked_order, retrieve_topk, score_all
from .scorers import CrossScorer, RelevanceScore
from .tr_core import CriterionKind, QueryBundle, preprocess


class ConfigInvalid(ValueError):
    """The pipeline configuration is inconsistent with the loaded models."""


IR_SCORERS = ("bi", "late", "bm25")
RR_SCORERS = ("cross", "none")


@dataclass
class PipelineConfig:
    k: int = 100
    ir_scorer: str = "bi"
    rr_scorer: str = "cross"
    ir_ensemble: bool = True
    rr_ensemble: bool = True
    active: Optional[Tuple[CriterionKind, ...]] = None  # None = whatever the bundle has
    cross_budget: int = 256

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigInvalid("K must be at least 1")
        if self.ir_scorer not in IR_SCORERS:
            raise ConfigInvalid(f"ir_scorer must be one of {IR_SCORERS}")
        if self.rr_scorer not in RR_SCORERS:
            raise ConfigInvalid(f"rr_scorer must be one of {RR_SCORERS}")
        if self.cross_budget < 2:
            raise ConfigInvalid("cross_budget must be at least 2")

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "ir_scorer": self.ir_scorer,
            "rr_scorer": self.rr_scorer,
            "ir_ensemble": self.ir_ensemble,
            "rr_ensemble": self.rr_ensemble,
            "active": None if self.active is None else [c.value for c in self.active],
            "cross_budget": self.cross_budget,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PipelineConfig":
        active = data.get("active")
        return cls(
            k=int(data.get("k", 100)),
            ir_scorer=data.get("ir_scorer", "bi"),
            rr_scorer=data.get("rr_scorer", "cross"),
            ir_ensemble=bool(data.get("ir_ensemble", True)),
            rr_ensemble=bool(data.get("rr_ensemble", True)),
            active=None if active is None else tuple(CriterionKind(c) for c in active),
            cross_budget=int(data.get("cross_budget", 256)),
        )


@dataclass
class StageModels:
    """Scorers available to one stage: one specialist per criterion plus the
    criterion-agnostic base model, and the stage's trained weights."""

    criterion_scorers: Dict[CriterionKind, object] = field(default_factory=dict)
    base_scorer: Optional[object] = None
    weights: Optional[CriterionWeights] = None


@dataclass
class PipelineModels:
    ir: StageModels
    rr: StageModels


# ---------------------------------------------------------------------------
# scoring helpers


class _DocPool:
    """Uniform view over either a built index or a raw id->text mapping."""

    def __init__(self, source: Union[DocumentIndex, Mapping[str, str]]):
        if isinstance(source, DocumentIndex):
            self.index: Optional[DocumentIndex] = source
            self.doc_ids = list(source.doc_ids)
            self._tokens = None
            self._texts = None
        else:
            self.index = None
            self.doc_ids = sorted(source)
            self._texts = {doc_id: source[doc_id] for doc_id in self.doc_ids}
            self._tokens = {doc_id: preprocess(text) for doc_id, text in self._texts.items()}

    def tokens(self, doc_id: str) -> List[str]:
        if self.index is not None:
            return self.index.tokens_of(doc_id)
        return self._tokens[doc_id]

    def text(self, doc_id: str) -> str:
        if self.index is not None:
            return self.index.text_of(doc_id)
        return self._texts[doc_id]


def score_over_docs(
    scorer, query: str, doc_ids: Sequence[str], pool: _DocPool
) -> np.ndarray:
    """Score one query against a candidate subset with any scorer family."""

    if isinstance(scorer, CrossScorer):
        q_tokens = preprocess(query)
        return np.array(
            [
                float(
                    np.dot(
                        scorer.weights,
                        scorer.features_from_tokens(q_tokens, pool.tokens(doc_id)),
                    )
                )
                for doc_id in doc_ids
            ]
        )
    if hasattr(scorer, "score_pairs"):  # remote cross-style scorer
        return np.array(
            scorer.score_pairs([(query, pool.text(doc_id)) for doc_id in doc_ids])
        )
    return np.array(
        [scorer.score(query, pool.text(doc_id)).value for doc_id in doc_ids]
    )


def _plain_breakdowns(
    doc_ids: Sequence[str], scores: np.ndarray, scorer_id: str
) -> List[ScoreBreakdown]:
    """Base-query mode carries no per-criterion evidence; the aggregated
    field is simply the scorer's value."""

    return [
        ScoreBreakdown(
            doc_id=doc_id, scores={}, raw={}, aggregated=float(score)
        )
        for doc_id, score in zip(doc_ids, scores)
    ]


def _sorted_breakdowns(breakdowns: List[ScoreBreakdown]) -> List[ScoreBreakdown]:
    return sorted(breakdowns, key=lambda b: (-b.aggregated, b.doc_id))


def _stage_active(
    bundle: QueryBundle, config: PipelineConfig
) -> Tuple[CriterionKind, ...]:
    if config.active is None:
        return bundle.active
    return tuple(c for c in bundle.active if c in set(config.active))


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigInvalid(message)


def _ensemble_stage(
    bundle: QueryBundle,
    active: Tuple[CriterionKind, ...],
    doc_ids: Sequence[str],
    stage: StageModels,
    pool: _DocPool,
    scorer_on_index,
) -> List[ScoreBreakdown]:
    _require(stage.weights is not None, "ensemble enabled but no weights loaded")
    missing = [c.value for c in active if c not in stage.criterion_scorers]
    _require(not missing, f"no scorer for criteria: {missing}")
    raw = {}
    scorer_id = "ensemble"
    for criterion in active:
        scorer = stage.criterion_scorers[criterion]
        scorer_id = getattr(scorer, "scorer_id", scorer_id)
        raw[criterion] = scorer_on_index(scorer, bundle.per_criterion[criterion], doc_ids, pool)
    return breakdown_pool(doc_ids, raw, stage.weights, scorer_id, active=active)


# ---------------------------------------------------------------------------
# public flows


def run_two_stage(
    bundle: QueryBundle,
    index: DocumentIndex,
    models: PipelineModels,
    config: PipelineConfig,
) -> List[ScoreBreakdown]:
    active = _stage_active(bundle, config)
    pool = _DocPool(index)

    # IR stage over the whole collection
    if config.ir_ensemble and active:
        def ir_scorer_fn(scorer, query, doc_ids, _pool):
            return score_all(index, query, scorer)

        ir_breakdowns = _ensemble_stage(
            bundle, active, index.doc_ids, models.ir, pool, ir_scorer_fn
        )
    else:
        _require(models.ir.base_scorer is not None, "IR stage has no base scorer")
        candidates = retrieve_topk(index, bundle.base, models.ir.base_scorer, len(index))
        ir_breakdowns = _plain_breakdowns(
            [c.doc_id for c in candidates],
            np.array([c.score.value for c in candidates]),
            getattr(models.ir.base_scorer, "scorer_id", "base"),
        )

    ir_ranked = _sorted_breakdowns(ir_breakdowns)[: min(config.k, len(index))]
    if config.rr_scorer == "none":
        return ir_ranked

    candidate_ids = [b.doc_id for b in ir_ranked]
    return _rr_over_candidates(bundle, active, candidate_ids, models, config, pool)


def _rr_over_candidates(
    bundle: QueryBundle,
    active: Tuple[CriterionKind, ...],
    candidate_ids: Sequence[str],
    models: PipelineModels,
    config: PipelineConfig,
    pool: _DocPool,
) -> List[ScoreBreakdown]:
    if config.rr_ensemble and active:
        rr_breakdowns = _ensemble_stage(
            bundle, active, candidate_ids, models.rr, pool, score_over_docs
        )
    else:
        _require(models.rr.base_scorer is not None, "RR stage has no base scorer")
        scores = score_over_docs(models.rr.base_scorer, bundle.base, candidate_ids, pool)
        rr_breakdowns = _plain_breakdowns(
            candidate_ids, scores, getattr(models.rr.base_scorer, "scorer_id", "base")
        )
    return _sorted_breakdowns(rr_breakdowns)


def run_isolated_rr(
    bundle: QueryBundle,
    documents: Union[DocumentIndex, Mapping[str, str]],
    models: PipelineModels,
    config: PipelineConfig,
) -> List[ScoreBreakdown]:
    """Re-rank the entire collection without the IR filter."""

    _require(config.rr_scorer != "none", "isolated re-ranking needs an RR scorer")
    active = _stage_active(bundle, config)
    pool = _DocPool(documents)
    return _rr_over_candidates(bundle, active, pool.doc_ids, models, config, pool)


# ---------------------------------------------------------------------------
# batch runs + sidecar files


def batch_run(
    bundles: Mapping[str, QueryBundle],
    index: DocumentIndex,
    models: PipelineModels,
    config: PipelineConfig,
    isolated: bool = False,
) -> Tuple[ScoredRun, Dict[str, List[ScoreBreakdown]]]:
    run: ScoredRun = {}
    breakdowns: Dict[str, List[ScoreBreakdown]] = {}
    for query_id in sorted(bundles):
        bundle = bundles[query_id]
        if isolated:
            result = run_isolated_rr(bundle, index, models, config)
        else:
            result = run_two_stage(bundle, index, models, config)
        run[query_id] = [(b.doc_id, b.aggregated) for b in result]
        breakdowns[query_id] = result
    return run, breakdowns


def save_breakdowns(
    path: str | Path, breakdowns: Mapping[str, Sequence[ScoreBreakdown]]
) -> None:
    """Sidecar JSONL next to a run file: one record per (query, doc) with
    normalized and raw per-criterion scores for interpretability tooling."""

    with open(path, "w", encoding="utf-8") as handle:
        for query_id in sorted(breakdowns):
            for rank, b in enumerate(breakdowns[query_id], start=1):
                record = {
                    "query_id": query_id,
                    "doc_id": b.doc_id,
                    "rank": rank,
                    "aggregated": b.aggregated,
                    "scores": {c.value: s.value for c, s in b.scores.items()},
                    "raw": {c.value: v for c, v in b.raw.items()},
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_breakdowns(path: str | Path) -> Dict[str, List[dict]]:
    out: Dict[str, List[dict]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                record = json.loads(line)
                out.setdefault(record["query_id"], []).append(record)
    for records in out.values():
        records.sort(key=lambda r: r["rank"])
    return out
