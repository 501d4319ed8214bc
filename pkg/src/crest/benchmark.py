"""Desk-scale benchmark harness over the planted-signal synthetic corpus.

One call builds everything an experiment needs — corpus with known relevance,
splits, criterion datasets, trained cross scorers, trained stage weights, a
document index — and evaluates the full configuration grid:

* ``crest``: two-stage ensemble (per-criterion scoring, learned weights) at
  both stages;
* ``single``: the criterion-agnostic baseline (whole observation as one
  undivided query, no ensemble);
* one run per criterion-specific model (``HTI``/``HTF``/``HTC``/``HTR``);
* optional ablation runs (``crest-without-<criterion>``).

The synthetic generator's heterogeneous signal strengths plus cross-TR
confuser tokens make this discriminative: per-criterion evidence differs in
reliability, which rewards learned weighting over pooled queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .calibration import confidence_run, ece, to_classification
from .corpus import (
    DatasetSpec,
    Qrels,
    SplitPlan,
    SynthParams,
    TrainingPair,
    answer_documents,
    build_dataset,
    corpus_digest,
    make_splits,
    synth_corpus,
)
from .ensemble import (
    CriterionWeights,
    ScoreBreakdown,
    ValidationQuery,
    WeightTrainConfig,
    train_weights,
)
from .evaluation import ScoredRun, mrr, ranked
from .hashing import stable_int
from .index import DocumentIndex, score_all
from .pipeline import (
    PipelineConfig,
    PipelineModels,
    StageModels,
    batch_run,
    score_over_docs,
    _DocPool,
)
from .scorers import (
    BiScorer,
    CrossScorer,
    HashedTfidfProvider,
    TrainConfig,
    train_scorer,
    triples_from_pairs,
)
from .tr_core import (
    AUXILIARY_CRITERIA,
    CriterionKind,
    QueryBundle,
    TroubleReport,
    build_query_bundle,
    compose_query,
)


def _default_signals() -> Dict[CriterionKind, float]:
    # Partial echoes only: answers repeat a thinned subset of each field's
    # signature, with reliability falling off from impact to reproducibility.
    return {
        CriterionKind.TROUBLE_DESCRIPTION: 0.1,
        CriterionKind.IMPACT: 0.65,
        CriterionKind.CONDITION: 0.55,
        CriterionKind.FREQUENCY: 0.45,
        CriterionKind.REPRODUCIBILITY: 0.3,
    }


def _default_confusion() -> Dict[CriterionKind, float]:
    # Reliability varies by criterion: the weak criteria are also the ones
    # whose complete signatures frequently turn up in unrelated answers.
    return {
        CriterionKind.IMPACT: 0.05,
        CriterionKind.CONDITION: 0.1,
        CriterionKind.FREQUENCY: 0.9,
        CriterionKind.REPRODUCIBILITY: 0.9,
    }


@dataclass
class BenchmarkConfig:
    n_trs: int = 200
    seed: int = 7
    val_size: int = 40
    test_size: int = 60
    dim: int = 4096
    k: int = 50
    signal_strengths: Dict[CriterionKind, float] = field(default_factory=_default_signals)
    confusion_rates: Dict[CriterionKind, float] = field(default_factory=_default_confusion)
    confuser_repeat: int = 2
    missing_criterion_rate: float = 0.1
    answer_filler_tokens: int = 30
    # Large per-criterion vocabulary keeps three-token signatures near-unique
    # across 200 reports; a crowded vocabulary makes unrelated reports share
    # signature tokens, which turns every channel into noise.
    vocab_size: int = 600
    observation_filler_tokens: int = 0
    bi_train: TrainConfig = field(
        default_factory=lambda: TrainConfig(
            margin=0.2, batch_size=8, learning_rate=0.5, epochs=10, seed=19
        )
    )
    # The hinge margin sets the trained scorers' score scale, and score scale
    # is what a temperature-1 softmax turns into stated confidence: small
    # margins leave every model uniformly under-confident regardless of how
    # well it ranks.  A margin of 12 gives clear wins a decisive gap while
    # ambiguous candidates stay close, so confidence tracks correctness.
    cross_train: TrainConfig = field(
        default_factory=lambda: TrainConfig(
            margin=12.0, batch_size=16, learning_rate=0.8, epochs=16, seed=11
        )
    )
    weight_train: WeightTrainConfig = field(
        default_factory=lambda: WeightTrainConfig(
            margin=0.3, learning_rate=0.2, epochs=60, seed=13
        )
    )
    negatives_per_pool: Optional[int] = None  # None = the whole collection

    def synth_params(self) -> SynthParams:
        return SynthParams(
            n_trs=self.n_trs,
            signal_strengths=dict(self.signal_strengths),
            confusion_rates=dict(self.confusion_rates),
            confuser_repeat=self.confuser_repeat,
            missing_criterion_rate=self.missing_criterion_rate,
            answer_filler_tokens=self.answer_filler_tokens,
            vocab_size=self.vocab_size,
            observation_filler_tokens=self.observation_filler_tokens,
        )


def ablation_benchmark_config(**overrides) -> BenchmarkConfig:
    """Variant with one criterion carrying zero planted signal, so ablation
    has a known most-informative criterion (impact) and a known pure-noise
    one (reproducibility: nothing echoed, red herrings only)."""

    config = BenchmarkConfig(**overrides)
    config.signal_strengths = dict(config.signal_strengths)
    config.signal_strengths[CriterionKind.REPRODUCIBILITY] = 0.0
    return config


@dataclass
class BenchmarkArtifacts:
    config: BenchmarkConfig
    corpus: List[TroubleReport]
    qrels: Qrels
    split: SplitPlan
    provider: HashedTfidfProvider
    index: DocumentIndex
    models: PipelineModels
    datasets: Dict[str, List[TrainingPair]]
    by_id: Dict[str, TroubleReport]

    def bundles(
        self, tr_ids, single: bool = False
    ) -> Dict[str, QueryBundle]:
        out = {}
        for tr_id in tr_ids:
            tr = self.by_id[tr_id]
            if single:
                out[tr_id] = QueryBundle(
                    base=compose_query(tr, None), per_criterion={}, active=()
                )
            else:
                out[tr_id] = build_query_bundle(tr)
        return out


def _sample_pool_ids(
    all_ids: List[str], own: str, n_negatives: Optional[int], seed: int
) -> List[str]:
    if n_negatives is None:
        return list(all_ids)
    others = [doc_id for doc_id in all_ids if doc_id != own]
    rng = np.random.default_rng([seed, stable_int(own)])
    take = min(n_negatives, len(others))
    picks = rng.choice(len(others), size=take, replace=False)
    return [own] + sorted(others[int(i)] for i in picks)


def validation_pools(
    artifacts_index: DocumentIndex,
    bundles: Mapping[str, QueryBundle],
    qrels: Qrels,
    scorers: Mapping[CriterionKind, object],
    n_negatives: Optional[int],
    seed: int,
    candidate_ids: Optional[Mapping[str, List[str]]] = None,
    use_index_scoring: bool = True,
) -> List[ValidationQuery]:
    pool_view = _DocPool(artifacts_index)
    pools = []
    for query_id in sorted(bundles):
        bundle = bundles[query_id]
        if not bundle.active:
            continue
        if candidate_ids is not None:
            doc_ids = candidate_ids[query_id]
        else:
            doc_ids = _sample_pool_ids(
                list(artifacts_index.doc_ids), query_id, n_negatives, seed
            )
        relevant = {d for d, rel in qrels.get(query_id, {}).items() if rel > 0}
        criterion_scores = {}
        for criterion in bundle.active:
            scorer = scorers[criterion]
            query_text = bundle.per_criterion[criterion]
            if use_index_scoring and set(doc_ids) == set(artifacts_index.doc_ids):
                scores = score_all(artifacts_index, query_text, scorer)
            else:
                scores = score_over_docs(scorer, query_text, doc_ids, pool_view)
            criterion_scores[criterion] = np.asarray(scores, dtype=float)
        pools.append(
            ValidationQuery(
                query_id=query_id,
                doc_ids=tuple(doc_ids),
                criterion_scores=criterion_scores,
                relevant=frozenset(relevant & set(doc_ids)),
                active=bundle.active,
            )
        )
    return pools


def prepare_benchmark(config: BenchmarkConfig) -> BenchmarkArtifacts:
    corpus, qrels = synth_corpus(config.synth_params(), config.seed)
    by_id = {tr.id: tr for tr in corpus}
    split = make_splits(corpus, config.val_size, config.test_size, config.seed)

    documents = answer_documents(corpus)
    provider = HashedTfidfProvider.from_texts(documents.values(), dim=config.dim)
    index = DocumentIndex.build(documents, provider, corpus_hash=corpus_digest(corpus))

    # datasets + trained scorers: per criterion one bi specialist (IR) and
    # one cross specialist (RR), plus criterion-agnostic models of both
    # architectures for the baseline
    datasets: Dict[str, List[TrainingPair]] = {}
    ir_scorers: Dict[CriterionKind, BiScorer] = {}
    rr_scorers: Dict[CriterionKind, CrossScorer] = {}
    for criterion in AUXILIARY_CRITERIA:
        spec = DatasetSpec.criterion(criterion)
        pairs = build_dataset(corpus, spec, split, config.seed)
        datasets[spec.name] = pairs
        triples = triples_from_pairs(pairs)

        bi = BiScorer(provider, scorer_id=f"bi-{criterion.value}")
        train_scorer(bi, triples, config.bi_train)
        ir_scorers[criterion] = bi

        cross = CrossScorer(
            provider.stats, budget=256, scorer_id=f"cross-{criterion.value}"
        )
        train_scorer(cross, triples, config.cross_train)
        rr_scorers[criterion] = cross

    single_spec = DatasetSpec.single_model()
    single_pairs = build_dataset(corpus, single_spec, split, config.seed)
    datasets[single_spec.name] = single_pairs
    single_triples = triples_from_pairs(single_pairs)
    single_bi = BiScorer(provider, scorer_id="bi-single")
    train_scorer(single_bi, single_triples, config.bi_train)
    single_cross = CrossScorer(provider.stats, budget=256, scorer_id="cross-single")
    train_scorer(single_cross, single_triples, config.cross_train)

    # stage weights from validation pools
    val_bundles = {
        tr_id: build_query_bundle(by_id[tr_id]) for tr_id in split.validation
    }
    ir_pools = validation_pools(
        index, val_bundles, qrels, ir_scorers,
        config.negatives_per_pool, config.seed,
    )
    ir_weights, _ = train_weights(ir_pools, "ir", "bi", config.weight_train)

    # RR pools use the candidates the IR stage would actually hand over
    models_ir_only = PipelineModels(
        ir=StageModels(
            criterion_scorers=dict(ir_scorers), base_scorer=single_bi, weights=ir_weights
        ),
        rr=StageModels(),
    )
    ir_config = PipelineConfig(k=config.k, rr_scorer="none")
    candidate_map: Dict[str, List[str]] = {}
    from .pipeline import run_two_stage  # local alias for clarity

    for tr_id, bundle in val_bundles.items():
        result = run_two_stage(bundle, index, models_ir_only, ir_config)
        candidate_map[tr_id] = [b.doc_id for b in result]
    rr_pools = validation_pools(
        index, val_bundles, qrels, rr_scorers,
        config.negatives_per_pool, config.seed,
        candidate_ids=candidate_map, use_index_scoring=False,
    )
    rr_weights, _ = train_weights(rr_pools, "rr", "cross", config.weight_train)

    models = PipelineModels(
        ir=StageModels(
            criterion_scorers=dict(ir_scorers), base_scorer=single_bi, weights=ir_weights
        ),
        rr=StageModels(
            criterion_scorers=dict(rr_scorers),
            base_scorer=single_cross,
            weights=rr_weights,
        ),
    )
    return BenchmarkArtifacts(
        config=config,
        corpus=corpus,
        qrels=qrels,
        split=split,
        provider=provider,
        index=index,
        models=models,
        datasets=datasets,
        by_id=by_id,
    )


# ---------------------------------------------------------------------------
# configuration grid


_CRITERION_RUN_NAMES = {
    CriterionKind.IMPACT: "HTI",
    CriterionKind.FREQUENCY: "HTF",
    CriterionKind.CONDITION: "HTC",
    CriterionKind.REPRODUCIBILITY: "HTR",
}


def run_grid(
    artifacts: BenchmarkArtifacts,
    include_criterion_models: bool = True,
    include_ablations: bool = False,
) -> Tuple[Dict[str, ScoredRun], Dict[str, Dict[str, List[ScoreBreakdown]]]]:
    """Evaluate the benchmark's configuration grid on the test split."""

    config = artifacts.config
    test_ids = artifacts.split.test
    crest_bundles = artifacts.bundles(test_ids)
    single_bundles = artifacts.bundles(test_ids, single=True)

    runs: Dict[str, ScoredRun] = {}
    breakdowns: Dict[str, Dict[str, List[ScoreBreakdown]]] = {}
    crest_config = PipelineConfig(k=config.k)
    runs["crest"], breakdowns["crest"] = batch_run(
        crest_bundles, artifacts.index, artifacts.models, crest_config
    )
    single_config = PipelineConfig(k=config.k, ir_ensemble=False, rr_ensemble=False)
    runs["single"], breakdowns["single"] = batch_run(
        single_bundles, artifacts.index, artifacts.models, single_config
    )

    if include_criterion_models:
        # A criterion-specific model scores alone; its ranking is the same
        # for any positive weight, so unit weights stand in for the trained
        # ensemble weights (which may legitimately be zero for weak criteria).
        unit = {c: 1.0 for c in AUXILIARY_CRITERIA}
        single_criterion_models = PipelineModels(
            ir=StageModels(
                criterion_scorers=artifacts.models.ir.criterion_scorers,
                base_scorer=artifacts.models.ir.base_scorer,
                weights=CriterionWeights(
                    values=unit, stage="ir", architecture="bi",
                    active=AUXILIARY_CRITERIA,
                ),
            ),
            rr=StageModels(
                criterion_scorers=artifacts.models.rr.criterion_scorers,
                base_scorer=artifacts.models.rr.base_scorer,
                weights=CriterionWeights(
                    values=unit, stage="rr", architecture="cross",
                    active=AUXILIARY_CRITERIA,
                ),
            ),
        )
        for criterion, name in _CRITERION_RUN_NAMES.items():
            criterion_config = PipelineConfig(k=config.k, active=(criterion,))
            runs[name], breakdowns[name] = batch_run(
                crest_bundles, artifacts.index, single_criterion_models, criterion_config
            )

    if include_ablations:
        for criterion in AUXILIARY_CRITERIA:
            remaining = tuple(c for c in AUXILIARY_CRITERIA if c != criterion)
            ablated = PipelineConfig(k=config.k, active=remaining)
            name = f"crest-without-{criterion.value}"
            runs[name], breakdowns[name] = batch_run(
                crest_bundles, artifacts.index, artifacts.models, ablated
            )
    return runs, breakdowns


@dataclass
class BenchmarkResult:
    mrrs: Dict[str, float]
    runs: Dict[str, ScoredRun]
    ece_crest: float
    ece_single: float


def run_benchmark(
    config: Optional[BenchmarkConfig] = None,
    include_criterion_models: bool = True,
    include_ablations: bool = False,
) -> Tuple[BenchmarkArtifacts, BenchmarkResult]:
    artifacts = prepare_benchmark(config or BenchmarkConfig())
    runs, breakdowns = run_grid(
        artifacts,
        include_criterion_models=include_criterion_models,
        include_ablations=include_ablations,
    )
    mrrs = {name: mrr(ranked(run), artifacts.qrels) for name, run in runs.items()}

    # Confidence comes from un-normalized score combinations so the softmax
    # sees the scorers' dynamic range (see calibration.confidence_run).
    rr_weights = artifacts.models.rr.weights
    crest_conf = confidence_run(breakdowns["crest"], rr_weights)
    single_conf = confidence_run(breakdowns["single"], rr_weights)
    crest_samples, _ = to_classification(crest_conf, artifacts.qrels)
    single_samples, _ = to_classification(single_conf, artifacts.qrels)
    return artifacts, BenchmarkResult(
        mrrs=mrrs,
        runs=runs,
        ece_crest=ece(crest_samples),
        ece_single=ece(single_samples),
    )
