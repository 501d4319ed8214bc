"""CREST: criterion-aware two-stage retrieval over trouble reports.

Structured observations are split into named criteria (trouble description,
impact, condition, frequency, reproducibility); each criterion is scored by
its own specialized model and the scores are combined with learned weights,
across an initial-retrieval stage over the whole corpus and a re-ranking
stage over the top-K candidates.  The package also ships ranking metrics,
confidence-calibration analysis, a synthetic benchmark with planted ground
truth, a CLI, and an HTTP retrieval service.
"""

from .tr_core import (
    AUXILIARY_CRITERIA,
    CRITERION_ORDER,
    DEFAULT_TEMPLATE,
    CriterionKind,
    Diagnostic,
    MissingTroubleDescription,
    Observation,
    QueryBundle,
    TemplateSpec,
    TroubleReport,
    build_query_bundle,
    compose_query,
    parse_observation,
    preprocess,
    render_observation,
)
from .corpus import (
    DatasetSpec,
    EmptyDataset,
    InsufficientFullCriteriaTRs,
    Qrels,
    SplitPlan,
    SynthParams,
    TrainingPair,
    answer_documents,
    build_dataset,
    corpus_digest,
    load_corpus,
    load_qrels,
    make_splits,
    save_corpus,
    save_qrels,
    synth_corpus,
)
from .scorers import (
    BiScorer,
    Bm25Scorer,
    Bm25Stats,
    CorpusStats,
    CrossScorer,
    DimensionMismatch,
    Embedding,
    EmptyInput,
    HashedTfidfProvider,
    LateInteractionScorer,
    NonTrainableScorer,
    ProviderMismatch,
    RelevanceScore,
    RemoteScorerClient,
    RemoteUnavailable,
    TrainConfig,
    TrainingReport,
    Triple,
    UnknownDocument,
    train_scorer,
    triples_from_pairs,
)
from .index import (
    Candidate,
    CorpusHashMismatch,
    DocumentIndex,
    EmptyIndex,
    retrieve_topk,
    score_all,
)
from .ensemble import (
    AllZeroWeights,
    CriterionWeights,
    InsufficientValidationData,
    LastCriterion,
    NoActiveCriteria,
    ScoreBreakdown,
    ValidationQuery,
    WeightTrainConfig,
    aggregate,
    aggregate_pool,
    breakdown_pool,
    minmax_normalize,
    train_weights,
)
from .evaluation import (
    ComparisonTable,
    MetricReport,
    MetricValue,
    MissingQrels,
    SplitMismatch,
    ZeroIdealDCG,
    evaluate_matrix,
    impact_score,
    load_run,
    metric_report,
    mrr,
    ndcg_at_k,
    ranked,
    recall_at_k,
    save_run,
)
from .calibration import (
    BinStats,
    CalibrationSample,
    EmptySamples,
    confidence_run,
    ece,
    reliability_diagram,
    to_classification,
)
from .pipeline import (
    ConfigInvalid,
    PipelineConfig,
    PipelineModels,
    StageModels,
    batch_run,
    run_isolated_rr,
    run_two_stage,
    save_breakdowns,
)
from .benchmark import (
    BenchmarkConfig,
    ablation_benchmark_config,
    prepare_benchmark,
    run_benchmark,
    run_grid,
)
from .artifacts import (
    ArtifactMismatch,
    ArtifactMissing,
    ServiceBundle,
    export_benchmark,
    load_bundle,
    load_scorer,
    save_scorer,
)
from ._version import __version__

