"""Corpus management: loading/saving trouble reports, split planning,
criterion-specific training datasets, and a synthetic generator with planted
relevance ground truth.

Dataset naming follows the experiment grid: ``HTI``/``HTF``/``HTC``/``HTR``
are the criterion-specific datasets (headline + trouble description + one
auxiliary criterion), each with a ``*-baseline`` twin that keeps the same
trouble reports but drops the criterion from the query, and ``SingleModel``
uses the whole observation as one undivided query.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .hashing import stable_digest, stable_int
from .tr_core import (
    AUXILIARY_CRITERIA,
    CRITERION_ORDER,
    DEFAULT_TEMPLATE,
    CriterionKind,
    Observation,
    TemplateSpec,
    TroubleReport,
    compose_query,
    parse_observation,
    render_observation,
)

# query_id -> {doc_id: graded relevance}; anything > 0 counts as relevant
Qrels = Dict[str, Dict[str, int]]


class EmptyDataset(ValueError):
    """No trouble report satisfies the dataset filter (or too few to pair)."""


class InsufficientFullCriteriaTRs(ValueError):
    """Fewer all-criteria TRs than the requested validation+test sizes."""


# ---------------------------------------------------------------------------
# corpus IO


def save_corpus(path: str | Path, corpus: Sequence[TroubleReport]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for tr in corpus:
            record = {
                "id": tr.id,
                "headline": tr.headline,
                "observation": tr.observation.raw,
                "answer": tr.answer,
                "metadata": dict(tr.metadata),
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_corpus(
    path: str | Path, template: TemplateSpec = DEFAULT_TEMPLATE
) -> List[TroubleReport]:
    corpus = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            corpus.append(
                TroubleReport(
                    id=record["id"],
                    headline=record["headline"],
                    observation=parse_observation(record["observation"], template),
                    answer=record["answer"],
                    metadata=dict(record.get("metadata", {})),
                )
            )
    return corpus


def corpus_digest(corpus: Sequence[TroubleReport]) -> str:
    """Content hash used to detect index/corpus drift."""

    parts = []
    for tr in sorted(corpus, key=lambda t: t.id):
        parts.extend([tr.id, tr.headline, tr.observation.raw, tr.answer])
    return stable_digest(parts)


def answer_documents(corpus: Sequence[TroubleReport]) -> Dict[str, str]:
    """The retrieval collection: each TR's answer, keyed by the TR id."""

    return {tr.id: tr.answer for tr in corpus}


# ---------------------------------------------------------------------------
# split planning


@dataclass(frozen=True)
class SplitPlan:
    train: Tuple[str, ...]
    validation: Tuple[str, ...]
    test: Tuple[str, ...]
    seed: int

    def to_json(self) -> dict:
        return {
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SplitPlan":
        return cls(
            train=tuple(data["train"]),
            validation=tuple(data["validation"]),
            test=tuple(data["test"]),
            seed=int(data["seed"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SplitPlan":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def make_splits(
    corpus: Sequence[TroubleReport], val_size: int, test_size: int, seed: int
) -> SplitPlan:
    """Reserve validation/test sets drawn only from TRs that contain all five
    criteria, so every experiment evaluates on the same queries regardless of
    which criterion its training set filters on."""

    eligible = sorted(tr.id for tr in corpus if tr.observation.has_all_criteria())
    if len(eligible) < val_size + test_size:
        raise InsufficientFullCriteriaTRs(
            f"need {val_size + test_size} all-criteria TRs, found {len(eligible)}"
        )
    rng = np.random.default_rng(seed)
    shuffled = [eligible[i] for i in rng.permutation(len(eligible))]
    validation = set(shuffled[:val_size])
    test = set(shuffled[val_size : val_size + test_size])
    train = tuple(
        tr.id for tr in sorted(corpus, key=lambda t: t.id)
        if tr.id not in validation and tr.id not in test
    )
    return SplitPlan(
        train=train,
        validation=tuple(sorted(validation)),
        test=tuple(sorted(test)),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# dataset specs and training pairs


_CRITERION_DATASET_NAMES = {
    CriterionKind.IMPACT: "HTI",
    CriterionKind.FREQUENCY: "HTF",
    CriterionKind.CONDITION: "HTC",
    CriterionKind.REPRODUCIBILITY: "HTR",
}


@dataclass(frozen=True)
class DatasetSpec:
    """Which TRs qualify and which observation fields form the query."""

    name: str
    required_criterion: Optional[CriterionKind]
    query_fields: Tuple[CriterionKind, ...]

    @classmethod
    def criterion(cls, kind: CriterionKind) -> "DatasetSpec":
        if kind not in _CRITERION_DATASET_NAMES:
            raise ValueError(f"no criterion dataset for {kind}")
        return cls(
            name=_CRITERION_DATASET_NAMES[kind],
            required_criterion=kind,
            query_fields=(CriterionKind.TROUBLE_DESCRIPTION, kind),
        )

    @classmethod
    def baseline(cls, kind: CriterionKind) -> "DatasetSpec":
        """Same TR filter as the criterion dataset, query reduced to
        headline + trouble description."""

        base = cls.criterion(kind)
        return cls(
            name=base.name + "-baseline",
            required_criterion=kind,
            query_fields=(CriterionKind.TROUBLE_DESCRIPTION,),
        )

    @classmethod
    def single_model(cls) -> "DatasetSpec":
        return cls(
            name="SingleModel",
            required_criterion=None,
            query_fields=tuple(CRITERION_ORDER),
        )

    def accepts(self, tr: TroubleReport) -> bool:
        if self.required_criterion is None:
            return True
        return tr.observation.get(self.required_criterion) is not None

    def query_for(self, tr: TroubleReport) -> str:
        return compose_query(tr, fields=self.query_fields)


ALL_DATASET_SPECS: Tuple[DatasetSpec, ...] = tuple(
    [DatasetSpec.criterion(k) for k in AUXILIARY_CRITERIA]
    + [DatasetSpec.baseline(k) for k in AUXILIARY_CRITERIA]
    + [DatasetSpec.single_model()]
)


@dataclass(frozen=True)
class TrainingPair:
    query: str
    document: str
    label: str  # "relevant" | "irrelevant"
    source_tr: str
    criterion_set: Tuple[CriterionKind, ...]

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "document": self.document,
            "label": self.label,
            "source_tr": self.source_tr,
            "criterion_set": [c.value for c in self.criterion_set],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TrainingPair":
        return cls(
            query=data["query"],
            document=data["document"],
            label=data["label"],
            source_tr=data["source_tr"],
            criterion_set=tuple(CriterionKind(c) for c in data["criterion_set"]),
        )


def save_pairs(path: str | Path, pairs: Sequence[TrainingPair]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(json.dumps(pair.to_json(), ensure_ascii=False) + "\n")


def load_pairs(path: str | Path) -> List[TrainingPair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                pairs.append(TrainingPair.from_json(json.loads(line)))
    return pairs


def build_dataset(
    corpus: Sequence[TroubleReport],
    spec: DatasetSpec,
    split: SplitPlan,
    seed: int,
) -> List[TrainingPair]:
    """One relevant pair (own answer) and one uniformly sampled negative
    (a different qualifying TR's answer) per qualifying training TR.

    The negative draw uses a per-TR random substream keyed on the TR id, so
    the result is independent of iteration order (parallel == serial) and
    byte-identical across re-runs with the same seed.
    """

    by_id = {tr.id: tr for tr in corpus}
    qualifying = [
        by_id[tr_id]
        for tr_id in split.train
        if tr_id in by_id and spec.accepts(by_id[tr_id]) and by_id[tr_id].answer.strip()
    ]
    if not qualifying:
        raise EmptyDataset(f"no training TR qualifies for dataset {spec.name}")
    if len(qualifying) < 2:
        raise EmptyDataset(
            f"dataset {spec.name} needs at least two qualifying TRs to draw negatives"
        )

    qualifying.sort(key=lambda tr: tr.id)
    pairs: List[TrainingPair] = []
    for position, tr in enumerate(qualifying):
        query = spec.query_for(tr)
        criterion_set = tuple(
            c for c in spec.query_fields if tr.observation.get(c) is not None
        )
        rng = np.random.default_rng([seed, stable_int(tr.id)])
        other = int(rng.integers(0, len(qualifying) - 1))
        if other >= position:
            other += 1  # uniform over everyone but self
        pairs.append(
            TrainingPair(
                query=query,
                document=tr.answer,
                label="relevant",
                source_tr=tr.id,
                criterion_set=criterion_set,
            )
        )
        pairs.append(
            TrainingPair(
                query=query,
                document=qualifying[other].answer,
                label="irrelevant",
                source_tr=tr.id,
                criterion_set=criterion_set,
            )
        )
    return pairs


# ---------------------------------------------------------------------------
# qrels helpers + TREC-format IO


def relevant_docs(qrels: Qrels, query_id: str) -> Set[str]:
    return {doc for doc, rel in qrels.get(query_id, {}).items() if rel > 0}


def save_qrels(path: str | Path, qrels: Qrels) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for query_id in sorted(qrels):
            for doc_id in sorted(qrels[query_id]):
                handle.write(f"{query_id} 0 {doc_id} {qrels[query_id][doc_id]}\n")


def load_qrels(path: str | Path) -> Qrels:
    qrels: Qrels = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"malformed qrels line: {line!r}")
            query_id, _, doc_id, rel = parts
            qrels.setdefault(query_id, {})[doc_id] = int(rel)
    return qrels


# ---------------------------------------------------------------------------
# synthetic corpus with planted ground truth


_CRITERION_TOKEN_PREFIX = {
    CriterionKind.TROUBLE_DESCRIPTION: "desc",
    CriterionKind.IMPACT: "impact",
    CriterionKind.CONDITION: "cond",
    CriterionKind.FREQUENCY: "freq",
    CriterionKind.REPRODUCIBILITY: "repro",
}

# substream purposes, so adding a draw for one aspect never shifts another
_SIG, _PRESENCE, _ANSWER, _HEADLINE, _CONFUSER = range(5)


def _default_strengths() -> Dict[CriterionKind, float]:
    return {kind: 0.7 for kind in CRITERION_ORDER}


def _default_confusion() -> Dict[CriterionKind, float]:
    return {kind: 0.1 for kind in AUXILIARY_CRITERIA}


@dataclass
class SynthParams:
    """Knobs for the planted-signal corpus generator.

    Each criterion draws its vocabulary from a disjoint token pool.  A TR's
    answer echoes its own per-criterion signature tokens with probability
    ``signal_strengths[c]`` per token (a thinned, partial echo), plus
    background filler shared across all TRs.  Independently per criterion,
    with probability ``confusion_rates[c]`` the answer also embeds one other
    TR's *complete* signature for that criterion — a lexical red herring.
    Criteria with high confusion and low signal are systematically
    unreliable, which is exactly the structure that rewards learning
    per-criterion weights over pooling all fields into one query.
    """

    n_trs: int = 100
    signature_size: int = 3
    vocab_size: int = 50
    filler_vocab_size: int = 200
    signal_strengths: Dict[CriterionKind, float] = field(default_factory=_default_strengths)
    missing_criterion_rate: float = 0.2
    confusion_rates: Dict[CriterionKind, float] = field(default_factory=_default_confusion)
    confuser_repeat: int = 1
    answer_filler_tokens: int = 30
    observation_filler_tokens: int = 2
    headline_tokens: int = 3

    def __post_init__(self) -> None:
        if self.n_trs < 1:
            raise ValueError("n_trs must be positive")
        if self.signature_size < 1 or self.signature_size > self.vocab_size:
            raise ValueError("signature_size must be in [1, vocab_size]")
        if self.confuser_repeat < 1:
            raise ValueError("confuser_repeat must be at least 1")
        if not 0.0 <= self.missing_criterion_rate <= 1.0:
            raise ValueError("missing_criterion_rate must be in [0, 1]")
        for kind, rate in self.confusion_rates.items():
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"confusion rate for {kind.value} must be in [0, 1]")
        for kind in CRITERION_ORDER:
            strength = self.signal_strengths.get(kind, 0.0)
            if not 0.0 <= strength <= 1.0:
                raise ValueError(f"signal strength for {kind.value} must be in [0, 1]")


def _tr_id(index: int) -> str:
    return f"TR-{index:04d}"


def _vocab(kind: CriterionKind, size: int) -> List[str]:
    prefix = _CRITERION_TOKEN_PREFIX[kind]
    return [f"{prefix}{i:03d}" for i in range(size)]


def _signatures(
    seed: int, tr_id: str, params: SynthParams
) -> Dict[CriterionKind, List[str]]:
    """A TR's per-criterion signature tokens; derivable from (seed, id) alone
    so one TR's confuser can reference another without ordering coupling."""

    rng = np.random.default_rng([seed, stable_int(tr_id), _SIG])
    signatures = {}
    for kind in CRITERION_ORDER:
        vocab = _vocab(kind, params.vocab_size)
        picks = rng.choice(len(vocab), size=params.signature_size, replace=False)
        signatures[kind] = [vocab[int(i)] for i in picks]
    return signatures


def synth_corpus(
    params: SynthParams, seed: int, template: TemplateSpec = DEFAULT_TEMPLATE
) -> Tuple[List[TroubleReport], Qrels]:
    """Generate a corpus whose relevance structure is known exactly: each
    TR's own answer is its unique relevant document."""

    filler = [f"filler{i:03d}" for i in range(params.filler_vocab_size)]
    headline_vocab = [f"headline{i:03d}" for i in range(50)]

    corpus: List[TroubleReport] = []
    qrels: Qrels = {}
    for index in range(params.n_trs):
        tr_id = _tr_id(index)
        signatures = _signatures(seed, tr_id, params)

        presence_rng = np.random.default_rng([seed, stable_int(tr_id), _PRESENCE])
        present = [CriterionKind.TROUBLE_DESCRIPTION]
        for kind in AUXILIARY_CRITERIA:
            if presence_rng.random() >= params.missing_criterion_rate:
                present.append(kind)

        criteria: Dict[CriterionKind, str] = {}
        for kind in present:
            tokens = list(signatures[kind])
            fill = presence_rng.choice(
                len(filler), size=params.observation_filler_tokens, replace=True
            )
            tokens.extend(filler[int(i)] for i in fill)
            criteria[kind] = " ".join(tokens)

        headline_rng = np.random.default_rng([seed, stable_int(tr_id), _HEADLINE])
        headline_parts = [signatures[CriterionKind.TROUBLE_DESCRIPTION][0]]
        picks = headline_rng.choice(
            len(headline_vocab), size=params.headline_tokens, replace=True
        )
        headline_parts.extend(headline_vocab[int(i)] for i in picks)

        answer_rng = np.random.default_rng([seed, stable_int(tr_id), _ANSWER])
        answer_tokens: List[str] = []
        for kind in present:
            strength = params.signal_strengths.get(kind, 0.0)
            for token in signatures[kind]:
                if answer_rng.random() < strength:
                    answer_tokens.append(token)

        # Red herrings: an answer may reference one other TR and quote some
        # of its signature blocks verbatim.  The criteria that get quoted
        # share the same source TR, so unreliable fields correlate — exactly
        # the failure mode that weighting criteria by reliability survives
        # and pooling all fields into one query does not.
        confuser_rng = np.random.default_rng([seed, stable_int(tr_id), _CONFUSER])
        if params.n_trs > 1 and any(params.confusion_rates.values()):
            other = int(confuser_rng.integers(0, params.n_trs - 1))
            if other >= index:
                other += 1
            other_sigs = _signatures(seed, _tr_id(other), params)
            for kind in CRITERION_ORDER:
                rate = params.confusion_rates.get(kind, 0.0)
                if confuser_rng.random() < rate:
                    answer_tokens.extend(other_sigs[kind] * params.confuser_repeat)

        fill = answer_rng.choice(
            len(filler), size=params.answer_filler_tokens, replace=True
        )
        answer_tokens.extend(filler[int(i)] for i in fill)
        answer_rng.shuffle(answer_tokens)

        raw = render_observation(criteria, template)
        corpus.append(
            TroubleReport(
                id=tr_id,
                headline=" ".join(headline_parts),
                observation=parse_observation(raw, template),
                answer=" ".join(answer_tokens),
                metadata={"source": "synthetic"},
            )
        )
        qrels[tr_id] = {tr_id: 1}
    return corpus, qrels
