"""Pluggable relevance scorers.

Four built-in scorer families cover both retrieval stages without any ML
runtime dependency:

* :class:`Bm25Scorer` -- Okapi BM25 over an inverted-statistics view.
* :class:`BiScorer` -- dot product of hashed TF-IDF embeddings, optionally
  through a trainable per-dimension weighting (the embedding analogue of a
  single linear layer on the interaction features).
* :class:`LateInteractionScorer` -- per-token MaxSim: sum over query tokens
  of the best cosine against any document token.
* :class:`CrossScorer` -- joint scoring of the (truncated) query/document
  pair via a trainable linear model over lexical-overlap features.

Real encoder models plug in through :class:`RemoteScorerClient`, which talks
to an HTTP sidecar exposing ``/embed`` and ``/score_pairs``.

Trainable scorers learn with a triplet hinge loss
``max(0, margin - s(q, d+) + s(q, d-))`` minimized by minibatch SGD
(:func:`train_scorer`).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np

from .hashing import stable_digest, stable_int
from .tr_core import CriterionKind, preprocess


class DimensionMismatch(ValueError):
    """Embeddings from different providers/dimensions were combined."""


class ProviderMismatch(ValueError):
    """A provider name/version does not match the one an index was built with."""


class EmptyInput(ValueError):
    """A scorer that needs non-empty token input received none."""


class NonTrainableScorer(TypeError):
    """train_scorer was pointed at a scorer without trainable parameters."""


class UnknownDocument(KeyError):
    """A doc_id is absent from the scoring statistics."""


class RemoteUnavailable(RuntimeError):
    """The remote scoring endpoint could not be reached (retryable)."""


@dataclass(frozen=True)
class RelevanceScore:
    """One scorer's verdict on one query/document pair.

    Values are only comparable within a single ``scorer_id``; scales differ
    across scorer families.
    """

    value: float
    scorer_id: str
    criterion: Optional[CriterionKind] = None


@dataclass(frozen=True)
class Embedding:
    """Fixed-length text representation tagged with its provider identity."""

    vector: np.ndarray
    provider: str
    version: str
    degenerate: bool = False  # empty/token-free input maps to the zero vector

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass(frozen=True)
class TokenEmbeddingMatrix:
    """Per-token vectors for late-interaction scoring; one row per token."""

    matrix: np.ndarray  # (n_tokens, dim), rows L2-normalized
    provider: str
    version: str

    @property
    def n_tokens(self) -> int:
        return int(self.matrix.shape[0])


@dataclass
class TrainConfig:
    """Hinge-loss training hyperparameters.

    batch_size 64 and learning_rate 1e-5 are the full-scale defaults; the
    lexical scorers at desk scale typically want a much larger rate, so every
    field is overridable.
    """

    margin: float = 1.0
    batch_size: int = 64
    learning_rate: float = 1e-5
    epochs: int = 5
    seed: int = 0


# ---------------------------------------------------------------------------
# corpus statistics + hashed TF-IDF embedding provider


class CorpusStats:
    """Document frequencies over a tokenized document collection."""

    def __init__(self, doc_tokens: Iterable[Sequence[str]]):
        self.df: Counter = Counter()
        self.n_docs = 0
        for tokens in doc_tokens:
            self.n_docs += 1
            self.df.update(set(tokens))

    def idf(self, token: str) -> float:
        # Smoothed so unseen tokens get the highest weight instead of a crash.
        return math.log((self.n_docs + 1) / (self.df.get(token, 0) + 1)) + 1.0

    def digest(self) -> str:
        items = sorted(self.df.items())
        return stable_digest(
            [str(self.n_docs)] + [f"{tok}:{count}" for tok, count in items], size=8
        )


class HashedTfidfProvider:
    """Deterministic lexical embeddings: token counts hashed into ``dim``
    buckets, TF-IDF weighted, L2-normalized.

    The version tag digests the dimension and the corpus statistics, so an
    index built with one corpus can never be silently queried with embeddings
    from another.
    """

    name = "hashed_tfidf"

    def __init__(self, stats: CorpusStats, dim: int = 512):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.stats = stats
        self.dim = dim
        self.version = stable_digest([str(dim), stats.digest()], size=8)

    @classmethod
    def from_texts(cls, texts: Iterable[str], dim: int = 512) -> "HashedTfidfProvider":
        return cls(CorpusStats(preprocess(t) for t in texts), dim=dim)

    def _bucket(self, key: str) -> int:
        return stable_int(key) % self.dim

    def embed(self, text: str) -> Embedding:
        tokens = preprocess(text)
        vec = np.zeros(self.dim)
        for token, count in Counter(tokens).items():
            vec[self._bucket("tok:" + token)] += count * self.stats.idf(token)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            return Embedding(vector=vec, provider=self.name, version=self.version, degenerate=True)
        return Embedding(vector=vec / norm, provider=self.name, version=self.version)

    def embed_tokens(self, tokens: Sequence[str]) -> TokenEmbeddingMatrix:
        """One hashed vector per token (whole token plus character trigrams,
        so near-identical tokens land close instead of orthogonal)."""

        rows = np.zeros((len(tokens), self.dim))
        for i, token in enumerate(tokens):
            rows[i, self._bucket("tok:" + token)] += 1.0
            for j in range(len(token) - 2):
                rows[i, self._bucket("tri:" + token[j : j + 3])] += 0.5
            norm = np.linalg.norm(rows[i])
            if norm > 0:
                rows[i] /= norm
        return TokenEmbeddingMatrix(matrix=rows, provider=self.name, version=self.version)


# ---------------------------------------------------------------------------
# scorers


class TrainableScorer(Protocol):
    def get_params(self) -> np.ndarray: ...

    def set_params(self, params: np.ndarray) -> None: ...

    def score_and_grad(self, query: str, document: str) -> Tuple[float, np.ndarray]: ...


class BiScorer:
    """Similarity of independently encoded query and document.

    With the default identity weighting this is exactly the dot product of
    the two normalized embeddings (symmetric under swap).  Training adjusts a
    per-dimension weight vector, i.e. ``score = sum_k w_k q_k d_k``.
    """

    def __init__(self, provider: HashedTfidfProvider, scorer_id: str = "bi"):
        self.provider = provider
        self.scorer_id = scorer_id
        self.weights = np.ones(provider.dim)

    def _check(self, q: Embedding, d: Embedding) -> None:
        if q.dim != d.dim:
            raise DimensionMismatch(f"query dim {q.dim} != document dim {d.dim}")
        if (q.provider, q.version) != (d.provider, d.version):
            raise ProviderMismatch(
                f"{q.provider}/{q.version} vs {d.provider}/{d.version}"
            )

    def score_embeddings(
        self, q: Embedding, d: Embedding, criterion: Optional[CriterionKind] = None
    ) -> RelevanceScore:
        self._check(q, d)
        value = float(np.dot(q.vector * self.weights, d.vector))
        return RelevanceScore(value=value, scorer_id=self.scorer_id, criterion=criterion)

    def score(self, query: str, document: str) -> RelevanceScore:
        return self.score_embeddings(self.provider.embed(query), self.provider.embed(document))

    def score_matrix(self, q: Embedding, doc_matrix: np.ndarray) -> np.ndarray:
        """Scores against every row of a precomputed document matrix."""

        if doc_matrix.shape[1] != q.dim:
            raise DimensionMismatch(
                f"index dim {doc_matrix.shape[1]} != query dim {q.dim}"
            )
        return doc_matrix @ (q.vector * self.weights)

    # trainable-scorer protocol
    def get_params(self) -> np.ndarray:
        return self.weights.copy()

    def set_params(self, params: np.ndarray) -> None:
        self.weights = np.asarray(params, dtype=float).copy()

    def score_and_grad(self, query: str, document: str) -> Tuple[float, np.ndarray]:
        q = self.provider.embed(query).vector
        d = self.provider.embed(document).vector
        interaction = q * d
        return float(np.dot(self.weights, interaction)), interaction


class LateInteractionScorer:
    """MaxSim scoring: ``sum_i max_j cos(q_i, d_j)`` over token embeddings."""

    def __init__(self, provider: HashedTfidfProvider, scorer_id: str = "late"):
        self.provider = provider
        self.scorer_id = scorer_id

    def score_matrices(
        self,
        q: TokenEmbeddingMatrix,
        d: TokenEmbeddingMatrix,
        criterion: Optional[CriterionKind] = None,
    ) -> RelevanceScore:
        if q.n_tokens == 0 or d.n_tokens == 0:
            raise EmptyInput("late-interaction scoring needs non-empty token matrices")
        sims = q.matrix @ d.matrix.T  # rows are unit vectors, so this is cosine
        value = float(sims.max(axis=1).sum())
        return RelevanceScore(value=value, scorer_id=self.scorer_id, criterion=criterion)

    def score(self, query: str, document: str) -> RelevanceScore:
        q_tokens = preprocess(query)
        d_tokens = preprocess(document)
        if not q_tokens or not d_tokens:
            raise EmptyInput("late-interaction scoring needs non-empty inputs")
        return self.score_matrices(
            self.provider.embed_tokens(q_tokens), self.provider.embed_tokens(d_tokens)
        )


def truncation_budget(budget: int) -> int:
    """Tokens each side keeps under a joint budget: 3 reserved for markers,
    the remainder split equally."""

    if budget < 2:
        raise ValueError("token budget must be at least 2")
    return max((budget - 3) // 2, 0)


def frame_pair(query_tokens: Sequence[str], doc_tokens: Sequence[str]) -> str:
    """The joint sequence a remote cross-encoder receives."""

    return "[CLS] " + " ".join(query_tokens) + " [SEP] " + " ".join(doc_tokens) + " [SEP]"


CROSS_FEATURE_NAMES = (
    "tfidf_overlap_mass",
    "bigram_overlap",
    "length_ratio",
    "query_coverage",
    "bias",
)


class CrossScorer:
    """Joint query/document scorer: linear model over overlap features.

    Query and document are truncated to an equal share of the token budget,
    then scored by ``w . f`` where ``f`` holds shared-token TF-IDF mass,
    bigram overlap, length ratio, unweighted query coverage and a bias term.
    """

    def __init__(
        self,
        stats: CorpusStats,
        budget: int = 256,
        scorer_id: str = "cross",
        weights: Optional[np.ndarray] = None,
    ):
        self.stats = stats
        self.budget = budget
        self.scorer_id = scorer_id
        if weights is None:
            # Overlap features all point toward relevance; start uniform.
            weights = np.array([1.0, 1.0, 1.0, 1.0, 0.0])
        self.weights = np.asarray(weights, dtype=float).copy()

    def truncate(self, tokens: Sequence[str]) -> List[str]:
        return list(tokens[: truncation_budget(self.budget)])

    def features_from_tokens(
        self, q_tokens: Sequence[str], d_tokens: Sequence[str]
    ) -> np.ndarray:
        q_tokens = self.truncate(q_tokens)
        d_tokens = self.truncate(d_tokens)
        if not q_tokens or not d_tokens:
            return np.array([0.0, 0.0, 0.0, 0.0, 1.0])

        q_counts = Counter(q_tokens)
        d_counts = Counter(d_tokens)
        q_mass = sum(self.stats.idf(t) * c for t, c in q_counts.items())
        shared_mass = sum(
            self.stats.idf(t) * min(c, d_counts[t])
            for t, c in q_counts.items()
            if t in d_counts
        )
        overlap_mass = shared_mass / q_mass if q_mass > 0 else 0.0

        q_bigrams = set(zip(q_tokens, q_tokens[1:]))
        d_bigrams = set(zip(d_tokens, d_tokens[1:]))
        bigram_overlap = (
            len(q_bigrams & d_bigrams) / len(q_bigrams) if q_bigrams else 0.0
        )

        length_ratio = min(len(q_tokens), len(d_tokens)) / max(len(q_tokens), len(d_tokens))
        coverage = sum(1 for t in q_counts if t in d_counts) / len(q_counts)
        return np.array([overlap_mass, bigram_overlap, length_ratio, coverage, 1.0])

    def features(self, query: str, document: str) -> np.ndarray:
        return self.features_from_tokens(preprocess(query), preprocess(document))

    def score(
        self, query: str, document: str, criterion: Optional[CriterionKind] = None
    ) -> RelevanceScore:
        value = float(np.dot(self.weights, self.features(query, document)))
        return RelevanceScore(value=value, scorer_id=self.scorer_id, criterion=criterion)

    # trainable-scorer protocol
    def get_params(self) -> np.ndarray:
        return self.weights.copy()

    def set_params(self, params: np.ndarray) -> None:
        self.weights = np.asarray(params, dtype=float).copy()

    def score_and_grad(self, query: str, document: str) -> Tuple[float, np.ndarray]:
        f = self.features(query, document)
        return float(np.dot(self.weights, f)), f


@dataclass
class Bm25Stats:
    """Per-document term statistics backing BM25 scoring."""

    doc_tf: Dict[str, Counter]
    doc_len: Dict[str, int]
    df: Counter
    avgdl: float

    @classmethod
    def from_token_map(cls, doc_tokens: Mapping[str, Sequence[str]]) -> "Bm25Stats":
        doc_tf = {doc_id: Counter(tokens) for doc_id, tokens in doc_tokens.items()}
        doc_len = {doc_id: len(tokens) for doc_id, tokens in doc_tokens.items()}
        df: Counter = Counter()
        for tf in doc_tf.values():
            df.update(tf.keys())
        avgdl = sum(doc_len.values()) / len(doc_len) if doc_len else 0.0
        return cls(doc_tf=doc_tf, doc_len=doc_len, df=df, avgdl=avgdl)

    @property
    def n_docs(self) -> int:
        return len(self.doc_tf)


class Bm25Scorer:
    """Okapi BM25 with the standard ``log(1 + (N - df + 0.5)/(df + 0.5))``
    idf and ``k1``/``b`` saturation."""

    def __init__(self, stats: Bm25Stats, k1: float = 1.2, b: float = 0.75, scorer_id: str = "bm25"):
        self.stats = stats
        self.k1 = k1
        self.b = b
        self.scorer_id = scorer_id

    def idf(self, term: str) -> float:
        df = self.stats.df.get(term, 0)
        n = self.stats.n_docs
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def score_tokens(
        self, query_tokens: Sequence[str], doc_id: str, criterion: Optional[CriterionKind] = None
    ) -> RelevanceScore:
        if doc_id not in self.stats.doc_tf:
            raise UnknownDocument(doc_id)
        tf = self.stats.doc_tf[doc_id]
        dl = self.stats.doc_len[doc_id]
        norm = self.k1 * (1 - self.b + self.b * dl / self.stats.avgdl) if self.stats.avgdl else self.k1
        value = 0.0
        for term in query_tokens:
            freq = tf.get(term, 0)
            if freq == 0:
                continue  # absent terms (including out-of-corpus ones) contribute 0
            value += self.idf(term) * (freq * (self.k1 + 1)) / (freq + norm)
        return RelevanceScore(value=value, scorer_id=self.scorer_id, criterion=criterion)

    def score(self, query: str, doc_id: str) -> RelevanceScore:
        return self.score_tokens(preprocess(query), doc_id)


# ---------------------------------------------------------------------------
# hinge-loss training


@dataclass(frozen=True)
class Triple:
    query: str
    positive: str
    negative: str


@dataclass
class TrainingReport:
    epoch_losses: List[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")


def hinge_loss(margin: float, pos_score: float, neg_score: float) -> float:
    return max(0.0, margin - pos_score + neg_score)


def triples_from_pairs(pairs: Sequence) -> List[Triple]:
    """Match each query's relevant and irrelevant pair into a triple.

    Accepts any records with ``query``/``document``/``label`` attributes
    (the corpus module's TrainingPair).  The 1:1 dataset construction
    guarantees one of each label per query.
    """

    positives: Dict[str, List[str]] = {}
    negatives: Dict[str, List[str]] = {}
    order: List[str] = []
    for pair in pairs:
        bucket = positives if pair.label == "relevant" else negatives
        if pair.query not in positives and pair.query not in negatives:
            order.append(pair.query)
        bucket.setdefault(pair.query, []).append(pair.document)
    triples = []
    for query in order:
        for pos, neg in zip(positives.get(query, []), negatives.get(query, [])):
            triples.append(Triple(query=query, positive=pos, negative=neg))
    return triples


def train_scorer(
    scorer, triples: Sequence[Triple], config: TrainConfig
) -> TrainingReport:
    """Minibatch SGD on the triplet hinge loss, in place on ``scorer``.

    Deterministic for a fixed seed: triples are shuffled by a dedicated
    generator and gradients accumulated in a fixed order.  The per-epoch
    average loss is measured before that epoch's updates, so a report whose
    first entry is 0 means the data was already separated by the margin.
    """

    for attr in ("get_params", "set_params", "score_and_grad"):
        if not hasattr(scorer, attr):
            raise NonTrainableScorer(
                f"{type(scorer).__name__} has no trainable parameters"
            )
    if not triples:
        raise ValueError("no training triples")

    rng = np.random.default_rng(config.seed)
    params = scorer.get_params()
    report = TrainingReport()

    for _ in range(config.epochs):
        order = rng.permutation(len(triples))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            grad = np.zeros_like(params)
            for idx in batch:
                t = triples[idx]
                pos, g_pos = scorer.score_and_grad(t.query, t.positive)
                neg, g_neg = scorer.score_and_grad(t.query, t.negative)
                loss = hinge_loss(config.margin, pos, neg)
                epoch_loss += loss
                if loss > 0.0:
                    grad += g_neg - g_pos  # d(loss)/d(params)
            params = params - config.learning_rate * grad / len(batch)
            scorer.set_params(params)
        report.epoch_losses.append(epoch_loss / len(triples))
    return report


def evaluate_triples(scorer, triples: Sequence[Triple], margin: float) -> Tuple[float, float]:
    """(mean hinge loss, pairwise accuracy s+ > s-) over a triple set."""

    loss = 0.0
    correct = 0
    for t in triples:
        pos, _ = scorer.score_and_grad(t.query, t.positive)
        neg, _ = scorer.score_and_grad(t.query, t.negative)
        loss += hinge_loss(margin, pos, neg)
        if pos > neg:
            correct += 1
    return loss / len(triples), correct / len(triples)


# ---------------------------------------------------------------------------
# remote scorer/embedder protocol (HTTP)


class RemoteScorerClient:
    """Client for the external encoder protocol.

    ``POST {base_url}/embed`` with ``{"provider": ..., "texts": [...]}``
    returns ``{"provider": ..., "version": ..., "vectors": [[...], ...]}``;
    ``POST {base_url}/score_pairs`` with framed query/document pairs returns
    ``{"scores": [...]}``.  Failures retry up to ``retries`` times and then
    raise :class:`RemoteUnavailable`.  If ``expect_version`` is set (e.g.
    from index metadata), a differing server version raises
    :class:`ProviderMismatch` instead of silently mixing representations.
    """

    def __init__(
        self,
        base_url: str,
        provider: str = "remote",
        timeout: float = 10.0,
        retries: int = 2,
        expect_version: Optional[str] = None,
        transport=None,
    ):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.provider = provider
        self.timeout = timeout
        self.retries = retries
        self.expect_version = expect_version
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _post(self, path: str, payload: dict) -> dict:
        import httpx

        last_error: Optional[Exception] = None
        for _ in range(self.retries + 1):
            try:
                response = self._client.post(self.base_url + path, json=payload)
                response.raise_for_status()
                return response.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
        raise RemoteUnavailable(f"{path} failed after {self.retries + 1} attempts: {last_error}")

    def _check_version(self, version: str) -> None:
        if self.expect_version is not None and version != self.expect_version:
            raise ProviderMismatch(
                f"remote provider version {version} != expected {self.expect_version}"
            )

    def embed_many(self, texts: Sequence[str]) -> List[Embedding]:
        data = self._post("/embed", {"provider": self.provider, "texts": list(texts)})
        self._check_version(data["version"])
        return [
            Embedding(
                vector=np.asarray(vec, dtype=float),
                provider=data.get("provider", self.provider),
                version=data["version"],
                degenerate=not np.any(vec),
            )
            for vec in data["vectors"]
        ]

    def embed(self, text: str) -> Embedding:
        return self.embed_many([text])[0]

    def score_pairs(self, pairs: Sequence[Tuple[str, str]], budget: int = 256) -> List[float]:
        keep = truncation_budget(budget)
        payload = []
        for query, document in pairs:
            q_tokens = preprocess(query)[:keep]
            d_tokens = preprocess(document)[:keep]
            payload.append(
                {
                    "query": " ".join(q_tokens),
                    "document": " ".join(d_tokens),
                    "framed": frame_pair(q_tokens, d_tokens),
                }
            )
        data = self._post("/score_pairs", {"pairs": payload})
        return [float(s) for s in data["scores"]]

    def close(self) -> None:
        self._client.close()
