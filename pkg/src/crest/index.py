"""Precomputed document index and exact top-K retrieval.

The index stores, per document: the provider embedding (dense matrix row),
the preprocessed token list (feeding BM25 statistics, late-interaction token
matrices and cross-scorer features) and the original text.  Scoring is exact
— every document is scored and sorted with a total order (descending score,
ascending doc_id) — so results are reproducible and independently checkable
against a brute-force scan.

Persistence is a deliberately boring format: one magic line, one JSON header
line (provider name/version/dimension/corpus hash/doc ids/tokens/texts),
then the raw little-endian float64 embedding bytes.  Rebuilding from the
same corpus yields byte-identical files, and loading verifies the corpus
hash so an index can never silently serve a drifted corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .hashing import stable_digest
from .scorers import (
    Bm25Scorer,
    Bm25Stats,
    BiScorer,
    CrossScorer,
    Embedding,
    HashedTfidfProvider,
    LateInteractionScorer,
    ProviderMismatch,
    RelevanceScore,
    TokenEmbeddingMatrix,
    UnknownDocument,
)
from .tr_core import preprocess

_MAGIC = "CRESTIDX1"


class EmptyIndex(ValueError):
    """Retrieval was attempted against an index with no documents."""


class CorpusHashMismatch(ValueError):
    """The index was built from a different corpus than the one presented."""


class DuplicateDocument(ValueError):
    """A doc_id was added twice."""


@dataclass(frozen=True)
class Candidate:
    doc_id: str
    score: RelevanceScore


class DocumentIndex:
    """Immutable-after-build store of per-document representations."""

    def __init__(
        self,
        provider_name: str,
        provider_version: str,
        dim: int,
        corpus_hash: str,
    ):
        self.provider_name = provider_name
        self.provider_version = provider_version
        self.dim = dim
        self.corpus_hash = corpus_hash
        self.doc_ids: List[str] = []
        self.doc_tokens: List[List[str]] = []
        self.doc_texts: List[str] = []
        self._rows: List[np.ndarray] = []
        self._embeddings: Optional[np.ndarray] = None
        self._row_of: Dict[str, int] = {}
        self._bm25_stats: Optional[Bm25Stats] = None
        self._token_matrices: Dict[str, TokenEmbeddingMatrix] = {}

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._row_of

    # -- construction -----------------------------------------------------

    @classmethod
    def build(
        cls,
        documents: Mapping[str, str],
        provider: HashedTfidfProvider,
        corpus_hash: str = "",
    ) -> "DocumentIndex":
        if not documents:
            raise EmptyIndex("cannot build an index over zero documents")
        index = cls(
            provider_name=provider.name,
            provider_version=provider.version,
            dim=provider.dim,
            corpus_hash=corpus_hash,
        )
        for doc_id in sorted(documents):
            index.append(doc_id, documents[doc_id], provider)
        return index

    def append(self, doc_id: str, text: str, provider: HashedTfidfProvider) -> None:
        if (provider.name, provider.version) != (self.provider_name, self.provider_version):
            raise ProviderMismatch(
                f"index built with {self.provider_name}/{self.provider_version}, "
                f"got {provider.name}/{provider.version}"
            )
        if doc_id in self._row_of:
            raise DuplicateDocument(doc_id)
        self._row_of[doc_id] = len(self.doc_ids)
        self.doc_ids.append(doc_id)
        self.doc_tokens.append(preprocess(text))
        self.doc_texts.append(text)
        self._rows.append(provider.embed(text).vector)
        self._embeddings = None  # invalidate caches
        self._bm25_stats = None

    # -- derived views ----------------------------------------------------

    @property
    def embeddings(self) -> np.ndarray:
        if self._embeddings is None:
            self._embeddings = (
                np.vstack(self._rows) if self._rows else np.zeros((0, self.dim))
            )
        return self._embeddings

    @property
    def bm25_stats(self) -> Bm25Stats:
        if self._bm25_stats is None:
            self._bm25_stats = Bm25Stats.from_token_map(
                {doc_id: self.doc_tokens[row] for doc_id, row in self._row_of.items()}
            )
        return self._bm25_stats

    def bm25_scorer(self, k1: float = 1.2, b: float = 0.75) -> Bm25Scorer:
        return Bm25Scorer(self.bm25_stats, k1=k1, b=b)

    def _row(self, doc_id: str) -> int:
        try:
            return self._row_of[doc_id]
        except KeyError:
            raise UnknownDocument(doc_id) from None

    def tokens_of(self, doc_id: str) -> List[str]:
        return self.doc_tokens[self._row(doc_id)]

    def text_of(self, doc_id: str) -> str:
        return self.doc_texts[self._row(doc_id)]

    def token_matrix(
        self, doc_id: str, provider: HashedTfidfProvider
    ) -> TokenEmbeddingMatrix:
        if doc_id not in self._token_matrices:
            self._token_matrices[doc_id] = provider.embed_tokens(self.tokens_of(doc_id))
        return self._token_matrices[doc_id]

    # -- persistence ------------------------------------------------------

    def digest(self) -> str:
        return stable_digest([self._header_json(), self.embeddings.tobytes().hex()])

    def _header_json(self) -> str:
        return json.dumps(
            {
                "provider_name": self.provider_name,
                "provider_version": self.provider_version,
                "dim": self.dim,
                "corpus_hash": self.corpus_hash,
                "n_docs": len(self.doc_ids),
                "doc_ids": self.doc_ids,
                "doc_tokens": self.doc_tokens,
                "doc_texts": self.doc_texts,
                "dtype": "<f8",
            },
            ensure_ascii=False,
            sort_keys=True,
            separators=(",", ":"),
        )

    def save(self, path: str | Path) -> None:
        matrix = np.ascontiguousarray(self.embeddings, dtype="<f8")
        with open(path, "wb") as handle:
            handle.write((_MAGIC + "\n").encode("utf-8"))
            handle.write((self._header_json() + "\n").encode("utf-8"))
            handle.write(matrix.tobytes())

    @classmethod
    def load(
        cls, path: str | Path, expected_corpus_hash: Optional[str] = None
    ) -> "DocumentIndex":
        with open(path, "rb") as handle:
            magic = handle.readline().decode("utf-8").rstrip("\n")
            if magic != _MAGIC:
                raise ValueError(f"not an index file (magic {magic!r})")
            header = json.loads(handle.readline().decode("utf-8"))
            blob = handle.read()
        if (
            expected_corpus_hash is not None
            and header["corpus_hash"] != expected_corpus_hash
        ):
            raise CorpusHashMismatch(
                f"index corpus hash {header['corpus_hash']} != expected {expected_corpus_hash}"
            )
        index = cls(
            provider_name=header["provider_name"],
            provider_version=header["provider_version"],
            dim=int(header["dim"]),
            corpus_hash=header["corpus_hash"],
        )
        matrix = np.frombuffer(blob, dtype=header["dtype"]).reshape(
            header["n_docs"], header["dim"]
        )
        index.doc_ids = list(header["doc_ids"])
        index.doc_tokens = [list(tokens) for tokens in header["doc_tokens"]]
        index.doc_texts = list(header["doc_texts"])
        index._rows = [matrix[i].copy() for i in range(header["n_docs"])]
        index._row_of = {doc_id: i for i, doc_id in enumerate(index.doc_ids)}
        return index


# ---------------------------------------------------------------------------
# scoring + retrieval


def score_all(index: DocumentIndex, query: str, scorer) -> np.ndarray:
    """Score every indexed document with whichever scorer family is given."""

    if len(index) == 0:
        raise EmptyIndex("no documents to score")

    if isinstance(scorer, BiScorer):
        q = scorer.provider.embed(query)
        if (q.provider, q.version) != (index.provider_name, index.provider_version):
            raise ProviderMismatch(
                f"query embedded by {q.provider}/{q.version}, index holds "
                f"{index.provider_name}/{index.provider_version}"
            )
        return scorer.score_matrix(q, index.embeddings)

    if isinstance(scorer, Bm25Scorer):
        tokens = preprocess(query)
        return np.array(
            [scorer.score_tokens(tokens, doc_id).value for doc_id in index.doc_ids]
        )

    if isinstance(scorer, LateInteractionScorer):
        q_tokens = preprocess(query)
        q_matrix = scorer.provider.embed_tokens(q_tokens)
        scores = np.zeros(len(index))
        for i, doc_id in enumerate(index.doc_ids):
            d_matrix = index.token_matrix(doc_id, scorer.provider)
            if q_matrix.n_tokens == 0 or d_matrix.n_tokens == 0:
                scores[i] = 0.0  # degenerate side contributes nothing
            else:
                scores[i] = scorer.score_matrices(q_matrix, d_matrix).value
        return scores

    if isinstance(scorer, CrossScorer):
        q_tokens = preprocess(query)
        return np.array(
            [
                float(
                    np.dot(
                        scorer.weights,
                        scorer.features_from_tokens(q_tokens, index.tokens_of(doc_id)),
                    )
                )
                for doc_id in index.doc_ids
            ]
        )

    # duck-typed fallback: anything exposing score(query, document) -> RelevanceScore
    return np.array(
        [scorer.score(query, index.text_of(doc_id)).value for doc_id in index.doc_ids]
    )


def ranked_order(scores: Sequence[float], doc_ids: Sequence[str]) -> List[int]:
    """Total retrieval order: descending score, ascending doc_id on ties."""

    return sorted(range(len(doc_ids)), key=lambda i: (-float(scores[i]), doc_ids[i]))


def retrieve_topk(index: DocumentIndex, query: str, scorer, k: int) -> List[Candidate]:
    if k < 1:
        raise ValueError("K must be at least 1")
    scores = score_all(index, query, scorer)
    scorer_id = getattr(scorer, "scorer_id", type(scorer).__name__)
    order = ranked_order(scores, index.doc_ids)[: min(k, len(index))]
    return [
        Candidate(
            doc_id=index.doc_ids[i],
            score=RelevanceScore(value=float(scores[i]), scorer_id=scorer_id),
        )
        for i in order
    ]
