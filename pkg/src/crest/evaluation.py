"""Ranking metrics and comparison tables.

Conventions, stated once here because several are convention-dependent:

* MRR: mean over queries of ``1/rank`` of the first relevant document; a
  query whose ranked list contains no relevant document contributes 0 (it is
  not skipped), so runs over differently filtered datasets stay comparable.
* Recall@K: per query, the fraction of its relevant documents appearing in
  the top K, averaged over queries; with one relevant document per query
  this is the hit rate.
* nDCG@K: gain ``2^rel - 1``, discount ``log2(rank + 1)``, normalized by
  the ideal DCG at K; a query with zero ideal DCG scores 0 and raises a
  :class:`ZeroIdealDCG` warning.

Run/qrels shapes: a ranked run maps query_id to doc_ids in retrieval order;
a scored run keeps ``(doc_id, score)`` pairs (needed downstream where raw
scores matter).  Qrels accept either ``{query: {doc: graded_rel}}`` or
``{query: set_of_docs}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

RankedRun = Dict[str, List[str]]
ScoredRun = Dict[str, List[Tuple[str, float]]]
QrelsLike = Mapping[str, Union[Mapping[str, int], Set[str]]]


class MissingQrels(KeyError):
    """A run contains a query with no qrels entry."""


class SplitMismatch(ValueError):
    """Two metric values from different test splits were subtracted."""


class ZeroIdealDCG(UserWarning):
    """A query had no positively judged document; its nDCG is taken as 0."""


def _gains(qrels: QrelsLike, query_id: str) -> Dict[str, int]:
    if query_id not in qrels:
        raise MissingQrels(query_id)
    judgment = qrels[query_id]
    if isinstance(judgment, Mapping):
        return {doc: int(rel) for doc, rel in judgment.items()}
    return {doc: 1 for doc in judgment}


def _relevant(qrels: QrelsLike, query_id: str) -> Set[str]:
    return {doc for doc, rel in _gains(qrels, query_id).items() if rel > 0}


def ranked(run: ScoredRun) -> RankedRun:
    return {query_id: [doc_id for doc_id, _ in docs] for query_id, docs in run.items()}


# ---------------------------------------------------------------------------
# metrics


def mrr(run: RankedRun, qrels: QrelsLike) -> float:
    if not run:
        return 0.0
    total = 0.0
    for query_id, docs in run.items():
        relevant = _relevant(qrels, query_id)
        for rank, doc_id in enumerate(docs, start=1):
            if doc_id in relevant:
                total += 1.0 / rank
                break
    return total / len(run)


def recall_at_k(run: RankedRun, qrels: QrelsLike, k: int) -> float:
    if k < 1:
        raise ValueError("k must be at least 1")
    if not run:
        return 0.0
    total = 0.0
    for query_id, docs in run.items():
        relevant = _relevant(qrels, query_id)
        if not relevant:
            continue  # nothing retrievable; contributes 0
        total += len(relevant & set(docs[:k])) / len(relevant)
    return total / len(run)


def ndcg_at_k(run: RankedRun, qrels: QrelsLike, k: int) -> float:
    if k < 1:
        raise ValueError("k must be at least 1")
    if not run:
        return 0.0
    total = 0.0
    for query_id, docs in run.items():
        gains = _gains(qrels, query_id)
        ideal = sorted((g for g in gains.values() if g > 0), reverse=True)[:k]
        ideal_dcg = sum(
            (2**g - 1) / math.log2(rank + 1) for rank, g in enumerate(ideal, start=1)
        )
        if ideal_dcg == 0.0:
            warnings.warn(
                f"query {query_id} has no positively judged document; nDCG set to 0",
                ZeroIdealDCG,
                stacklevel=2,
            )
            continue
        dcg = sum(
            (2 ** gains.get(doc_id, 0) - 1) / math.log2(rank + 1)
            for rank, doc_id in enumerate(docs[:k], start=1)
        )
        total += dcg / ideal_dcg
    return total / len(run)


@dataclass(frozen=True)
class MetricValue:
    """A metric tagged with the split it was measured on, so impact scores
    can refuse to subtract values from different test sets."""

    value: float
    split: Optional[str] = None


def impact_score(
    p_c: Union[float, MetricValue], p_baseline: Union[float, MetricValue]
) -> float:
    """Criterion-vs-baseline difference, in whatever units the inputs use."""

    if isinstance(p_c, MetricValue) and isinstance(p_baseline, MetricValue):
        if (
            p_c.split is not None
            and p_baseline.split is not None
            and p_c.split != p_baseline.split
        ):
            raise SplitMismatch(f"{p_c.split} vs {p_baseline.split}")
    value_c = p_c.value if isinstance(p_c, MetricValue) else float(p_c)
    value_b = p_baseline.value if isinstance(p_baseline, MetricValue) else float(p_baseline)
    return value_c - value_b


# ---------------------------------------------------------------------------
# metric reports and comparison tables

DEFAULT_METRICS: Tuple[str, ...] = ("MRR", "R@5", "R@10", "R@15", "nDCG@15")


def compute_metric(name: str, run: RankedRun, qrels: QrelsLike) -> float:
    if name == "MRR":
        return mrr(run, qrels)
    if name.startswith("R@"):
        return recall_at_k(run, qrels, int(name[2:]))
    if name.startswith("nDCG@"):
        return ndcg_at_k(run, qrels, int(name[5:]))
    raise ValueError(f"unknown metric {name!r}")


@dataclass(frozen=True)
class MetricReport:
    config: str
    n_queries: int
    metrics: Dict[str, float]

    def __post_init__(self) -> None:
        for name, value in self.metrics.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"metric {name} out of [0, 1]: {value}")


def metric_report(
    run: RankedRun,
    qrels: QrelsLike,
    config: str,
    metrics: Sequence[str] = DEFAULT_METRICS,
) -> MetricReport:
    return MetricReport(
        config=config,
        n_queries=len(run),
        metrics={name: compute_metric(name, run, qrels) for name in metrics},
    )


@dataclass
class ComparisonTable:
    """Rows of configurations against columns of metrics, renderable as an
    aligned text table with the per-column maximum starred and optional
    deltas against a reference row."""

    metric_names: Tuple[str, ...]
    rows: List[MetricReport]

    def value(self, config: str, metric: str) -> float:
        for row in self.rows:
            if row.config == config:
                return row.metrics[metric]
        raise KeyError(config)

    def render(
        self,
        percent: bool = True,
        mark_max: bool = True,
        deltas_from: Optional[str] = None,
    ) -> str:
        reference = None
        if deltas_from is not None:
            reference = next(r for r in self.rows if r.config == deltas_from)

        def fmt(value: float, ref: Optional[float]) -> str:
            shown = value * 100 if percent else value
            text = f"{shown:.2f}"
            if ref is not None:
                delta = (value - ref) * 100 if percent else value - ref
                text += f" ({delta:+.2f})"
            return text

        maxima = {
            name: max(row.metrics[name] for row in self.rows)
            for name in self.metric_names
        }
        header = ["config"] + list(self.metric_names)
        body: List[List[str]] = []
        for row in self.rows:
            cells = [row.config]
            for name in self.metric_names:
                ref = (
                    reference.metrics[name]
                    if reference is not None and row.config != reference.config
                    else None
                )
                cell = fmt(row.metrics[name], ref)
                if mark_max and row.metrics[name] == maxima[name]:
                    cell += " *"
                cells.append(cell)
            body.append(cells)

        widths = [
            max(len(header[i]), *(len(r[i]) for r in body)) for i in range(len(header))
        ]
        lines = [
            "  ".join(header[i].ljust(widths[i]) for i in range(len(header))),
            "  ".join("-" * widths[i] for i in range(len(header))),
        ]
        for cells in body:
            lines.append("  ".join(cells[i].ljust(widths[i]) for i in range(len(cells))))
        return "\n".join(lines)


def evaluate_matrix(
    runs: Mapping[str, RankedRun],
    qrels: QrelsLike,
    metrics: Sequence[str] = DEFAULT_METRICS,
) -> ComparisonTable:
    return ComparisonTable(
        metric_names=tuple(metrics),
        rows=[metric_report(run, qrels, config, metrics) for config, run in runs.items()],
    )


# ---------------------------------------------------------------------------
# TREC-format run IO ("query_id Q0 doc_id rank score tag")


def save_run(path: str | Path, run: ScoredRun, tag: str = "crest") -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for query_id in sorted(run):
            for rank, (doc_id, score) in enumerate(run[query_id], start=1):
                handle.write(f"{query_id} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


def load_run(path: str | Path) -> ScoredRun:
    entries: Dict[str, List[Tuple[int, str, float]]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ValueError(f"malformed run line: {line!r}")
            query_id, _, doc_id, rank, score, _ = parts
            entries.setdefault(query_id, []).append((int(rank), doc_id, float(score)))
    return {
        query_id: [(doc_id, score) for _, doc_id, score in sorted(rows)]
        for query_id, rows in entries.items()
    }
