"""Run-directory artifact store shared by the CLI and the HTTP service.

A run directory collects every artifact a retrieval experiment produces, so
any later step (evaluation, serving, ablation) can reload exactly what an
earlier step wrote:

* ``manifest.json`` — provenance: package version, corpus hash, and one
  record per pipeline step (seeds, parameters, files written);
* ``corpus.jsonl`` / ``qrels.json`` — the trouble reports and relevance
  judgments;
* ``index.crestidx`` — the document index over accepted answers;
* ``scorer-<name>.json`` — trained scorer parameters (``bi-impact``,
  ``cross-single``, ...);
* ``weights-ir.json`` / ``weights-rr.json`` — stage ensemble weights;
* ``runs/``, ``breakdowns/``, ``reports/`` — ranked runs, per-candidate
  score breakdowns, and metric/calibration/ablation reports.

Everything is JSON or JSONL except the index, which uses the package's flat
binary format so rebuilds are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np

from ._version import __version__
from .corpus import (
    Qrels,
    answer_documents,
    corpus_digest,
    load_corpus,
    load_qrels,
    save_corpus,
    save_qrels,
)
from .ensemble import CriterionWeights
from .index import DocumentIndex
from .pipeline import PipelineModels, StageModels
from .scorers import BiScorer, CrossScorer, HashedTfidfProvider, ProviderMismatch
from .tr_core import AUXILIARY_CRITERIA, CriterionKind, TroubleReport


class ArtifactMissing(FileNotFoundError):
    """A required artifact file is absent from the run directory."""


class ArtifactMismatch(ValueError):
    """An artifact on disk was built against different inputs than expected."""


MANIFEST = "manifest.json"
CORPUS = "corpus.jsonl"
QRELS = "qrels.json"
INDEX = "index.crestidx"


def manifest_path(run_dir: str | Path) -> Path:
    return Path(run_dir) / MANIFEST


def corpus_path(run_dir: str | Path) -> Path:
    return Path(run_dir) / CORPUS


def qrels_path(run_dir: str | Path) -> Path:
    return Path(run_dir) / QRELS


def index_path(run_dir: str | Path) -> Path:
    return Path(run_dir) / INDEX


def scorer_path(run_dir: str | Path, name: str) -> Path:
    return Path(run_dir) / f"scorer-{name}.json"


def weights_path(run_dir: str | Path, stage: str) -> Path:
    return Path(run_dir) / f"weights-{stage}.json"


def run_path(run_dir: str | Path, name: str) -> Path:
    return Path(run_dir) / "runs" / f"{name}.trec"


def breakdowns_path(run_dir: str | Path, name: str) -> Path:
    return Path(run_dir) / "breakdowns" / f"{name}.jsonl"


def report_path(run_dir: str | Path, name: str) -> Path:
    return Path(run_dir) / "reports" / f"{name}.json"


# ---------------------------------------------------------------------------
# manifest


def load_manifest(run_dir: str | Path) -> dict:
    path = manifest_path(run_dir)
    if not path.exists():
        return {"package_version": __version__, "steps": {}}
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def record_step(
    run_dir: str | Path,
    step: str,
    record: Mapping,
    corpus_hash: str | None = None,
) -> dict:
    """Merge one step's provenance record into the manifest and rewrite it."""

    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(run_dir)
    manifest["package_version"] = __version__
    if corpus_hash is not None:
        manifest["corpus_hash"] = corpus_hash
    manifest.setdefault("steps", {})[step] = dict(record)
    with open(manifest_path(run_dir), "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest


# ---------------------------------------------------------------------------
# scorer persistence


def save_scorer(path: str | Path, scorer) -> None:
    """Persist a trained scorer's parameters plus enough metadata to refuse
    loading against the wrong embedding provider or corpus statistics."""

    if isinstance(scorer, BiScorer):
        payload = {
            "kind": "bi",
            "scorer_id": scorer.scorer_id,
            "provider_version": scorer.provider.version,
            "dim": scorer.provider.dim,
            "params": scorer.get_params().tolist(),
        }
    elif isinstance(scorer, CrossScorer):
        payload = {
            "kind": "cross",
            "scorer_id": scorer.scorer_id,
            "stats_digest": scorer.stats.digest(),
            "budget": scorer.budget,
            "params": scorer.get_params().tolist(),
        }
    else:
        raise TypeError(f"cannot persist scorer of type {type(scorer).__name__}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_scorer(path: str | Path, provider: HashedTfidfProvider):
    """Rebuild a trained scorer against the given provider, verifying that
    the stored version digests match the provider it will score with."""

    path = Path(path)
    if not path.exists():
        raise ArtifactMissing(str(path))
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    params = np.asarray(payload["params"], dtype=float)
    if payload["kind"] == "bi":
        if payload["provider_version"] != provider.version:
            raise ProviderMismatch(
                f"scorer {payload['scorer_id']} trained against provider "
                f"{payload['provider_version']}, loading against {provider.version}"
            )
        scorer = BiScorer(provider, scorer_id=payload["scorer_id"])
        scorer.set_params(params)
        return scorer
    if payload["kind"] == "cross":
        if payload["stats_digest"] != provider.stats.digest():
            raise ArtifactMismatch(
                f"scorer {payload['scorer_id']} trained against corpus stats "
                f"{payload['stats_digest']}, loading against {provider.stats.digest()}"
            )
        scorer = CrossScorer(
            provider.stats, budget=int(payload["budget"]), scorer_id=payload["scorer_id"]
        )
        scorer.set_params(params)
        return scorer
    raise ArtifactMismatch(f"unknown scorer kind {payload['kind']!r} in {path}")


# ---------------------------------------------------------------------------
# bundle assembly


@dataclass
class ServiceBundle:
    """Everything the pipeline needs, reloaded from one run directory."""

    corpus: List[TroubleReport]
    qrels: Qrels
    provider: HashedTfidfProvider
    index: DocumentIndex
    models: PipelineModels
    manifest: dict

    @property
    def by_id(self) -> Dict[str, TroubleReport]:
        return {tr.id: tr for tr in self.corpus}


def build_provider(
    corpus: Sequence[TroubleReport], dim: int
) -> HashedTfidfProvider:
    """The embedding provider is cheap to rebuild and fully determined by
    the corpus answers and the dimension, so it is never persisted."""

    documents = answer_documents(corpus)
    return HashedTfidfProvider.from_texts(
        (documents[doc_id] for doc_id in sorted(documents)), dim=dim
    )


def _require_file(path: Path) -> Path:
    if not path.exists():
        raise ArtifactMissing(str(path))
    return path


def load_bundle(run_dir: str | Path) -> ServiceBundle:
    """Reload corpus, index, trained scorers and weights from a run directory
    and assemble the two-stage pipeline models."""

    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    corpus = load_corpus(_require_file(corpus_path(run_dir)))
    qrels: Qrels = {}
    if qrels_path(run_dir).exists():
        qrels = load_qrels(qrels_path(run_dir))

    digest = corpus_digest(corpus)
    if manifest.get("corpus_hash") not in (None, digest):
        raise ArtifactMismatch(
            f"manifest corpus hash {manifest['corpus_hash']} != corpus {digest}"
        )
    index = DocumentIndex.load(
        _require_file(index_path(run_dir)), expected_corpus_hash=digest
    )
    provider = build_provider(corpus, index.dim)
    if provider.version != index.provider_version:
        raise ArtifactMismatch(
            f"rebuilt provider version {provider.version} does not match the "
            f"index's {index.provider_version}"
        )

    ir_scorers: Dict[CriterionKind, BiScorer] = {}
    rr_scorers: Dict[CriterionKind, CrossScorer] = {}
    for criterion in AUXILIARY_CRITERIA:
        ir_scorers[criterion] = load_scorer(
            scorer_path(run_dir, f"bi-{criterion.value}"), provider
        )
        rr_scorers[criterion] = load_scorer(
            scorer_path(run_dir, f"cross-{criterion.value}"), provider
        )
    base_bi = load_scorer(scorer_path(run_dir, "bi-single"), provider)
    base_cross = load_scorer(scorer_path(run_dir, "cross-single"), provider)

    ir_weights = CriterionWeights.load(_require_file(weights_path(run_dir, "ir")))
    rr_weights = CriterionWeights.load(_require_file(weights_path(run_dir, "rr")))

    models = PipelineModels(
        ir=StageModels(
            criterion_scorers=dict(ir_scorers),
            base_scorer=base_bi,
            weights=ir_weights,
        ),
        rr=StageModels(
            criterion_scorers=dict(rr_scorers),
            base_scorer=base_cross,
            weights=rr_weights,
        ),
    )
    return ServiceBundle(
        corpus=corpus,
        qrels=qrels,
        provider=provider,
        index=index,
        models=models,
        manifest=manifest,
    )


def export_benchmark(artifacts, run_dir: str | Path) -> Path:
    """Write a fully-prepared benchmark (corpus, qrels, index, trained
    scorers, stage weights) as a run directory loadable by ``load_bundle`` —
    the quickest way to stand up a complete service artifact set."""

    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus_path(run_dir), artifacts.corpus)
    save_qrels(qrels_path(run_dir), artifacts.qrels)
    artifacts.index.save(index_path(run_dir))
    for criterion, scorer in artifacts.models.ir.criterion_scorers.items():
        save_scorer(scorer_path(run_dir, f"bi-{criterion.value}"), scorer)
    for criterion, scorer in artifacts.models.rr.criterion_scorers.items():
        save_scorer(scorer_path(run_dir, f"cross-{criterion.value}"), scorer)
    save_scorer(scorer_path(run_dir, "bi-single"), artifacts.models.ir.base_scorer)
    save_scorer(scorer_path(run_dir, "cross-single"), artifacts.models.rr.base_scorer)
    artifacts.models.ir.weights.save(weights_path(run_dir, "ir"))
    artifacts.models.rr.weights.save(weights_path(run_dir, "rr"))
    config = artifacts.config
    record_step(
        run_dir,
        "export-benchmark",
        {
            "seed": config.seed,
            "n_trs": config.n_trs,
            "dim": config.dim,
            "k": config.k,
        },
        corpus_hash=corpus_digest(artifacts.corpus),
    )
    return run_dir
