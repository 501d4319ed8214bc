"""Command-line interface: batch experiment plumbing over the library.

Every subcommand reads and writes one *run directory* — a self-describing
artifact store with a manifest (see ``crest.artifacts``).  A full experiment
is a sequence of commands over the same directory::

    crest synth-corpus --run-dir runs/demo --n 200 --seed 7
    crest build-index  --run-dir runs/demo --dim 4096
    crest train-scorer --run-dir runs/demo --arch bi    --target impact
    ...                                    --arch cross --target single
    crest train-weights --run-dir runs/demo --stage ir
    crest train-weights --run-dir runs/demo --stage rr
    crest run      --run-dir runs/demo --mode crest
    crest evaluate --run-dir runs/demo --run crest
    crest calibrate --run-dir runs/demo --run crest
    crest ablate   --run-dir runs/demo
    crest serve    --run-dir runs/demo --port 8000

Determinism: identical flags produce byte-identical corpus, index, scorer
and weight files.  Failures print a machine-readable JSON record to stderr,
``{"error": <category>, "message": ...}``, with exit codes: ``config_invalid``
2, ``artifact_missing`` 3, ``artifact_mismatch`` 4, ``internal_error`` 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ._version import __version__
from .artifacts import (
    ArtifactMismatch,
    ArtifactMissing,
    breakdowns_path,
    build_provider,
    corpus_path,
    index_path,
    load_bundle,
    load_manifest,
    load_scorer,
    qrels_path,
    record_step,
    report_path,
    run_path,
    save_scorer,
    scorer_path,
    weights_path,
)
from .benchmark import BenchmarkConfig, validation_pools
from .calibration import (
    bin_stats,
    confidence_run,
    ece,
    render_reliability_table,
    to_classification,
)
from .corpus import (
    DatasetSpec,
    SynthParams,
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
from .ensemble import CriterionWeights, aggregate, train_weights
from .evaluation import (
    ScoredRun,
    compute_metric,
    evaluate_matrix,
    load_run,
    metric_report,
    ranked,
    save_run,
)
from .index import CorpusHashMismatch, DocumentIndex
from .pipeline import (
    ConfigInvalid,
    PipelineConfig,
    batch_run,
    load_breakdowns,
    run_two_stage,
    save_breakdowns,
)
from .scorers import (
    BiScorer,
    CrossScorer,
    ProviderMismatch,
    TrainConfig,
    evaluate_triples,
    train_scorer,
    triples_from_pairs,
)
from .tr_core import (
    AUXILIARY_CRITERIA,
    CriterionKind,
    build_query_bundle,
    parse_observation,
)

_DEFAULTS = BenchmarkConfig()  # single source of truth for training defaults


class _Parser(argparse.ArgumentParser):
    """Argument errors surface as ConfigInvalid so they get the same
    machine-readable treatment as any other configuration problem."""

    def error(self, message: str):  # noqa: D102 - argparse hook
        raise ConfigInvalid(message)


# ---------------------------------------------------------------------------
# shared helpers


def _config_overlay(args: argparse.Namespace, fields: Sequence[str]) -> Dict:
    """Merge an optional JSON config file with explicit flags; flags win."""

    merged: Dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ArtifactMissing(str(path))
        with open(path, "r", encoding="utf-8") as handle:
            merged.update(json.load(handle))
    for name in fields:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return merged


def _criterion_map(raw: Optional[Dict[str, float]]) -> Optional[Dict[CriterionKind, float]]:
    if raw is None:
        return None
    return {CriterionKind.from_name(name): float(v) for name, v in raw.items()}


def _load_corpus_for(args) -> tuple:
    corpus_file = corpus_path(args.run_dir)
    if not corpus_file.exists():
        raise ArtifactMissing(str(corpus_file))
    corpus = load_corpus(corpus_file)
    return corpus, load_manifest(args.run_dir)


def _split_settings(manifest: dict, args) -> tuple:
    """Split parameters: explicit flags override what synth-corpus recorded."""

    recorded = manifest.get("steps", {}).get("synth-corpus", {})
    val_size = getattr(args, "val_size", None) or recorded.get("val_size", 40)
    test_size = getattr(args, "test_size", None) or recorded.get("test_size", 60)
    seed = getattr(args, "split_seed", None) or recorded.get("seed", 0)
    return int(val_size), int(test_size), int(seed)


def _load_index_provider(args, corpus):
    idx_file = index_path(args.run_dir)
    if not idx_file.exists():
        raise ArtifactMissing(str(idx_file))
    index = DocumentIndex.load(idx_file, expected_corpus_hash=corpus_digest(corpus))
    provider = build_provider(corpus, index.dim)
    if provider.version != index.provider_version:
        raise ArtifactMismatch(
            f"rebuilt provider {provider.version} != index {index.provider_version}"
        )
    return index, provider


def _emit(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    print(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth_corpus(args) -> int:
    overlay = _config_overlay(
        args,
        (
            "n_trs",
            "seed",
            "vocab_size",
            "filler_vocab_size",
            "signature_size",
            "missing_criterion_rate",
            "answer_filler_tokens",
            "observation_filler_tokens",
            "headline_tokens",
            "confuser_repeat",
        ),
    )
    seed = int(overlay.pop("seed", 0))
    signals = _criterion_map(overlay.pop("signal_strengths", None))
    confusion = _criterion_map(overlay.pop("confusion_rates", None))
    params_kwargs = dict(overlay)
    if signals is not None:
        params_kwargs["signal_strengths"] = signals
    if confusion is not None:
        params_kwargs["confusion_rates"] = confusion
    params = SynthParams(**params_kwargs)

    corpus, qrels = synth_corpus(params, seed)
    run_dir = Path(args.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus_path(run_dir), corpus)
    save_qrels(qrels_path(run_dir), qrels)
    record_step(
        run_dir,
        "synth-corpus",
        {
            "seed": seed,
            "n_trs": params.n_trs,
            "vocab_size": params.vocab_size,
            "val_size": args.val_size or 40,
            "test_size": args.test_size or 60,
        },
        corpus_hash=corpus_digest(corpus),
    )
    print(f"wrote {len(corpus)} TRs to {corpus_path(run_dir)}")
    return 0


def cmd_parse(args) -> int:
    if args.text:
        path = Path(args.text)
        if not path.exists():
            raise ArtifactMissing(str(path))
        observation = parse_observation(path.read_text(encoding="utf-8"))
        _emit(
            {
                "criteria": {c.value: t for c, t in observation.criteria.items()},
                "residue": observation.residue,
                "diagnostics": [str(d) for d in observation.diagnostics],
            },
            args.out,
        )
        return 0

    if not args.run_dir:
        raise ConfigInvalid("parse needs --run-dir or --text")
    corpus, _ = _load_corpus_for(args)
    by_kind: Dict[str, int] = {}
    complete = 0
    per_tr = []
    for tr in corpus:
        observation = parse_observation(tr.observation.raw)
        if observation.has_all_criteria():
            complete += 1
        for diag in observation.diagnostics:
            by_kind[diag.kind] = by_kind.get(diag.kind, 0) + 1
        per_tr.append(
            {
                "tr_id": tr.id,
                "fields": sorted(c.value for c in observation.criteria),
                "diagnostics": [str(d) for d in observation.diagnostics],
            }
        )
    _emit(
        {
            "n_trs": len(corpus),
            "n_all_criteria": complete,
            "diagnostics_by_kind": by_kind,
            "per_tr": per_tr if args.verbose else per_tr[: args.limit],
        },
        args.out,
    )
    return 0


def cmd_build_index(args) -> int:
    corpus, _ = _load_corpus_for(args)
    provider = build_provider(corpus, args.dim)
    index = DocumentIndex.build(
        answer_documents(corpus), provider, corpus_hash=corpus_digest(corpus)
    )
    index.save(index_path(args.run_dir))
    record_step(
        args.run_dir,
        "build-index",
        {
            "dim": args.dim,
            "n_documents": len(index),
            "provider_version": provider.version,
        },
    )
    print(f"indexed {len(index)} documents at dim {args.dim}")
    return 0


_ARCH_DEFAULTS = {
    "bi": _DEFAULTS.bi_train,
    "cross": _DEFAULTS.cross_train,
}


def cmd_train_scorer(args) -> int:
    corpus, manifest = _load_corpus_for(args)
    index, provider = _load_index_provider(args, corpus)
    val_size, test_size, seed = _split_settings(manifest, args)
    split = make_splits(corpus, val_size, test_size, seed)

    if args.target == "single":
        spec = DatasetSpec.single_model()
    else:
        spec = DatasetSpec.criterion(CriterionKind.from_name(args.target))
    pairs = build_dataset(corpus, spec, split, seed)
    triples = triples_from_pairs(pairs)

    defaults = _ARCH_DEFAULTS[args.arch]
    config = TrainConfig(
        margin=args.margin if args.margin is not None else defaults.margin,
        batch_size=args.batch_size or defaults.batch_size,
        learning_rate=args.learning_rate or defaults.learning_rate,
        epochs=args.epochs or defaults.epochs,
        seed=args.train_seed or defaults.seed,
    )
    name = f"{args.arch}-{args.target}"
    if args.arch == "bi":
        scorer = BiScorer(provider, scorer_id=name)
    else:
        scorer = CrossScorer(provider.stats, budget=args.budget, scorer_id=name)
    report = train_scorer(scorer, triples, config)
    _, accuracy = evaluate_triples(scorer, triples, config.margin)
    save_scorer(scorer_path(args.run_dir, name), scorer)
    record_step(
        args.run_dir,
        f"train-scorer-{name}",
        {
            "dataset": spec.name,
            "n_triples": len(triples),
            "final_loss": report.final_loss,
            "train_pairwise_accuracy": accuracy,
            "margin": config.margin,
            "epochs": config.epochs,
            "seed": config.seed,
        },
    )
    print(
        f"trained {name}: loss {report.final_loss:.4f}, "
        f"pairwise accuracy {accuracy:.3f} over {len(triples)} triples"
    )
    return 0


def _stage_scorers(args, provider, arch: str) -> Dict[CriterionKind, object]:
    scorers = {}
    for criterion in AUXILIARY_CRITERIA:
        scorers[criterion] = load_scorer(
            scorer_path(args.run_dir, f"{arch}-{criterion.value}"), provider
        )
    return scorers


def cmd_train_weights(args) -> int:
    corpus, manifest = _load_corpus_for(args)
    index, provider = _load_index_provider(args, corpus)
    qrels = load_qrels(qrels_path(args.run_dir))
    val_size, test_size, seed = _split_settings(manifest, args)
    split = make_splits(corpus, val_size, test_size, seed)
    by_id = {tr.id: tr for tr in corpus}
    bundles = {tr_id: build_query_bundle(by_id[tr_id]) for tr_id in split.validation}

    config = _DEFAULTS.weight_train
    if args.margin is not None or args.learning_rate or args.epochs or args.train_seed:
        from .ensemble import WeightTrainConfig

        config = WeightTrainConfig(
            margin=args.margin if args.margin is not None else config.margin,
            learning_rate=args.learning_rate or config.learning_rate,
            epochs=args.epochs or config.epochs,
            seed=args.train_seed or config.seed,
        )

    if args.stage == "ir":
        scorers = _stage_scorers(args, provider, "bi")
        pools = validation_pools(index, bundles, qrels, scorers, None, seed)
        weights, report = train_weights(pools, "ir", "bi", config)
    else:
        bi_scorers = _stage_scorers(args, provider, "bi")
        base_bi = load_scorer(scorer_path(args.run_dir, "bi-single"), provider)
        ir_weights = CriterionWeights.load(weights_path(args.run_dir, "ir"))
        from .pipeline import PipelineModels, StageModels

        ir_models = PipelineModels(
            ir=StageModels(
                criterion_scorers=dict(bi_scorers),
                base_scorer=base_bi,
                weights=ir_weights,
            ),
            rr=StageModels(),
        )
        ir_config = PipelineConfig(k=args.k, rr_scorer="none")
        candidates = {
            tr_id: [b.doc_id for b in run_two_stage(bundle, index, ir_models, ir_config)]
            for tr_id, bundle in bundles.items()
        }
        scorers = _stage_scorers(args, provider, "cross")
        pools = validation_pools(
            index, bundles, qrels, scorers, None, seed,
            candidate_ids=candidates, use_index_scoring=False,
        )
        weights, report = train_weights(pools, "rr", "cross", config)

    weights.save(weights_path(args.run_dir, args.stage))
    record_step(
        args.run_dir,
        f"train-weights-{args.stage}",
        {
            "values": {c.value: v for c, v in weights.values.items()},
            "best_epoch": report.best_epoch,
            "validation_mrr": max(report.epoch_mrrs) if report.epoch_mrrs else None,
            "n_pools": len(pools),
        },
    )
    print(
        f"{args.stage} weights: "
        + ", ".join(f"{c.value}={v:.3f}" for c, v in weights.values.items())
    )
    return 0


def _parse_mode(mode: str) -> tuple:
    """Returns (kind, criterion) where kind ∈ crest|single|criterion|ablate."""

    if mode in ("crest", "single"):
        return mode, None
    for prefix in ("criterion", "ablate"):
        if mode.startswith(prefix + ":"):
            return prefix, CriterionKind.from_name(mode.split(":", 1)[1])
    raise ConfigInvalid(
        f"unknown mode {mode!r}: expected crest, single, criterion:<name> "
        "or ablate:<name>"
    )


def _mode_run(bundle, query_ids, mode: str, k: int, rerank: bool):
    """One configuration's batch run, mirroring the benchmark grid:
    ``crest``, ``single``, ``criterion:<c>`` (that criterion alone, unit
    weight), ``ablate:<c>`` (the full ensemble minus that criterion)."""

    kind, criterion = _parse_mode(mode)
    models = bundle.models
    by_id = bundle.by_id
    rr_scorer = "cross" if rerank else "none"
    if kind == "single":
        bundles = {
            tr_id: build_query_bundle(by_id[tr_id], active=()) for tr_id in query_ids
        }
        config = PipelineConfig(
            k=k, ir_ensemble=False, rr_ensemble=False, rr_scorer=rr_scorer
        )
    else:
        bundles = {tr_id: build_query_bundle(by_id[tr_id]) for tr_id in query_ids}
        if kind == "crest":
            config = PipelineConfig(k=k, rr_scorer=rr_scorer)
        elif kind == "criterion":
            unit = {c: 1.0 for c in AUXILIARY_CRITERIA}
            from .pipeline import PipelineModels, StageModels

            models = PipelineModels(
                ir=StageModels(
                    criterion_scorers=models.ir.criterion_scorers,
                    base_scorer=models.ir.base_scorer,
                    weights=CriterionWeights(
                        values=unit, stage="ir", architecture="bi",
                        active=AUXILIARY_CRITERIA,
                    ),
                ),
                rr=StageModels(
                    criterion_scorers=models.rr.criterion_scorers,
                    base_scorer=models.rr.base_scorer,
                    weights=CriterionWeights(
                        values=unit, stage="rr", architecture="cross",
                        active=AUXILIARY_CRITERIA,
                    ),
                ),
            )
            config = PipelineConfig(k=k, active=(criterion,), rr_scorer=rr_scorer)
        else:  # ablate
            remaining = tuple(c for c in AUXILIARY_CRITERIA if c != criterion)
            config = PipelineConfig(k=k, active=remaining, rr_scorer=rr_scorer)
    return batch_run(bundles, bundle.index, models, config)


def _query_ids(bundle, manifest, args) -> List[str]:
    val_size, test_size, seed = _split_settings(manifest, args)
    split = make_splits(bundle.corpus, val_size, test_size, seed)
    return list(split.validation if args.split == "validation" else split.test)


def cmd_run(args) -> int:
    bundle = load_bundle(args.run_dir)
    query_ids = _query_ids(bundle, bundle.manifest, args)
    run, breakdowns = _mode_run(
        bundle, query_ids, args.mode, args.k, not args.no_rerank
    )
    name = args.name or args.mode.replace(":", "-")
    rp = run_path(args.run_dir, name)
    rp.parent.mkdir(parents=True, exist_ok=True)
    save_run(rp, run, tag=name)
    bp = breakdowns_path(args.run_dir, name)
    bp.parent.mkdir(parents=True, exist_ok=True)
    save_breakdowns(bp, breakdowns)
    record_step(
        args.run_dir,
        f"run-{name}",
        {
            "mode": args.mode,
            "split": args.split,
            "k": args.k,
            "rerank": not args.no_rerank,
            "n_queries": len(run),
        },
    )
    print(f"wrote {rp} and {bp} ({len(run)} queries)")
    return 0


def cmd_evaluate(args) -> int:
    names = [n.strip() for n in args.run.split(",") if n.strip()]
    if not names:
        raise ConfigInvalid("--run needs at least one run name")
    qrels = load_qrels(qrels_path(args.run_dir))
    metrics = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
    runs: Dict[str, Dict[str, List[str]]] = {}
    for name in names:
        rp = run_path(args.run_dir, name)
        if not rp.exists():
            raise ArtifactMissing(str(rp))
        runs[name] = ranked(load_run(rp))

    if len(names) == 1:
        report = metric_report(runs[names[0]], qrels, config=names[0], metrics=metrics)
        payload = {
            "config": report.config,
            "n_queries": report.n_queries,
            "metrics": report.metrics,
        }
        out = report_path(args.run_dir, f"{names[0]}-metrics")
        _emit(payload, str(out))
        record_step(args.run_dir, f"evaluate-{names[0]}", payload)
        return 0

    table = evaluate_matrix(runs, qrels, metrics=metrics)
    print(table.render(percent=True, mark_max=True))
    payload = {
        "metrics": list(metrics),
        "rows": [
            {"config": row.config, "n_queries": row.n_queries, "metrics": row.metrics}
            for row in table.rows
        ],
    }
    label = "evaluate-" + "-".join(names)
    out = report_path(args.run_dir, label)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    record_step(
        args.run_dir,
        label,
        {"mrr": {row.config: row.metrics.get("MRR") for row in table.rows}},
    )
    return 0


def _confidence_from_records(records_by_query, weights: CriterionWeights) -> ScoredRun:
    """The un-normalized confidence combination, from persisted breakdowns."""

    run: ScoredRun = {}
    for query_id, records in records_by_query.items():
        scored = []
        for record in records:
            raw = {
                CriterionKind.from_name(name): value
                for name, value in record.get("raw", {}).items()
            }
            if raw:
                score = aggregate(raw, weights, active=tuple(raw))
            else:
                score = float(record["aggregated"])
            scored.append((record["doc_id"], score))
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        run[query_id] = scored
    return run


def cmd_calibrate(args) -> int:
    bp = breakdowns_path(args.run_dir, args.run)
    if not bp.exists():
        raise ArtifactMissing(str(bp))
    records = load_breakdowns(bp)
    wp = weights_path(args.run_dir, args.stage)
    weights = CriterionWeights.load(wp) if wp.exists() else None
    if weights is not None:
        conf = _confidence_from_records(records, weights)
    else:
        conf = {
            qid: [(r["doc_id"], float(r["aggregated"])) for r in rs]
            for qid, rs in records.items()
        }
    qrels = load_qrels(qrels_path(args.run_dir))
    samples, skipped = to_classification(conf, qrels)
    stats = bin_stats(samples, args.bins)
    value = ece(samples, args.bins)
    payload = {
        "run": args.run,
        "n_samples": len(samples),
        "n_skipped": len(skipped),
        "bins": args.bins,
        "ece": value,
        "reliability": [
            {
                "bin": b.index,
                "count": b.count,
                "mean_confidence": b.mean_confidence,
                "accuracy": b.accuracy,
            }
            for b in stats
        ],
    }
    out = report_path(args.run_dir, f"{args.run}-calibration")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(render_reliability_table(stats, args.bins))
    print(f"ECE = {value:.4f}  ({len(samples)} samples, {len(skipped)} skipped)")
    record_step(args.run_dir, f"calibrate-{args.run}", {"ece": value})
    return 0


def cmd_ablate(args) -> int:
    bundle = load_bundle(args.run_dir)
    query_ids = _query_ids(bundle, bundle.manifest, args)
    runs: Dict[str, ScoredRun] = {}
    runs["crest"], _ = _mode_run(bundle, query_ids, "crest", args.k, True)
    for criterion in AUXILIARY_CRITERIA:
        name = f"without-{criterion.value}"
        runs[name], _ = _mode_run(
            bundle, query_ids, f"ablate:{criterion.value}", args.k, True
        )
    table = evaluate_matrix(
        {name: ranked(run) for name, run in runs.items()},
        bundle.qrels,
    )
    rendered = table.render(deltas_from="crest")
    print(rendered)
    payload = {
        "rows": [
            {"config": row.config, "metrics": row.metrics} for row in table.rows
        ],
    }
    out = report_path(args.run_dir, "ablation")
    _emit(payload, str(out))
    record_step(
        args.run_dir,
        "ablate",
        {"mrr": {row.config: row.metrics.get("MRR") for row in table.rows}},
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    artifacts_dir = args.run_dir or os.environ.get("CREST_ARTIFACTS")
    if not artifacts_dir:
        raise ConfigInvalid("provide --run-dir or set CREST_ARTIFACTS")
    port = args.port or int(os.environ.get("CREST_PORT", "8000"))
    app = create_app(
        load_bundle(artifacts_dir),
        deadline_seconds=args.deadline,
        excerpt_chars=args.excerpt_chars,
    )
    uvicorn.run(app, host=args.host, port=port)
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="crest", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"crest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        return p

    p = add("synth-corpus", cmd_synth_corpus, "generate a planted-signal corpus")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--config", help="JSON file with generator parameters")
    p.add_argument("--n", dest="n_trs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--vocab-size", dest="vocab_size", type=int)
    p.add_argument("--filler-vocab-size", dest="filler_vocab_size", type=int)
    p.add_argument("--signature-size", dest="signature_size", type=int)
    p.add_argument("--missing-rate", dest="missing_criterion_rate", type=float)
    p.add_argument("--answer-filler", dest="answer_filler_tokens", type=int)
    p.add_argument("--observation-filler", dest="observation_filler_tokens", type=int)
    p.add_argument("--headline-tokens", dest="headline_tokens", type=int)
    p.add_argument("--confuser-repeat", dest="confuser_repeat", type=int)
    p.add_argument("--val-size", dest="val_size", type=int)
    p.add_argument("--test-size", dest="test_size", type=int)

    p = add("parse", cmd_parse, "parse observations and report diagnostics")
    p.add_argument("--run-dir", help="parse every TR in this run directory")
    p.add_argument("--text", help="parse one raw observation text file instead")
    p.add_argument("--out", help="also write the JSON report here")
    p.add_argument("--limit", type=int, default=10, help="per-TR records to include")
    p.add_argument("--verbose", action="store_true", help="include every TR record")

    p = add("build-index", cmd_build_index, "embed answers into a document index")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--dim", type=int, default=_DEFAULTS.dim)

    p = add("train-scorer", cmd_train_scorer, "train one scorer")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--arch", choices=("bi", "cross"), required=True)
    p.add_argument(
        "--target",
        required=True,
        choices=tuple(c.value for c in AUXILIARY_CRITERIA) + ("single",),
    )
    p.add_argument("--budget", type=int, default=256, help="cross token budget")
    p.add_argument("--margin", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--train-seed", dest="train_seed", type=int)
    p.add_argument("--val-size", dest="val_size", type=int)
    p.add_argument("--test-size", dest="test_size", type=int)
    p.add_argument("--split-seed", dest="split_seed", type=int)

    p = add("train-weights", cmd_train_weights, "train stage ensemble weights")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--stage", choices=("ir", "rr"), required=True)
    p.add_argument("--k", type=int, default=_DEFAULTS.k, help="IR candidates for RR pools")
    p.add_argument("--margin", type=float)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--train-seed", dest="train_seed", type=int)
    p.add_argument("--val-size", dest="val_size", type=int)
    p.add_argument("--test-size", dest="test_size", type=int)
    p.add_argument("--split-seed", dest="split_seed", type=int)

    p = add("run", cmd_run, "execute one retrieval configuration")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--mode", default="crest",
                   help="crest | single | criterion:<name> | ablate:<name>")
    p.add_argument("--name", help="run name (default: derived from mode)")
    p.add_argument("--split", choices=("test", "validation"), default="test")
    p.add_argument("--k", type=int, default=_DEFAULTS.k)
    p.add_argument("--no-rerank", action="store_true")
    p.add_argument("--val-size", dest="val_size", type=int)
    p.add_argument("--test-size", dest="test_size", type=int)
    p.add_argument("--split-seed", dest="split_seed", type=int)

    p = add("evaluate", cmd_evaluate, "score a run against the qrels")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--run", required=True, help="run name (runs/<name>.trec)")
    p.add_argument("--metrics", default="MRR,R@5,R@10,R@15,nDCG@15")

    p = add("calibrate", cmd_calibrate, "confidence calibration for a run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--stage", choices=("ir", "rr"), default="rr",
                   help="whose weights drive the confidence combination")
    p.add_argument("--bins", type=int, default=10)

    p = add("ablate", cmd_ablate, "criterion-exclusion grid over the test split")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--k", type=int, default=_DEFAULTS.k)
    p.add_argument("--split", choices=("test", "validation"), default="test")
    p.add_argument("--val-size", dest="val_size", type=int)
    p.add_argument("--test-size", dest="test_size", type=int)
    p.add_argument("--split-seed", dest="split_seed", type=int)

    p = add("serve", cmd_serve, "start the HTTP service over a run directory")
    p.add_argument("--run-dir", help="artifact directory (or CREST_ARTIFACTS)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, help="default: CREST_PORT or 8000")
    p.add_argument("--deadline", type=float, default=10.0)
    p.add_argument("--excerpt-chars", dest="excerpt_chars", type=int, default=240)

    return parser


_ERROR_EXITS = (
    ((ConfigInvalid,), "config_invalid", 2),
    ((ArtifactMissing, FileNotFoundError), "artifact_missing", 3),
    ((ArtifactMismatch, CorpusHashMismatch, ProviderMismatch), "artifact_mismatch", 4),
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args) or 0
    except SystemExit:
        raise
    except BaseException as exc:  # noqa: BLE001 - single reporting funnel
        for types, category, code in _ERROR_EXITS:
            if isinstance(exc, types):
                break
        else:
            if isinstance(exc, ValueError):
                category, code = "config_invalid", 2
            else:
                category, code = "internal_error", 1
        print(
            json.dumps({"error": category, "message": str(exc)}),
            file=sys.stderr,
        )
        return code


if __name__ == "__main__":
    sys.exit(main())
