"""Synthetic corpus generation, splits, and training-pair datasets."""
from __future__ import annotations

import pytest

from crest import (
    CriterionKind,
    DatasetSpec,
    DocumentIndex,
    EmptyDataset,
    HashedTfidfProvider,
    InsufficientFullCriteriaTRs,
    SynthParams,
    TroubleReport,
    answer_documents,
    build_dataset,
    build_query_bundle,
    compose_query,
    corpus_digest,
    load_corpus,
    load_qrels,
    make_splits,
    mrr,
    ranked,
    retrieve_topk,
    save_corpus,
    save_qrels,
    synth_corpus,
)
from crest.corpus import ALL_DATASET_SPECS, load_pairs, save_pairs

CK = CriterionKind


def _spec(name: str) -> DatasetSpec:
    return next(s for s in ALL_DATASET_SPECS if s.name == name)


# ---------------------------------------------------------------------------
# synth_corpus
# ---------------------------------------------------------------------------

class TestSynthCorpus:
    def test_missing_rate_zero_gives_all_criteria(self, tiny_corpus):
        corpus, qrels = tiny_corpus
        assert len(corpus) == 30
        for tr in corpus:
            assert tr.observation.has_all_criteria()
            assert tr.headline and tr.answer

    def test_qrels_map_each_tr_to_its_own_answer(self, tiny_corpus):
        corpus, qrels = tiny_corpus
        for tr in corpus:
            assert qrels[tr.id] == {tr.id: 1}

    def test_observations_round_trip_through_parser(self, tiny_corpus):
        corpus, _ = tiny_corpus
        from crest import parse_observation

        for tr in corpus:
            reparsed = parse_observation(tr.observation.raw)
            assert reparsed.present() == tr.observation.present()

    def test_determinism_same_seed(self):
        params = SynthParams(n_trs=12)
        a, qa = synth_corpus(params, seed=3)
        b, qb = synth_corpus(params, seed=3)
        assert corpus_digest(a) == corpus_digest(b)
        assert qa == qb

    def test_seed_changes_content(self):
        params = SynthParams(n_trs=12)
        a, _ = synth_corpus(params, seed=3)
        b, _ = synth_corpus(params, seed=4)
        assert corpus_digest(a) != corpus_digest(b)

    def test_single_tr_corpus_is_trivially_retrievable(self):
        corpus, qrels = synth_corpus(SynthParams(n_trs=1, missing_criterion_rate=0.0), seed=2)
        docs = answer_documents(corpus)
        provider = HashedTfidfProvider.from_texts(docs.values(), dim=256)
        index = DocumentIndex.build(docs, provider)
        query = compose_query(corpus[0], None)
        hits = retrieve_topk(index, query, index.bm25_scorer(), k=1)
        run = {corpus[0].id: [(hits[0].doc_id, hits[0].score.value)]}
        assert mrr(ranked(run), qrels) == 1.0

    def test_planted_impact_signal_beats_frequency_queries(self):
        params = SynthParams(
            n_trs=40,
            missing_criterion_rate=0.0,
            signal_strengths={
                CK.TROUBLE_DESCRIPTION: 0.1,
                CK.IMPACT: 0.9,
                CK.CONDITION: 0.1,
                CK.FREQUENCY: 0.1,
                CK.REPRODUCIBILITY: 0.1,
            },
        )
        corpus, qrels = synth_corpus(params, seed=11)
        docs = answer_documents(corpus)
        provider = HashedTfidfProvider.from_texts(docs.values(), dim=512)
        index = DocumentIndex.build(docs, provider)
        bm25 = index.bm25_scorer()

        def run_for(fields):
            run = {}
            for tr in corpus:
                hits = retrieve_topk(index, compose_query(tr, fields), bm25, k=len(docs))
                run[tr.id] = [h.doc_id for h in hits]
            return run

        impact_mrr = mrr(run_for((CK.TROUBLE_DESCRIPTION, CK.IMPACT)), qrels)
        freq_mrr = mrr(run_for((CK.TROUBLE_DESCRIPTION, CK.FREQUENCY)), qrels)
        assert impact_mrr > freq_mrr


# ---------------------------------------------------------------------------
# make_splits
# ---------------------------------------------------------------------------

class TestMakeSplits:
    def test_sizes_and_disjointness(self, tiny_corpus):
        corpus, _ = tiny_corpus
        plan = make_splits(corpus, val_size=10, test_size=10, seed=1)
        assert len(plan.validation) == 10 and len(plan.test) == 10
        assert len(plan.train) == 10
        all_ids = set(plan.train) | set(plan.validation) | set(plan.test)
        assert len(all_ids) == 30

    def test_eval_members_have_all_criteria(self):
        corpus, _ = synth_corpus(SynthParams(n_trs=40, missing_criterion_rate=0.2), seed=9)
        by_id = {tr.id: tr for tr in corpus}
        plan = make_splits(corpus, val_size=4, test_size=4, seed=1)
        for tr_id in plan.validation + plan.test:
            assert by_id[tr_id].observation.has_all_criteria()

    def test_same_seed_reproduces_membership(self, tiny_corpus):
        corpus, _ = tiny_corpus
        a = make_splits(corpus, val_size=8, test_size=8, seed=5)
        b = make_splits(corpus, val_size=8, test_size=8, seed=5)
        assert (a.train, a.validation, a.test) == (b.train, b.validation, b.test)

    def test_seed_change_same_sizes_different_membership(self, tiny_corpus):
        corpus, _ = tiny_corpus
        a = make_splits(corpus, val_size=8, test_size=8, seed=5)
        b = make_splits(corpus, val_size=8, test_size=8, seed=6)
        assert len(b.validation) == 8 and len(b.test) == 8
        assert (a.validation, a.test) != (b.validation, b.test)

    def test_insufficient_full_criteria_trs(self, tiny_corpus):
        corpus, _ = tiny_corpus
        with pytest.raises(InsufficientFullCriteriaTRs):
            make_splits(corpus, val_size=20, test_size=20, seed=1)


# ---------------------------------------------------------------------------
# build_dataset
# ---------------------------------------------------------------------------

class TestBuildDataset:
    def test_one_to_one_pair_ratio(self, tiny_corpus):
        corpus, _ = tiny_corpus
        plan = make_splits(corpus, val_size=5, test_size=5, seed=1)
        pairs = build_dataset(corpus, _spec("HTI"), plan, seed=2)
        relevant = [p for p in pairs if p.label == "relevant"]
        irrelevant = [p for p in pairs if p.label == "irrelevant"]
        assert len(relevant) == len(irrelevant) == len(plan.train)

    def test_relevant_pairs_use_own_answer(self, tiny_corpus):
        corpus, _ = tiny_corpus
        by_id = {tr.id: tr for tr in corpus}
        plan = make_splits(corpus, val_size=5, test_size=5, seed=1)
        for pair in build_dataset(corpus, _spec("HTI"), plan, seed=2):
            own_answer = by_id[pair.source_tr].answer
            if pair.label == "relevant":
                assert pair.document == own_answer
            else:
                assert pair.document != own_answer

    def test_queries_contain_required_criterion_text(self, tiny_corpus):
        corpus, _ = tiny_corpus
        by_id = {tr.id: tr for tr in corpus}
        plan = make_splits(corpus, val_size=5, test_size=5, seed=1)
        for pair in build_dataset(corpus, _spec("HTC"), plan, seed=2):
            tr = by_id[pair.source_tr]
            assert tr.observation.get(CK.CONDITION) in pair.query
            assert pair.criterion_set == _spec("HTC").query_fields

    def test_baseline_shares_tr_ids_with_criterion_dataset(self, tiny_corpus):
        corpus, _ = tiny_corpus
        plan = make_splits(corpus, val_size=5, test_size=5, seed=1)
        crit = build_dataset(corpus, _spec("HTI"), plan, seed=2)
        base = build_dataset(corpus, _spec("HTI-baseline"), plan, seed=2)
        assert {p.source_tr for p in crit} == {p.source_tr for p in base}
        baseline_fields = _spec("HTI-baseline").query_fields
        assert CK.IMPACT not in baseline_fields

    def test_deterministic_and_serializable(self, tiny_corpus, tmp_path):
        corpus, _ = tiny_corpus
        plan = make_splits(corpus, val_size=5, test_size=5, seed=1)
        a = build_dataset(corpus, _spec("HTF"), plan, seed=7)
        b = build_dataset(corpus, _spec("HTF"), plan, seed=7)
        assert a == b
        path_a, path_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_pairs(path_a, a)
        save_pairs(path_b, b)
        assert path_a.read_bytes() == path_b.read_bytes()
        assert load_pairs(path_a) == a

    def test_empty_dataset_error(self):
        corpus, _ = synth_corpus(SynthParams(n_trs=10, missing_criterion_rate=0.0), seed=1)
        stripped = []
        for tr in corpus:
            criteria = {k: v for k, v in (
                (k, tr.observation.get(k)) for k in tr.observation.present()
            ) if k is not CK.REPRODUCIBILITY}
            from crest import parse_observation
            from crest.tr_core import render_observation

            obs = parse_observation(render_observation(criteria))
            stripped.append(TroubleReport(tr.id, tr.headline, obs, tr.answer))
        plan = make_splits(corpus, val_size=2, test_size=2, seed=1)
        with pytest.raises(EmptyDataset):
            build_dataset(stripped, _spec("HTR"), plan, seed=3)


# ---------------------------------------------------------------------------
# serialization round trips
# ---------------------------------------------------------------------------

class TestSerialization:
    def test_corpus_round_trip(self, tiny_corpus, tmp_path):
        corpus, _ = tiny_corpus
        path = tmp_path / "corpus.jsonl"
        save_corpus(path, corpus)
        loaded = load_corpus(path)
        assert corpus_digest(loaded) == corpus_digest(corpus)
        assert loaded[0].observation.present() == corpus[0].observation.present()

    def test_qrels_round_trip(self, tiny_corpus, tmp_path):
        _, qrels = tiny_corpus
        path = tmp_path / "qrels.txt"
        save_qrels(path, qrels)
        assert load_qrels(path) == qrels
