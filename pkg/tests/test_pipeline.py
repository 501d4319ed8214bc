"""Two-stage orchestration: degeneracies, candidate containment, determinism."""
from __future__ import annotations

import numpy as np
import pytest

from crest import (
    ConfigInvalid,
    CriterionKind,
    PipelineConfig,
    batch_run,
    build_query_bundle,
    retrieve_topk,
    run_isolated_rr,
    run_two_stage,
)
from crest.pipeline import load_breakdowns, save_breakdowns

CK = CriterionKind


@pytest.fixture(scope="module")
def queries(small_art):
    by_id = small_art.by_id
    return {tr_id: build_query_bundle(by_id[tr_id]) for tr_id in small_art.split.test[:6]}


class TestDegeneracies:
    def test_k_equals_corpus_size_matches_isolated_rr(self, small_art, queries):
        config = PipelineConfig(k=len(small_art.index))
        for bundle in queries.values():
            two_stage = run_two_stage(bundle, small_art.index, small_art.models, config)
            isolated = run_isolated_rr(bundle, small_art.index, small_art.models, config)
            assert [b.doc_id for b in two_stage] == [b.doc_id for b in isolated]
            for a, b in zip(two_stage, isolated):
                assert a.aggregated == pytest.approx(b.aggregated, abs=1e-12)

    def test_ensemble_off_equals_hand_rolled_single_pipeline(self, small_art, queries):
        config = PipelineConfig(k=20, ir_ensemble=False, rr_ensemble=False)
        for bundle in queries.values():
            got = run_two_stage(bundle, small_art.index, small_art.models, config)

            hits = retrieve_topk(
                small_art.index, bundle.base, small_art.models.ir.base_scorer, k=20
            )
            rescored = [
                (small_art.models.rr.base_scorer.score(
                    bundle.base, small_art.index.text_of(c.doc_id)
                ).value, c.doc_id)
                for c in hits
            ]
            expected = [d for s, d in sorted(rescored, key=lambda t: (-t[0], t[1]))]
            assert [b.doc_id for b in got] == expected

    def test_base_mode_breakdowns_have_no_criterion_scores(self, small_art, queries):
        config = PipelineConfig(k=10, ir_ensemble=False, rr_ensemble=False)
        bundle = next(iter(queries.values()))
        for b in run_two_stage(bundle, small_art.index, small_art.models, config):
            assert b.scores == {} and b.raw == {}

    def test_rr_none_returns_ir_stage_ranking(self, small_art, queries):
        config = PipelineConfig(k=15, rr_scorer="none")
        bundle = next(iter(queries.values()))
        result = run_two_stage(bundle, small_art.index, small_art.models, config)
        assert len(result) == 15
        ir_scorers = set(small_art.models.ir.criterion_scorers)
        for b in result:
            assert set(b.scores) <= ir_scorers


class TestCandidateContainment:
    def test_rr_never_introduces_new_documents(self, small_art, queries):
        config = PipelineConfig(k=12, ir_ensemble=False, rr_ensemble=True)
        for bundle in queries.values():
            ir_hits = retrieve_topk(
                small_art.index, bundle.base, small_art.models.ir.base_scorer, k=12
            )
            allowed = {c.doc_id for c in ir_hits}
            result = run_two_stage(bundle, small_art.index, small_art.models, config)
            assert {b.doc_id for b in result} == allowed

    def test_output_no_longer_than_k(self, small_art, queries):
        config = PipelineConfig(k=7)
        bundle = next(iter(queries.values()))
        result = run_two_stage(bundle, small_art.index, small_art.models, config)
        assert len(result) == 7


class TestDeterminismAndOrdering:
    def test_identical_inputs_identical_rankings(self, small_art, queries):
        config = PipelineConfig(k=25)
        run1, breakdowns1 = batch_run(queries, small_art.index, small_art.models, config)
        run2, breakdowns2 = batch_run(queries, small_art.index, small_art.models, config)
        assert run1 == run2
        for qid in breakdowns1:
            assert [b.doc_id for b in breakdowns1[qid]] == [
                b.doc_id for b in breakdowns2[qid]
            ]

    def test_scores_sorted_with_doc_id_tie_break(self, small_art, queries):
        config = PipelineConfig(k=30)
        run, _ = batch_run(queries, small_art.index, small_art.models, config)
        for ranking in run.values():
            for (d1, s1), (d2, s2) in zip(ranking, ranking[1:]):
                assert s1 > s2 or (s1 == s2 and d1 < d2)

    def test_active_subset_restricts_breakdowns(self, small_art, queries):
        config = PipelineConfig(k=10, active=(CK.IMPACT, CK.CONDITION))
        bundle = next(iter(queries.values()))
        result = run_two_stage(bundle, small_art.index, small_art.models, config)
        for b in result:
            assert set(b.scores) <= {CK.IMPACT, CK.CONDITION}


class TestConfigValidation:
    def test_k_must_be_positive(self):
        with pytest.raises(ConfigInvalid):
            PipelineConfig(k=0)

    def test_unknown_scorer_names_rejected(self):
        with pytest.raises(ConfigInvalid):
            PipelineConfig(ir_scorer="neural")
        with pytest.raises(ConfigInvalid):
            PipelineConfig(rr_scorer="neural")

    def test_to_json_round_trips_fields(self):
        config = PipelineConfig(k=42, active=(CK.IMPACT,), cross_budget=64)
        payload = config.to_json()
        assert payload["k"] == 42
        assert payload["active"] == ["impact"]
        assert payload["cross_budget"] == 64


class TestBreakdownSidecars:
    def test_round_trip_preserves_ranks_and_scores(self, small_art, queries, tmp_path):
        config = PipelineConfig(k=10)
        _, breakdowns = batch_run(queries, small_art.index, small_art.models, config)
        path = tmp_path / "breakdowns.jsonl"
        save_breakdowns(path, breakdowns)
        loaded = load_breakdowns(path)
        assert set(loaded) == set(breakdowns)
        for qid, rows in loaded.items():
            originals = breakdowns[qid]
            assert [r["doc_id"] for r in rows] == [b.doc_id for b in originals]
            assert [r["rank"] for r in rows] == list(range(1, len(originals) + 1))
            for row, b in zip(rows, originals):
                assert row["aggregated"] == pytest.approx(b.aggregated, abs=1e-12)
                assert set(row["scores"]) == {c.value for c in b.scores}
