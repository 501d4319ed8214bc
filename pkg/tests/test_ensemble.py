"""Weighted criterion aggregation and weight training."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from crest import (
    AllZeroWeights,
    CriterionKind,
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

CK = CriterionKind
FOUR = (CK.IMPACT, CK.CONDITION, CK.FREQUENCY, CK.REPRODUCIBILITY)


def _weights(values, stage="ir", architecture="bi"):
    mapping = dict(zip(FOUR, values))
    active = tuple(k for k in FOUR if k in mapping)
    return CriterionWeights(mapping, stage, architecture, active)


# ---------------------------------------------------------------------------
# aggregate
# ---------------------------------------------------------------------------

class TestAggregate:
    def test_equal_weights_single_hot_scores(self):
        w = _weights([0.25, 0.25, 0.25, 0.25])
        scores = {CK.IMPACT: 1.0, CK.CONDITION: 0.0, CK.FREQUENCY: 0.0, CK.REPRODUCIBILITY: 0.0}
        assert aggregate(scores, w) == pytest.approx(0.25)

    def test_single_active_criterion_passes_through(self):
        for weight in (0.1, 0.5, 1.0):
            w = CriterionWeights({CK.CONDITION: weight}, "ir", "bi", (CK.CONDITION,))
            assert aggregate({CK.CONDITION: 0.73}, w) == pytest.approx(0.73)

    def test_degenerate_one_hot_weights_match_single_criterion_ranking(self):
        rng = np.random.default_rng(0)
        pool = {k: rng.random(20) for k in FOUR}
        one_hot = _weights([1.0, 0.0, 0.0, 0.0])
        agg, normalized = aggregate_pool(pool, one_hot)
        assert np.array_equal(np.argsort(-agg), np.argsort(-normalized[CK.IMPACT]))

    def test_invariant_under_weight_rescaling(self):
        rng = np.random.default_rng(1)
        pool = {k: rng.random(15) for k in FOUR}
        w1 = _weights([0.8, 0.4, 0.2, 0.6])
        w2 = _weights([0.4, 0.2, 0.1, 0.3])
        agg1, _ = aggregate_pool(pool, w1)
        agg2, _ = aggregate_pool(pool, w2)
        assert np.allclose(agg1, agg2)

    def test_missing_criteria_renormalize_over_active(self):
        w = _weights([0.5, 0.5, 0.5, 0.5])
        partial = {CK.IMPACT: 0.9, CK.CONDITION: 0.1}
        value = aggregate(partial, w, active=(CK.IMPACT, CK.CONDITION))
        assert value == pytest.approx(0.5)

    def test_no_active_criteria_error(self):
        w = _weights([0.25] * 4)
        with pytest.raises(NoActiveCriteria):
            aggregate({}, w, active=())

    def test_all_zero_weights_error(self):
        w = _weights([0.0, 0.0, 0.0, 0.0])
        with pytest.raises(AllZeroWeights):
            aggregate({k: 0.5 for k in FOUR}, w)

    def test_aggregate_bounded_by_normalized_scores(self):
        rng = np.random.default_rng(2)
        for _ in range(20)        :
            pool = {k: rng.random(10) for k in FOUR}
            w = _weights(rng.random(4) + 1e-3)
            agg, normalized = aggregate_pool(pool, w)
            assert np.all(agg >= -1e-12) and np.all(agg <= 1 + 1e-12)


class TestMinMaxNormalize:
    def test_spreads_to_unit_interval(self):
        out = minmax_normalize(np.array([1.0, 2.0, 4.0]))
        assert out == pytest.approx([0.0, 1 / 3, 1.0])

    def test_constant_column_maps_to_zeros(self):
        assert np.array_equal(minmax_normalize(np.array([3.0, 3.0, 3.0])), np.zeros(3))

    def test_order_preserving(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=30)
        out = minmax_normalize(x)
        assert np.array_equal(np.argsort(x), np.argsort(out))


# ---------------------------------------------------------------------------
# breakdowns
# ---------------------------------------------------------------------------

class TestScoreBreakdown:
    def test_recomputation_matches_stored_aggregate(self):
        rng = np.random.default_rng(4)
        doc_ids = [f"D{i}" for i in range(12)]
        pool = {k: rng.random(12) for k in FOUR}
        w = _weights([0.6, 0.2, 0.15, 0.05])
        breakdowns = breakdown_pool(doc_ids, pool, w, scorer_id="bi")
        assert len(breakdowns) == 12
        for b in breakdowns:
            normalized = {k: rs.value for k, rs in b.scores.items()}
            assert b.aggregated == pytest.approx(
                aggregate(normalized, w, active=tuple(b.scores)), abs=1e-12
            )

    def test_breakdown_keeps_raw_scores(self):
        pool = {k: np.array([0.5, 1.5]) for k in FOUR}
        w = _weights([0.25] * 4)
        b = breakdown_pool(["a", "b"], pool, w, scorer_id="bi")[0]
        assert set(b.raw) == set(FOUR)
        assert b.raw[CK.IMPACT] == 0.5


# ---------------------------------------------------------------------------
# ablate / include
# ---------------------------------------------------------------------------

class TestAblate:
    def test_exclusion_shrinks_active_set(self):
        w = _weights([0.4, 0.3, 0.2, 0.1])
        without = w.ablate(CK.REPRODUCIBILITY)
        assert CK.REPRODUCIBILITY not in without.active
        assert set(without.active) == {CK.IMPACT, CK.CONDITION, CK.FREQUENCY}

    def test_exclude_then_include_restores_active_set(self):
        w = _weights([0.4, 0.3, 0.2, 0.1])
        restored = w.ablate(CK.CONDITION).include(CK.CONDITION)
        assert restored.active == w.active
        assert restored.values == w.values

    def test_cannot_empty_the_ensemble(self):
        w = CriterionWeights({CK.IMPACT: 1.0}, "ir", "bi", (CK.IMPACT,))
        with pytest.raises(LastCriterion):
            w.ablate(CK.IMPACT)

    def test_ablated_aggregation_renormalizes(self):
        rng = np.random.default_rng(5)
        pool = {k: rng.random(8) for k in FOUR}
        without = _weights([0.4, 0.3, 0.2, 0.1]).ablate(CK.IMPACT)
        agg, _ = aggregate_pool(pool, without)
        expected_pool = {k: pool[k] for k in FOUR if k is not CK.IMPACT}
        expected, _ = aggregate_pool(
            expected_pool, _weights([0.4, 0.3, 0.2, 0.1]), active=without.active
        )
        assert np.allclose(agg, expected)


# ---------------------------------------------------------------------------
# monotonicity
# ---------------------------------------------------------------------------

class TestMonotonicity:
    def test_raising_a_weight_never_demotes_that_criterions_best_doc(self):
        rng = np.random.default_rng(6)
        for trial in range(30):
            n = int(rng.integers(3, 9))
            pool = {k: rng.random(n) for k in FOUR}
            base_values = rng.random(4) * 0.5 + 0.1
            for boost_idx, kind in enumerate(FOUR):
                low = _weights(base_values)
                boosted_values = base_values.copy()
                boosted_values[boost_idx] = min(1.0, boosted_values[boost_idx] + 0.4)
                high = _weights(boosted_values)
                agg_low, normalized = aggregate_pool(pool, low)
                agg_high, _ = aggregate_pool(pool, high)
                best_doc = int(np.argmax(normalized[kind]))
                rank_low = int((np.argsort(-agg_low, kind="stable") == best_doc).argmax())
                rank_high = int((np.argsort(-agg_high, kind="stable") == best_doc).argmax())
                assert rank_high <= rank_low


# ---------------------------------------------------------------------------
# train_weights
# ---------------------------------------------------------------------------

def _pools_from_planted(planted, n_queries=30, n_docs=12, noise=0.01, seed=0):
    """Score pools whose relevant document is the argmax of the planted-weight
    aggregation, so recovering the ranking requires recovering the weights."""
    rng = np.random.default_rng(seed)
    planted_arr = np.asarray(planted, dtype=float)
    pools = []
    for q in range(n_queries):
        doc_ids = tuple(f"D{q}_{i}" for i in range(n_docs))
        columns = {k: minmax_normalize(rng.random(n_docs)) for k in FOUR}
        agg = sum(w * columns[k] for w, k in zip(planted_arr, FOUR))
        relevant_idx = int(np.argmax(agg))
        scores = {k: columns[k] + rng.normal(0.0, noise, n_docs) for k in FOUR}
        pools.append(
            ValidationQuery(
                query_id=f"Q{q}",
                doc_ids=doc_ids,
                criterion_scores=scores,
                relevant=frozenset({doc_ids[relevant_idx]}),
                active=FOUR,
            )
        )
    return pools


class TestTrainWeights:
    def test_projection_keeps_weights_in_unit_interval(self):
        pools = _pools_from_planted([0.7, 0.2, 0.05, 0.05], seed=1)
        weights, report = train_weights(
            pools, "ir", "bi", WeightTrainConfig(margin=0.3, learning_rate=0.5, epochs=25, seed=2)
        )
        for value in weights.values.values():
            assert 0.0 <= value <= 1.0
        assert weights.stage == "ir" and weights.architecture == "bi"
        # epoch_mrrs additionally records the initial (uniform) checkpoint
        assert len(report.epoch_mrrs) == len(report.epoch_losses) + 1

    def test_selection_by_validation_mrr(self):
        pools = _pools_from_planted([0.6, 0.2, 0.1, 0.1], seed=3)
        weights, report = train_weights(
            pools, "rr", "cross", WeightTrainConfig(margin=0.3, learning_rate=0.3, epochs=20, seed=4)
        )
        assert report.epoch_mrrs[report.best_epoch] == max(report.epoch_mrrs)
        assert weights.validation_mrr == pytest.approx(max(report.epoch_mrrs))

    def test_zero_gradient_when_margin_already_satisfied(self):
        # Relevant doc beats every negative by ≥ 1 on every criterion, so the
        # uniform initialization already satisfies a small margin everywhere.
        pools = []
        for q in range(5):
            doc_ids = tuple(f"D{q}_{i}" for i in range(6))
            scores = {k: np.array([5.0, 0.1, 0.2, 0.05, 0.15, 0.1]) for k in FOUR}
            pools.append(
                ValidationQuery(
                    query_id=f"Q{q}",
                    doc_ids=doc_ids,
                    criterion_scores=scores,
                    relevant=frozenset({doc_ids[0]}),
                    active=FOUR,
                )
            )
        weights, report = train_weights(
            pools, "ir", "bi", WeightTrainConfig(margin=0.1, learning_rate=0.5, epochs=5, seed=5)
        )
        uniform = CriterionWeights.uniform("ir", "bi")
        for kind in FOUR:
            assert weights.weight(kind) == pytest.approx(uniform.weight(kind))
        assert report.epoch_losses == [0.0] * 5

    def test_pure_signal_criterion_gets_max_weight(self):
        planted = [0.0, 0.9, 0.0, 0.0]  # condition carries all signal
        pools = _pools_from_planted(planted, n_queries=40, noise=0.05, seed=6)
        weights, _ = train_weights(
            pools, "ir", "bi", WeightTrainConfig(margin=0.3, learning_rate=0.4, epochs=40, seed=7)
        )
        learned = [weights.weight(k) for k in FOUR]
        assert int(np.argmax(learned)) == 1

    def test_determinism(self):
        pools = _pools_from_planted([0.5, 0.3, 0.1, 0.1], seed=8)
        config = WeightTrainConfig(margin=0.3, learning_rate=0.4, epochs=15, seed=9)
        w1, _ = train_weights(pools, "ir", "bi", config)
        w2, _ = train_weights(pools, "ir", "bi", config)
        assert w1.values == w2.values

    def test_empty_pools_rejected(self):
        with pytest.raises(InsufficientValidationData):
            train_weights([], "ir", "bi", WeightTrainConfig())


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

class TestWeightPersistence:
    def test_save_load_round_trip(self, tmp_path):
        w = CriterionWeights(
            dict(zip(FOUR, [0.4, 0.3, 0.2, 0.1])),
            "rr",
            "cross",
            FOUR,
            seed=13,
            validation_mrr=0.91,
        )
        path = tmp_path / "weights.json"
        w.save(path)
        loaded = CriterionWeights.load(path)
        assert loaded.values == w.values
        assert loaded.stage == "rr" and loaded.architecture == "cross"
        assert loaded.seed == 13
        assert loaded.validation_mrr == pytest.approx(0.91)
        assert loaded.active == w.active
