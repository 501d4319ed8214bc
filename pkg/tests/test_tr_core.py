"""Parser, preprocessing, and query-bundle behavior."""
from __future__ import annotations

import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crest import (
    CRITERION_ORDER,
    CriterionKind,
    MissingTroubleDescription,
    Observation,
    QueryBundle,
    TroubleReport,
    build_query_bundle,
    compose_query,
    parse_observation,
    preprocess,
)
from crest.tr_core import DEFAULT_TEMPLATE, FIELD_SEP, render_observation

CK = CriterionKind


def _tr(criteria, headline="Node restarts unexpectedly", tr_id="TR-1"):
    obs = parse_observation(render_observation(criteria))
    return TroubleReport(id=tr_id, headline=headline, observation=obs, answer="fix applied")


# ---------------------------------------------------------------------------
# parse_observation
# ---------------------------------------------------------------------------

class TestParseObservation:
    def test_full_template_extracts_all_fields(self):
        criteria = {
            CK.TROUBLE_DESCRIPTION: "link flaps on port 7",
            CK.IMPACT: "traffic loss on all bearers",
            CK.CONDITION: "only under high load",
            CK.FREQUENCY: "three times per day",
            CK.REPRODUCIBILITY: "start load generator at 80 percent",
        }
        obs = parse_observation(render_observation(criteria))
        assert obs.present() == set(criteria)
        for kind, text in criteria.items():
            assert obs.get(kind) == text
        assert obs.has_all_criteria()
        assert obs.residue == ""

    def test_empty_text_yields_empty_observation_diagnostic(self):
        obs = parse_observation("")
        assert obs.present() == set()
        assert [d.kind for d in obs.diagnostics] == ["empty_observation"]

    def test_header_without_body_flags_empty_field(self):
        obs = parse_observation("Trouble description: desc\nImpact:\nCondition: cold start")
        assert CK.IMPACT not in obs.present()
        assert obs.get(CK.CONDITION) == "cold start"
        assert ("empty_field", CK.IMPACT) in [(d.kind, d.criterion) for d in obs.diagnostics]

    def test_headers_match_case_insensitively(self):
        obs = parse_observation("TROUBLE DESCRIPTION: shouty\nIMPACT ON SYSTEM: caps impact")
        assert obs.get(CK.TROUBLE_DESCRIPTION) == "shouty"
        assert obs.get(CK.IMPACT) == "caps impact"

    def test_alias_headers_map_to_same_criterion(self):
        obs = parse_observation("Description: via alias\nSystem impact: degraded\nSteps to reproduce: run it")
        assert obs.get(CK.TROUBLE_DESCRIPTION) == "via alias"
        assert obs.get(CK.IMPACT) == "degraded"
        assert obs.get(CK.REPRODUCIBILITY) == "run it"

    def test_preamble_folds_into_trouble_description(self):
        obs = parse_observation("free text before any header\nImpact: minor")
        assert obs.get(CK.TROUBLE_DESCRIPTION) == "free text before any header"
        assert "residue_folded" in [d.kind for d in obs.diagnostics]

    def test_two_headers_on_one_line_are_split(self):
        obs = parse_observation("Trouble description: a\nImpact: x Condition: y")
        assert obs.get(CK.IMPACT) == "x"
        assert obs.get(CK.CONDITION) == "y"
        assert ("merged_fields", CK.IMPACT) in [(d.kind, d.criterion) for d in obs.diagnostics]

    def test_duplicate_header_bodies_join_with_diagnostic(self):
        obs = parse_observation("Trouble description: a\nImpact: one\nImpact: two")
        assert obs.get(CK.IMPACT) == "one\ntwo"
        assert "duplicate_header" in [d.kind for d in obs.diagnostics]

    def test_headers_only_never_raises(self):
        obs = parse_observation("Impact:\nCondition:\nFrequency:")
        assert obs.present() == set()
        kinds = {d.kind for d in obs.diagnostics}
        assert "empty_field" in kinds

    def test_present_texts_are_trimmed_nonempty(self):
        obs = parse_observation("Trouble description:   padded   \nImpact:  x  ")
        for kind in obs.present():
            text = obs.get(kind)
            assert text == text.strip() and text


_body = st.text(
    alphabet=string.ascii_lowercase + string.digits + " ",
    min_size=1,
    max_size=60,
).filter(lambda s: s.strip())

_criteria_maps = st.dictionaries(
    st.sampled_from(list(CRITERION_ORDER)),
    _body,
    min_size=1,
    max_size=5,
)


class TestParserProperties:
    @given(_criteria_maps)
    @settings(max_examples=150, deadline=None)
    def test_render_parse_round_trip(self, criteria):
        parsed = parse_observation(render_observation(criteria))
        assert parsed.present() == set(criteria)
        for kind, text in criteria.items():
            assert parsed.get(kind) == text.strip()

    @given(_criteria_maps)
    @settings(max_examples=100, deadline=None)
    def test_partition_preserves_non_header_characters(self, criteria):
        raw = render_observation(criteria)
        parsed = parse_observation(raw)
        recovered = "".join(sorted(
            ch for kind in parsed.present() for ch in parsed.get(kind) if not ch.isspace()
        ))
        recovered += "".join(sorted(ch for ch in parsed.residue if not ch.isspace()))
        headers_removed = raw
        for aliases in DEFAULT_TEMPLATE.aliases.values():
            for alias in aliases:
                headers_removed = headers_removed.replace(alias, "")
        expected = "".join(sorted(ch for ch in headers_removed if not ch.isspace()))
        assert "".join(sorted(recovered)) == expected

    @given(st.text(max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_arbitrary_text_never_crashes(self, raw):
        obs = parse_observation(raw)
        assert isinstance(obs, Observation)
        assert obs.raw == raw


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

class TestPreprocess:
    def test_tokenizes_and_keeps_version_strings(self):
        assert preprocess("Node RESTARTS after v2.1.3 upgrade") == [
            "node", "restarts", "after", "v2.1.3", "upgrade",
        ]

    def test_empty_and_whitespace_inputs(self):
        assert preprocess("") == []
        assert preprocess("   \n\t ") == []

    def test_splits_on_punctuation_and_underscores(self):
        assert preprocess("Error-Code_17!") == ["error", "code", "17"]

    @given(st.text(max_size=300))
    @settings(max_examples=200, deadline=None)
    def test_pure_and_deterministic(self, text):
        first = preprocess(text)
        assert preprocess(text) == first
        for token in first:
            assert token == token.lower()
            assert token


# ---------------------------------------------------------------------------
# query bundles
# ---------------------------------------------------------------------------

class TestQueryBundle:
    FULL = {
        CK.TROUBLE_DESCRIPTION: "crash on reboot",
        CK.IMPACT: "cell down",
        CK.CONDITION: "after upgrade",
        CK.FREQUENCY: "daily",
        CK.REPRODUCIBILITY: "reboot twice",
    }

    def test_all_criteria_active_yields_four_queries(self):
        bundle = build_query_bundle(_tr(self.FULL))
        assert bundle.base == "Node restarts unexpectedly" + FIELD_SEP + "crash on reboot"
        assert set(bundle.active) == {CK.IMPACT, CK.CONDITION, CK.FREQUENCY, CK.REPRODUCIBILITY}
        assert len(bundle.per_criterion) == 4
        for kind, query in bundle.per_criterion.items():
            assert query.startswith(bundle.base + FIELD_SEP)
            assert query == bundle.base + FIELD_SEP + self.FULL[kind]

    def test_active_intersects_with_present(self):
        criteria = {k: v for k, v in self.FULL.items() if k is not CK.FREQUENCY}
        bundle = build_query_bundle(_tr(criteria), active=[CK.FREQUENCY, CK.IMPACT])
        assert bundle.active == (CK.IMPACT,)
        assert set(bundle.per_criterion) == {CK.IMPACT}

    def test_empty_active_gives_base_only_bundle(self):
        bundle = build_query_bundle(_tr(self.FULL), active=[])
        assert bundle.active == ()
        assert bundle.per_criterion == {}
        assert bundle.base

    def test_active_is_in_canonical_order(self):
        bundle = build_query_bundle(
            _tr(self.FULL), active=[CK.REPRODUCIBILITY, CK.IMPACT, CK.CONDITION]
        )
        assert bundle.active == (CK.IMPACT, CK.CONDITION, CK.REPRODUCIBILITY)

    def test_missing_description_and_headline_rejected(self):
        obs = parse_observation("Impact: only impact")
        tr = TroubleReport(id="TR-2", headline="", observation=obs, answer="a")
        with pytest.raises(MissingTroubleDescription):
            build_query_bundle(tr)

    def test_headline_alone_is_sufficient(self):
        obs = parse_observation("Impact: only impact")
        tr = TroubleReport(id="TR-3", headline="headline only", observation=obs, answer="a")
        bundle = build_query_bundle(tr)
        assert bundle.base == "headline only"
        assert bundle.per_criterion[CK.IMPACT] == "headline only" + FIELD_SEP + "only impact"

    def test_compose_query_selected_fields(self):
        tr = _tr(self.FULL)
        assert compose_query(tr, [CK.TROUBLE_DESCRIPTION, CK.IMPACT]) == (
            "Node restarts unexpectedly" + FIELD_SEP + "crash on reboot" + FIELD_SEP + "cell down"
        )

    def test_compose_query_none_uses_whole_observation(self):
        tr = _tr(self.FULL)
        query = compose_query(tr, None)
        for text in self.FULL.values():
            assert text in query
