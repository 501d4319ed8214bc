"""
Parsing trouble reports into criteria
=====================================

A trouble report's observation is semi-structured text: labelled sections
("Trouble description:", "Impact on system:", ...) whose wording varies by
template.  This demo parses a few observations, inspects what was extracted,
and composes the per-criterion queries that retrieval runs on.
"""

from crest.tr_core import (
    CriterionKind,
    TroubleReport,
    build_query_bundle,
    parse_observation,
)

# ---------------------------------------------------------------------------
# A clean observation: every section present, canonical headers.
# ---------------------------------------------------------------------------

clean = """\
Trouble description:
Payment API returns HTTP 500 when the cart holds more than 40 items.

Impact on system:
Checkout is blocked for bulk orders; revenue-affecting.

Condition:
Only under the quarterly price-rule set, EU region.

Frequency:
Every attempt once the cart size passes 40.

Steps to reproduce:
Add 41 items to the cart and submit the order."""

observation = parse_observation(clean)
print("criteria found:", sorted(kind.value for kind in observation.present()))
print("impact text   :", observation.get(CriterionKind.IMPACT))
print("diagnostics   :", list(observation.diagnostics))
print()

# ---------------------------------------------------------------------------
# A messy observation: alternate header wording, two headers jammed onto one
# line, a duplicated header, and preamble text before the first header.  The
# parser never fails — it extracts what it can, keeps unattributed text in
# ``residue``, and reports each irregularity as a diagnostic.
# ---------------------------------------------------------------------------

messy = """\
Imported from the legacy tracker, ticket #4471.
Description:
Search results page renders blank after login.

System impact: search is unusable Condition: compact layout flag enabled

Frequency of occurrence:
Roughly one session in ten.

Frequency of occurrence:
Confirmed hourly on the staging cluster."""

observation = parse_observation(messy)
print("criteria found:", sorted(kind.value for kind in observation.present()))
print("residue       :", repr(observation.residue))
for diagnostic in observation.diagnostics:
    print(f"  diagnostic: {diagnostic}")
# Both halves of the merged line were recovered, and the duplicated
# frequency section was kept in full with its bodies joined:
print("condition text:", repr(observation.get(CriterionKind.CONDITION)))
print("frequency text:", repr(observation.get(CriterionKind.FREQUENCY)))
print()

# ---------------------------------------------------------------------------
# From observation to queries.  Retrieval issues one query per criterion:
# each is the headline plus the trouble description plus that criterion's
# text, so criterion-specific evidence rides on top of a shared core.
# ---------------------------------------------------------------------------

tr = TroubleReport(
    id="TR-DEMO-1",
    headline="payment api 500 on large carts",
    observation=parse_observation(clean),
    answer="raise the price-rule evaluation batch size",
)
bundle = build_query_bundle(tr)
print("base query      :", bundle.base)
for kind, query in bundle.per_criterion.items():
    print(f"{kind.value:20s}: {query}")
