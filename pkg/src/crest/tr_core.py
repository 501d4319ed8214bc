"""Trouble-report data model and observation-template parsing.

A trouble report (TR) couples a short headline with a free-text observation
and the accepted answer that resolved it.  Observations follow an
organization-wide template: named headers ("Impact on system:", "Frequency:",
...) introduce the individual criteria.  This module parses that template
into structured criteria, renders it back canonically, and builds the
per-criterion query texts consumed by the retrieval stages.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple


class CriterionKind(Enum):
    """The five named sub-fields of a TR observation."""

    TROUBLE_DESCRIPTION = "trouble_description"
    IMPACT = "impact"
    CONDITION = "condition"
    FREQUENCY = "frequency"
    REPRODUCIBILITY = "reproducibility"

    @classmethod
    def from_name(cls, name: str) -> "CriterionKind":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        for kind in cls:
            if kind.value == key or kind.name.lower() == key:
                return kind
        raise ValueError(f"unknown criterion: {name!r}")


#: Canonical ordering used by the renderer and by query composition.
CRITERION_ORDER: Tuple[CriterionKind, ...] = (
    CriterionKind.TROUBLE_DESCRIPTION,
    CriterionKind.IMPACT,
    CriterionKind.CONDITION,
    CriterionKind.FREQUENCY,
    CriterionKind.REPRODUCIBILITY,
)

#: Criteria that get their own specialized query (trouble description is part
#: of every query base instead).
AUXILIARY_CRITERIA: Tuple[CriterionKind, ...] = (
    CriterionKind.IMPACT,
    CriterionKind.CONDITION,
    CriterionKind.FREQUENCY,
    CriterionKind.REPRODUCIBILITY,
)

#: Separator inserted between concatenated query fields: one space plus a
#: delimiter token, keeping fields apart without exotic markup.
FIELD_SEP = " | "


class MissingTroubleDescription(ValueError):
    """Raised when a TR has neither a headline nor a trouble description."""


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal parsing finding (the parser itself never fails)."""

    kind: str  # empty_observation | empty_field | merged_fields | duplicate_header | residue_folded
    criterion: Optional[CriterionKind] = None
    detail: str = ""

    def __str__(self) -> str:
        crit = f" {self.criterion.value}" if self.criterion else ""
        extra = f" ({self.detail})" if self.detail else ""
        return f"{self.kind}{crit}{extra}"


@dataclass(frozen=True)
class TemplateSpec:
    """Per-criterion header aliases, matched case-insensitively.

    Aliases include their trailing colon.  The first alias of each criterion
    is the canonical header used when rendering.  The table ships as data so
    deployments can adapt it to their local template wording.
    """

    aliases: Mapping[CriterionKind, Tuple[str, ...]]

    def __post_init__(self) -> None:
        for kind, names in self.aliases.items():
            if not names:
                raise ValueError(f"no header aliases for {kind}")
            for name in names:
                if not name.strip():
                    raise ValueError(f"blank alias for {kind}")

    def canonical_header(self, kind: CriterionKind) -> str:
        return self.aliases[kind][0]

    def to_json(self) -> str:
        payload = {kind.value: list(names) for kind, names in self.aliases.items()}
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TemplateSpec":
        raw = json.loads(text)
        aliases = {
            CriterionKind.from_name(name): tuple(values) for name, values in raw.items()
        }
        return cls(aliases=aliases)

    @classmethod
    def load(cls, path: str | Path) -> "TemplateSpec":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


DEFAULT_TEMPLATE = TemplateSpec(
    aliases={
        CriterionKind.TROUBLE_DESCRIPTION: ("Trouble description:", "Description:"),
        CriterionKind.IMPACT: ("Impact on system:", "System impact:", "Impact:"),
        CriterionKind.CONDITION: ("Condition:", "Conditions:"),
        CriterionKind.FREQUENCY: ("Frequency:", "Frequency of occurrence:"),
        CriterionKind.REPRODUCIBILITY: (
            "Steps to reproduce:",
            "Reproducibility:",
            "How to reproduce:",
        ),
    }
)


@dataclass(frozen=True)
class Observation:
    """A parsed observation: criteria texts plus whatever did not match.

    ``residue`` holds text outside any header span that was not folded into
    the trouble description; together the criteria bodies and residue contain
    every non-header character of ``raw``.
    """

    raw: str
    criteria: Mapping[CriterionKind, str] = field(default_factory=dict)
    residue: str = ""
    diagnostics: Tuple[Diagnostic, ...] = ()

    def get(self, kind: CriterionKind) -> Optional[str]:
        return self.criteria.get(kind)

    def present(self) -> Set[CriterionKind]:
        return set(self.criteria)

    def has_all_criteria(self) -> bool:
        return len(self.criteria) == len(CriterionKind)


@dataclass(frozen=True)
class TroubleReport:
    """One corpus record: identifier, headline, observation, accepted answer."""

    id: str
    headline: str
    observation: Observation
    answer: str
    metadata: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class QueryBundle:
    """Query texts derived from one TR.

    ``base`` joins headline and trouble description; each per-criterion query
    appends that criterion's text to the base, so every specialized query
    carries the shared context as a prefix.
    """

    base: str
    per_criterion: Mapping[CriterionKind, str]
    active: Tuple[CriterionKind, ...]  # canonical order


@dataclass(frozen=True)
class HeaderMatch:
    criterion: CriterionKind
    start: int
    end: int


def _compile_header_pattern(
    template: TemplateSpec,
) -> Tuple[re.Pattern, Dict[str, CriterionKind]]:
    entries: List[Tuple[str, CriterionKind]] = []
    for kind, names in template.aliases.items():
        for name in names:
            entries.append((name, kind))
    # Longest aliases first so "Impact on system:" wins over "Impact:".
    entries.sort(key=lambda item: len(item[0]), reverse=True)
    parts = [f"(?P<h{i}>{re.escape(name)})" for i, (name, _) in enumerate(entries)]
    pattern = re.compile(
        r"(?<![A-Za-z0-9])(?:" + "|".join(parts) + ")", re.IGNORECASE
    )
    lookup = {f"h{i}": kind for i, (_, kind) in enumerate(entries)}
    return pattern, lookup


def find_header_spans(raw: str, template: TemplateSpec = DEFAULT_TEMPLATE) -> List[HeaderMatch]:
    """Locate every template header in ``raw``, left to right."""

    pattern, lookup = _compile_header_pattern(template)
    spans = []
    for m in pattern.finditer(raw):
        group = next(name for name, value in m.groupdict().items() if value is not None)
        spans.append(HeaderMatch(criterion=lookup[group], start=m.start(), end=m.end()))
    return spans


def parse_observation(raw: str, template: TemplateSpec = DEFAULT_TEMPLATE) -> Observation:
    """Split an observation into criteria by its template headers.

    Each criterion receives the text between its header and the next header
    (or end of text).  Text before the first header becomes the trouble
    description when no explicit trouble-description header exists, and
    residue otherwise.  Never raises: malformed inputs are reported through
    the diagnostics list.
    """

    diagnostics: List[Diagnostic] = []
    if not raw.strip():
        diagnostics.append(Diagnostic(kind="empty_observation"))
        return Observation(raw=raw, criteria={}, residue="", diagnostics=tuple(diagnostics))

    spans = find_header_spans(raw, template)
    criteria: Dict[CriterionKind, str] = {}

    leading = raw[: spans[0].start] if spans else raw
    residue = ""

    for i, span in enumerate(spans):
        end = spans[i + 1].start if i + 1 < len(spans) else len(raw)
        body = raw[span.end : end].strip()
        if i + 1 < len(spans):
            between = raw[span.end : spans[i + 1].start]
            if "\n" not in between:
                diagnostics.append(
                    Diagnostic(
                        kind="merged_fields",
                        criterion=span.criterion,
                        detail=f"followed by {spans[i + 1].criterion.value} on the same line",
                    )
                )
        if not body:
            diagnostics.append(Diagnostic(kind="empty_field", criterion=span.criterion))
            continue
        if span.criterion in criteria:
            diagnostics.append(Diagnostic(kind="duplicate_header", criterion=span.criterion))
            criteria[span.criterion] = criteria[span.criterion] + "\n" + body
        else:
            criteria[span.criterion] = body

    leading = leading.strip()
    if leading:
        if CriterionKind.TROUBLE_DESCRIPTION not in criteria:
            criteria[CriterionKind.TROUBLE_DESCRIPTION] = leading
            if spans:
                diagnostics.append(
                    Diagnostic(
                        kind="residue_folded",
                        criterion=CriterionKind.TROUBLE_DESCRIPTION,
                        detail="text before first header",
                    )
                )
        else:
            residue = leading

    return Observation(
        raw=raw, criteria=criteria, residue=residue, diagnostics=tuple(diagnostics)
    )


def render_observation(
    criteria: Mapping[CriterionKind, str], template: TemplateSpec = DEFAULT_TEMPLATE
) -> str:
    """Render criteria through the canonical template (inverse of the parser)."""

    blocks = []
    for kind in CRITERION_ORDER:
        if kind in criteria:
            blocks.append(f"{template.canonical_header(kind)}\n{criteria[kind].strip()}")
    return "\n\n".join(blocks)


def build_query_bundle(
    tr: TroubleReport, active: Optional[Iterable[CriterionKind]] = None
) -> QueryBundle:
    """Compose the base query and one query per requested, present criterion.

    ``active=None`` requests every auxiliary criterion.  Criteria requested
    but absent from the observation are silently dropped: the effective
    active set is the intersection with what the parser found.
    """

    headline = tr.headline.strip()
    trouble = (tr.observation.get(CriterionKind.TROUBLE_DESCRIPTION) or "").strip()
    if not headline and not trouble:
        raise MissingTroubleDescription(
            f"TR {tr.id}: neither headline nor trouble description available"
        )
    if headline and trouble:
        base = headline + FIELD_SEP + trouble
    else:
        base = headline or trouble

    requested = set(AUXILIARY_CRITERIA) if active is None else set(active)
    effective = tuple(
        kind
        for kind in CRITERION_ORDER
        if kind in requested
        and kind in tr.observation.criteria
        and kind != CriterionKind.TROUBLE_DESCRIPTION
    )
    per_criterion = {
        kind: base + FIELD_SEP + tr.observation.criteria[kind].strip()
        for kind in effective
    }
    return QueryBundle(base=base, per_criterion=per_criterion, active=effective)


def compose_query(tr: TroubleReport, fields: Optional[Sequence[CriterionKind]]) -> str:
    """Join headline and the given criterion texts into one query string.

    ``fields=None`` means criterion-agnostic: use every criterion present, in
    canonical order (the whole observation as one undivided query).
    """

    if fields is None:
        fields = [k for k in CRITERION_ORDER if k in tr.observation.criteria]
    parts = [tr.headline.strip()]
    for kind in fields:
        text = tr.observation.get(kind)
        if text:
            parts.append(text.strip())
    parts = [p for p in parts if p]
    if not parts:
        raise MissingTroubleDescription(f"TR {tr.id}: no query fields available")
    return FIELD_SEP.join(parts)


_TOKEN_RE = re.compile(r"[^\W_]+(?:\.[^\W_]+)*", re.UNICODE)


def preprocess(text: str) -> List[str]:
    """Deterministic tokenization: NFC, lowercase, alphanumeric runs.

    Dots survive only inside version-like tokens (those containing a digit),
    so "v2.1.3" stays whole while "foo.bar" splits.
    """

    normalized = unicodedata.normalize("NFC", text).lower()
    tokens: List[str] = []
    for match in _TOKEN_RE.finditer(normalized):
        candidate = match.group(0)
        if "." in candidate and not any(ch.isdigit() for ch in candidate):
            tokens.extend(part for part in candidate.split(".") if part)
        else:
            tokens.append(candidate)
    return tokens
