"""Patient case model: structured data items extracted from a free-form narrative.

A :class:`CaseRecord` is an immutable value; edits produce new revisions and
item ids are allocated monotonically so a removed id is never reused. The
items are the shared identifiers every other module (opinions, conflicts,
provenance badges) references.
"""

from __future__ import annotations

import logging
import re
import uuid
from dataclasses import dataclass, replace
from typing import Protocol

from .errors import InvalidCategory, UnknownItem

logger = logging.getLogger(__name__)

CATEGORIES = ("Demographics", "Symptoms", "Exam", "History", "Labs", "Imaging")

CASE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CaseItem:
    """One structured patient datum; the atom of provenance.

    ``source_span`` is a half-open character range into the narrative, or
    ``None`` for items not located in it (the residual fallback, manual adds).
    """

    item_id: str
    category: str
    label: str
    value: str = ""
    source_span: tuple[int, int] | None = None


@dataclass(frozen=True)
class CaseRecord:
    """An editable set of case items over an immutable narrative.

    ``next_ordinal`` is the monotone id allocator: it only grows, so ids of
    removed items are never handed out again.
    """

    case_id: str
    narrative: str
    items: tuple[CaseItem, ...] = ()
    revision: int = 0
    next_ordinal: int = 1

    def item(self, item_id: str) -> CaseItem:
        for it in self.items:
            if it.item_id == item_id:
                return it
        raise UnknownItem(f"no case item {item_id!r}")

    def item_ids(self) -> frozenset[str]:
        return frozenset(it.item_id for it in self.items)


@dataclass(frozen=True)
class ItemEdit:
    """One edit step: Add (payload fields), Update (target + fields), Remove (target)."""

    kind: str  # "add" | "update" | "remove"
    target: str | None = None
    category: str | None = None
    label: str | None = None
    value: str | None = None
    source_span: tuple[int, int] | None = None


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    item_id: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class DraftItem:
    """Extractor output before ids are allocated."""

    category: str
    label: str
    value: str = ""
    source_span: tuple[int, int] | None = None


class CaseExtractor(Protocol):
    def extract(self, narrative: str) -> list[DraftItem]: ...


def extract_case_items(
    narrative: str,
    extractor: CaseExtractor,
    case_id: str | None = None,
) -> CaseRecord:
    """Build a draft CaseRecord from a narrative.

    Every draft item gets an allocated id and a valid category; content the
    extractor could not classify is kept by the extractor itself as a single
    History item (never dropped). An empty narrative yields an empty draft,
    which :func:`validate_case` will flag.
    """
    drafts = extractor.extract(narrative)
    items = []
    for n, d in enumerate(drafts, start=1):
        if d.category not in CATEGORIES:
            raise InvalidCategory(f"extractor produced category {d.category!r}")
        items.append(
            CaseItem(
                item_id=f"i{n}",
                category=d.category,
                label=d.label,
                value=d.value,
                source_span=d.source_span,
            )
        )
    if not items:
        logger.warning("narrative produced no case items; draft is empty")
    return CaseRecord(
        case_id=case_id or f"case-{uuid.uuid4().hex[:12]}",
        narrative=narrative,
        items=tuple(items),
        revision=0,
        next_ordinal=len(items) + 1,
    )


def apply_item_edit(record: CaseRecord, edit: ItemEdit) -> CaseRecord:
    """Apply one edit, returning a record with ``revision + 1``.

    Add allocates a fresh id greater than any ever allocated; Update changes
    only the fields the edit carries; Remove drops the item. Unrelated items
    are untouched.
    """
    if edit.kind == "add":
        if edit.category not in CATEGORIES:
            raise InvalidCategory(f"bad category {edit.category!r}")
        item = CaseItem(
            item_id=f"i{record.next_ordinal}",
            category=edit.category,
            label=edit.label or "",
            value=edit.value or "",
            source_span=edit.source_span,
        )
        return replace(
            record,
            items=record.items + (item,),
            revision=record.revision + 1,
            next_ordinal=record.next_ordinal + 1,
        )

    if edit.target is None or edit.target not in record.item_ids():
        raise UnknownItem(f"edit targets unknown item {edit.target!r}")

    if edit.kind == "remove":
        return replace(
            record,
            items=tuple(it for it in record.items if it.item_id != edit.target),
            revision=record.revision + 1,
        )

    if edit.kind == "update":
        if edit.category is not None and edit.category not in CATEGORIES:
            raise InvalidCategory(f"bad category {edit.category!r}")
        updated = []
        for it in record.items:
            if it.item_id == edit.target:
                it = replace(
                    it,
                    category=edit.category if edit.category is not None else it.category,
                    label=edit.label if edit.label is not None else it.label,
                    value=edit.value if edit.value is not None else it.value,
                    source_span=edit.source_span if edit.source_span is not None else it.source_span,
                )
            updated.append(it)
        return replace(record, items=tuple(updated), revision=record.revision + 1)

    raise ValueError(f"unknown edit kind {edit.kind!r}")


def validate_case(record: CaseRecord) -> ValidationReport:
    """List violations; a debate session may only be created from a clean record."""
    violations: list[Violation] = []
    if not record.items:
        violations.append(Violation("empty case", "record has zero items"))
    seen: set[str] = set()
    for it in record.items:
        if it.item_id in seen:
            violations.append(Violation("duplicate id", f"item id {it.item_id} used twice", it.item_id))
        seen.add(it.item_id)
        if not it.label.strip():
            violations.append(Violation("empty label", f"item {it.item_id} has an empty label", it.item_id))
        if it.category not in CATEGORIES:
            violations.append(Violation("invalid category", f"item {it.item_id}: {it.category!r}", it.item_id))
        if it.source_span is not None:
            lo, hi = it.source_span
            if not (0 <= lo <= hi <= len(record.narrative)):
                violations.append(Violation("span out of bounds", f"item {it.item_id}: {it.source_span}", it.item_id))
    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# Rule-based extractor (deterministic; used for tests and offline mode)
# ---------------------------------------------------------------------------

_SEGMENT_SPLIT = re.compile(r";|\n|(?<!\d)\.(?=\s|$)")

_AGE_SEX = re.compile(
    r"(?P<age>\d{1,3})\s*[- ]\s*year\s*[- ]\s*old(?:\s+(?P<sex>male|female|man|woman|boy|girl))?",
    re.IGNORECASE,
)
_AGE_SHORT = re.compile(r"\b(?:age[d]?\s*[:=]?\s*(?P<age>\d{1,3})|(?P<age2>\d{1,3})\s*y/?o)\b", re.IGNORECASE)
_SEX_ONLY = re.compile(r"^\s*(male|female|man|woman)\s*$", re.IGNORECASE)

_LAB_UNITS = (
    r"mg/dL|mg/L|g/dL|g/L|mmol/L|[uµ]mol/L|mEq/L|ng/mL|pg/mL|IU/L|U/L|"
    r"mm/h[r]?|x?10\^9/L|K/[uµ]L|%|bpm|mmHg|/min|kg|cm|°?[CF]\b"
)
_LAB = re.compile(
    rf"^(?P<name>[A-Za-z][A-Za-z0-9\-]*(?:\s[A-Za-z0-9\-]+)*?)\s*[:=]?\s*"
    rf"(?P<value>\d+(?:\.\d+)?\s*(?:{_LAB_UNITS})|1:\d+|\d+(?:\.\d+)?)\s*$"
)

_IMAGING_KEYWORDS = (
    "ct", "mri", "pet", "x-ray", "xray", "radiograph", "ultrasound",
    "sonography", "echocardiogram", "imaging", "scan",
)
_EXAM_KEYWORDS = (
    "exam", "examination", "tenderness", "palpation", "auscultation",
    "murmur", "edema", "blood pressure", "bp", "heart rate", "pulse",
    "temperature", "vitals", "reflexes",
)
_HISTORY_KEYWORDS = (
    "history", "hx", "prior", "previous", "smoker", "smoking", "alcohol",
    "family", "medication", "diagnosed", "surgery", "allergy", "allergies",
)

_BARE_NUMBER = re.compile(r"\d+(?:\.\d+)?")


class RuleBasedExtractor:
    """Deterministic regex/keyword extractor.

    The narrative is split into segments (``;``, newlines, sentence breaks);
    each segment is classified by the first matching rule: age/sex patterns,
    ``name value unit`` lab pairs, imaging/exam/history keywords, then a
    short-phrase symptom fallback. Segments no rule claims are concatenated
    into one residual History item so agents never see data the clinician
    cannot.
    """

    # symptom fallback bounds
    max_symptom_words = 5
    max_symptom_chars = 60

    def extract(self, narrative: str) -> list[DraftItem]:
        segments = self._segments(narrative)
        items: list[DraftItem] = []
        residual: list[str] = []
        for text, start, end in segments:
            produced = self._classify(text, (start, end))
            if produced:
                items.extend(produced)
            else:
                residual.append(text)
        if not items and narrative.strip():
            return [DraftItem("History", "narrative", narrative.strip(), (0, len(narrative)))]
        if residual:
            items.append(DraftItem("History", "narrative", "; ".join(residual), None))
        return items

    def _segments(self, narrative: str) -> list[tuple[str, int, int]]:
        out = []
        cursor = 0
        for m in _SEGMENT_SPLIT.finditer(narrative):
            out.append((narrative[cursor:m.start()], cursor, m.start()))
            cursor = m.end()
        out.append((narrative[cursor:], cursor, len(narrative)))
        trimmed = []
        for text, start, end in out:
            stripped = text.strip()
            if not stripped:
                continue
            lead = len(text) - len(text.lstrip())
            trimmed.append((stripped, start + lead, start + lead + len(stripped)))
        return trimmed

    def _classify(self, text: str, span: tuple[int, int]) -> list[DraftItem]:
        m = _AGE_SEX.search(text)
        if m:
            items = [DraftItem("Demographics", "age", m.group("age"), span)]
            if m.group("sex"):
                items.append(DraftItem("Demographics", "sex", m.group("sex").lower(), span))
            return items
        m = _AGE_SHORT.search(text)
        if m:
            return [DraftItem("Demographics", "age", m.group("age") or m.group("age2"), span)]
        m = _SEX_ONLY.match(text)
        if m:
            return [DraftItem("Demographics", "sex", m.group(1).lower(), span)]

        lowered = text.lower()
        imaging = self._keyword(lowered, _IMAGING_KEYWORDS)
        if imaging:
            return [DraftItem("Imaging", imaging, text, span)]
        exam = self._keyword(lowered, _EXAM_KEYWORDS)
        if exam:
            return [DraftItem("Exam", exam, text, span)]

        m = _LAB.match(text)
        if m and not _BARE_NUMBER.fullmatch(m.group("value")):
            return [DraftItem("Labs", m.group("name"), m.group("value"), span)]

        history = self._keyword(lowered, _HISTORY_KEYWORDS)
        if history:
            return [DraftItem("History", history, text, span)]

        if (
            len(text) <= self.max_symptom_chars
            and len(text.split()) <= self.max_symptom_words
            and not any(ch.isdigit() for ch in text)
        ):
            return [DraftItem("Symptoms", text, "", span)]
        return []

    @staticmethod
    def _keyword(lowered: str, keywords: tuple[str, ...]) -> str | None:
        """Earliest whole-word keyword hit, or None."""
        hits = [
            (m.start(), k)
            for k in keywords
            if (m := re.search(rf"\b{re.escape(k)}\b", lowered))
        ]
        return min(hits)[1] if hits else None
