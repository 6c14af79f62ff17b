"""Qualifier category tree, curated assignments and per-category reports."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence, TextIO

from .metrics import DiversityScore
from .model import pid_sort_key


class Top(enum.Enum):
    CONTEXT = "Context"
    EPISTEMIC_UNCERTAINTY = "EpistemicUncertainty"
    STRUCTURAL = "Structural"
    ADDITIONAL = "Additional"


LEAVES: dict[Top, tuple[str, ...]] = {
    Top.CONTEXT: ("Temporal", "Spatial", "SubjectModifier"),
    Top.EPISTEMIC_UNCERTAINTY: ("Epistemic", "UncertaintyQuantification"),
    Top.STRUCTURAL: ("Metamodeling", "StructuredValueField"),
    Top.ADDITIONAL: (
        "Sequence", "Provenance", "Causality", "ObjectSubjectStatementRelation",
        "SubPropertyOrValue", "ExternalObjectDescription", "OtherAdditional",
    ),
}


@dataclass(frozen=True)
class CategoryPath:
    top: Top
    leaf: str

    def __post_init__(self) -> None:
        if self.leaf not in LEAVES[self.top]:
            raise ValueError(f"{self.leaf!r} is not a subcategory of {self.top.value}")

    @classmethod
    def parse(cls, text: str) -> "CategoryPath":
        top, sep, leaf = text.strip().partition("/")
        if not sep:
            raise ValueError(f"category must look like 'Top/Leaf': {text!r}")
        try:
            return cls(Top(top), leaf)
        except ValueError:
            raise ValueError(f"unknown category {text!r}") from None

    def __str__(self) -> str:
        return f"{self.top.value}/{self.leaf}"


ALL_LEAVES: tuple[CategoryPath, ...] = tuple(CategoryPath(t, l) for t, ls in LEAVES.items() for l in ls)

TEMPORAL = CategoryPath(Top.CONTEXT, "Temporal")
CAUSALITY = CategoryPath(Top.ADDITIONAL, "Causality")

CLASSIFICATION_HEADER = ("qualifier_id", "category", "note")


class ClassificationError(ValueError):
    pass


@dataclass(frozen=True)
class TaxonomyRegistry:
    assignments: Mapping[str, CategoryPath]
    notes: Mapping[str, str] = field(default_factory=dict)

    def category_of(self, qualifier: str) -> Optional[CategoryPath]:
        return self.assignments.get(qualifier)

    def note(self, qualifier: str) -> str:
        return self.notes.get(qualifier, "")

    def __len__(self) -> int:
        return len(self.assignments)


def load_classification(doc: TextIO) -> TaxonomyRegistry:
    """Read a ``qualifier_id,category,note`` CSV. Errors name the offending line."""
    reader = csv.reader(doc)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CLASSIFICATION_HEADER:
        raise ClassificationError(f"line 1: header must be {','.join(CLASSIFICATION_HEADER)}")
    assignments: dict[str, CategoryPath] = {}
    notes: dict[str, str] = {}
    for row in reader:
        lineno = reader.line_num
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) < 2 or len(row) > 3:
            raise ClassificationError(f"line {lineno}: expected 3 columns, got {len(row)}")
        qid, cat = row[0].strip(), row[1].strip()
        note = row[2].strip() if len(row) == 3 else ""
        if not qid:
            raise ClassificationError(f"line {lineno}: empty qualifier_id")
        try:
            path = CategoryPath.parse(cat)
        except ValueError as exc:
            raise ClassificationError(f"line {lineno}: {exc}") from None
        if qid in assignments:
            raise ClassificationError(f"line {lineno}: duplicate qualifier {qid}")
        assignments[qid] = path
        if note:
            notes[qid] = note
    return TaxonomyRegistry(assignments, notes)


def load_default_classification() -> TaxonomyRegistry:
    """The bundled starter classification."""
    text = resources.files("wdqualifiers.data").joinpath("classification.csv").read_text("utf-8")
    return load_classification(io.StringIO(text))


@dataclass(frozen=True)
class LeafStats:
    count: int
    freq_sum: int
    avg_diversity: Optional[float]


@dataclass(frozen=True)
class CategoryReport:
    k: int
    leaves: Mapping[CategoryPath, LeafStats]
    unassigned: list[str]

    def top_level(self) -> dict[Top, LeafStats]:
        """Leaf stats rolled up to the four top categories (averages weighted by count)."""
        out = {}
        for top, names in LEAVES.items():
            stats = [self.leaves[CategoryPath(top, n)] for n in names]
            count = sum(s.count for s in stats)
            total = math.fsum(s.avg_diversity * s.count for s in stats if s.count)
            out[top] = LeafStats(count, sum(s.freq_sum for s in stats), total / count if count else None)
        return out

    def to_json(self) -> str:
        doc = {
            "k": self.k,
            "leaves": [
                {"category": str(p), "count": s.count, "freq_sum": s.freq_sum, "avg_diversity": s.avg_diversity}
                for p, s in self.leaves.items()
            ],
            "top_level": [
                {"category": t.value, "count": s.count, "freq_sum": s.freq_sum, "avg_diversity": s.avg_diversity}
                for t, s in self.top_level().items()
            ],
            "unassigned": self.unassigned,
        }
        return json.dumps(doc, indent=1) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["leaf", "count", "freq_sum", "avg_diversity"])
        for p, s in self.leaves.items():
            w.writerow([str(p), s.count, s.freq_sum, "" if s.avg_diversity is None else f"{s.avg_diversity:.6f}"])
        return buf.getvalue()


def _top_k(scores: Sequence[DiversityScore], k: int) -> list[DiversityScore]:
    if k < 0 or k > len(scores):
        raise ValueError(f"k must be in [0, {len(scores)}]")
    return sorted(scores, key=lambda s: s.rank)[:k]


def category_report(reg: TaxonomyRegistry, scores: Sequence[DiversityScore], k: int) -> CategoryReport:
    """Aggregate the ``k`` best-ranked qualifiers by registry leaf.

    Averages are over proportional diversity. Qualifiers absent from the
    registry are listed in ``unassigned`` in rank order.
    """
    members: dict[CategoryPath, list[DiversityScore]] = {p: [] for p in ALL_LEAVES}
    unassigned = []
    for s in _top_k(scores, k):
        path = reg.category_of(s.qualifier)
        if path is None:
            unassigned.append(s.qualifier)
        else:
            members[path].append(s)
    leaves = {}
    for path, ms in members.items():
        if not ms:
            leaves[path] = LeafStats(0, 0, None)
            continue
        divs = [m.diversity_proportional for m in ms]
        avg = min(max(math.fsum(divs) / len(divs), min(divs)), max(divs))
        leaves[path] = LeafStats(len(ms), sum(m.frequency for m in ms), avg)
    return CategoryReport(k, leaves, unassigned)


# Qualifiers known to be used in more than one category.
DEFAULT_AMBIGUOUS = frozenset({"P17", "P123", "P585"})


@dataclass(frozen=True)
class Violation:
    kind: str
    qualifier: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}\t{self.qualifier}\t{self.message}"


def validate_registry(
    reg: TaxonomyRegistry,
    scores: Sequence[DiversityScore],
    k: int,
    ambiguous: Iterable[str] = DEFAULT_AMBIGUOUS,
) -> list[Violation]:
    top = _top_k(scores, k)
    scored = {s.qualifier for s in scores}
    out = [
        Violation("unassigned", s.qualifier, f"rank {s.rank} qualifier has no category")
        for s in top
        if reg.category_of(s.qualifier) is None
    ]
    out += [
        Violation("unknown", q, "assigned qualifier does not appear in the scores")
        for q in sorted(set(reg.assignments) - scored, key=pid_sort_key)
    ]
    out += [
        Violation("ambiguous", q, f"ambiguous qualifier assigned to {reg.assignments[q]} without a note")
        for q in sorted(set(ambiguous), key=pid_sort_key)
        if q in reg.assignments and not reg.note(q)
    ]
    return out
