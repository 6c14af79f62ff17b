import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_registry, random_scores
from wdqualifiers.metrics import DiversityScore
from wdqualifiers.taxonomy import (
    ALL_LEAVES,
    CAUSALITY,
    TEMPORAL,
    CategoryPath,
    ClassificationError,
    Top,
    TaxonomyRegistry,
    category_report,
    load_classification,
    validate_registry,
)


def _csv(*rows):
    return io.StringIO("qualifier_id,category,note\n" + "\n".join(rows) + "\n")


def test_tree_shape():
    assert len(ALL_LEAVES) == 14
    assert {p.top for p in ALL_LEAVES} == set(Top)
    assert str(CategoryPath.parse("Additional/Sequence")) == "Additional/Sequence"
    for bad in ("Context/Sequence", "Sequence", "Nope/Temporal"):
        with pytest.raises(ValueError):
            CategoryPath.parse(bad)


def test_load_classification_rows():
    reg = load_classification(_csv("P1545,Additional/Sequence,", 'P17,Context/Spatial,"also provenance, sometimes"'))
    assert reg.category_of("P1545") == CategoryPath(Top.ADDITIONAL, "Sequence")
    assert reg.note("P17") == "also provenance, sometimes"
    assert reg.category_of("P9") is None


@pytest.mark.parametrize("row,line", [
    ("P1545,Additional/Nope,", 3),
    ("P1545,Additional/Sequence,,extra", 3),
    ("P580,Context/Temporal,", 3),
])
def test_load_classification_errors_name_the_line(row, line):
    with pytest.raises(ClassificationError, match=f"line {line}"):
        load_classification(_csv("P580,Context/Temporal,", row))


def test_bad_header():
    with pytest.raises(ClassificationError, match="line 1"):
        load_classification(io.StringIO("a,b,c\n"))


def test_default_classification(registry):
    assert registry.category_of("P580") == TEMPORAL
    assert registry.category_of("P1534") == CAUSALITY
    assert registry.category_of("P1545") == CategoryPath(Top.ADDITIONAL, "Sequence")
    for q in ("P17", "P123", "P585"):
        assert registry.note(q)


def test_report_hand_example():
    scores = [
        DiversityScore("P580", 100, 4, 3.0, 2.0, 200.0, 1),
        DiversityScore("P582", 90, 4, 3.0, 4.0, 360.0, 2),
        DiversityScore("P9999", 80, 1, 1.0, 1.0, 80.0, 3),
        DiversityScore("P1545", 10, 1, 1.0, 1.0, 10.0, 4),
    ]
    reg = TaxonomyRegistry({"P580": TEMPORAL, "P582": TEMPORAL, "P1545": CategoryPath(Top.ADDITIONAL, "Sequence")})
    r = category_report(reg, scores, 3)
    assert r.leaves[TEMPORAL].count == 2
    assert r.leaves[TEMPORAL].freq_sum == 190
    assert r.leaves[TEMPORAL].avg_diversity == 3.0
    assert r.unassigned == ["P9999"]
    assert r.leaves[CategoryPath(Top.ADDITIONAL, "Sequence")].count == 0
    assert r.top_level()[Top.CONTEXT].count == 2
    assert category_report(reg, scores, 0).unassigned == []
    with pytest.raises(ValueError):
        category_report(reg, scores, 5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 60))
def test_report_conservation(seed, n):
    rng = random.Random(seed)
    scores = random_scores(rng, n)
    reg = random_registry(rng, [s.qualifier for s in scores])
    k = rng.randint(0, n)
    r = category_report(reg, scores, k)
    assert sum(s.count for s in r.leaves.values()) + len(r.unassigned) == k
    top = {s.qualifier: s for s in scores if s.rank <= k}
    for path, stats in r.leaves.items():
        members = [s.diversity_proportional for q, s in top.items() if reg.category_of(q) == path]
        assert stats.count == len(members)
        if members:
            assert min(members) <= stats.avg_diversity <= max(members)
    assert r.to_json() == category_report(reg, scores, k).to_json()


def test_report_csv_lists_all_leaves():
    r = category_report(TaxonomyRegistry({}), [], 0)
    lines = r.to_csv().splitlines()
    assert lines[0] == "leaf,count,freq_sum,avg_diversity"
    assert len(lines) == 15


def test_validate_registry():
    scores = [
        DiversityScore("P580", 100, 4, 3.0, 2.0, 200.0, 1),
        DiversityScore("P17", 90, 4, 3.0, 2.0, 180.0, 2),
        DiversityScore("P5", 9, 1, 1.0, 1.0, 9.0, 3),
    ]
    reg = TaxonomyRegistry({"P580": TEMPORAL, "P17": CategoryPath(Top.CONTEXT, "Spatial"), "P42": TEMPORAL})
    got = {(v.kind, v.qualifier) for v in validate_registry(reg, scores, 3)}
    assert got == {("unassigned", "P5"), ("unknown", "P42"), ("ambiguous", "P17")}
    noted = TaxonomyRegistry(reg.assignments, {"P17": "spatial or provenance"})
    assert ("ambiguous", "P17") not in {(v.kind, v.qualifier) for v in validate_registry(noted, scores, 2)}
