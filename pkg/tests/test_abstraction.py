import datetime as dt
import json
import pickle

import pytest
from dateutil.relativedelta import relativedelta
from hypothesis import given
from hypothesis import strategies as st

from helpers import claim, quantity_snak, scott_spouse_claim, time_snak, year_snak
from wdqualifiers.abstraction import (
    EMPTY,
    UNKNOWN,
    UNSPECIFIED,
    CausalityValue,
    SourceForm,
    TemporalContext,
    TemporalError,
    TimeBound,
    combine_causality,
    compare_bounds,
    join_rule_head,
    normalize_temporal,
    project_statement,
    shift_time,
    statements_from_json,
    temporal_intersection,
    temporal_intersects,
)
from wdqualifiers.model import EntityId, SnakValue, Statement, TimePoint, decode_snak
from wdqualifiers.taxonomy import CAUSALITY, TEMPORAL

LO, HI = -60, 60
years = st.one_of(st.none(), st.integers(-50, 50))


@st.composite
def contexts(draw):
    a, b = draw(years), draw(years)
    if a is not None and b is not None and a > b:
        a, b = b, a
    return TemporalContext.years(a, b)


def members(t):
    """Year-membership oracle: the set of integer years the context covers within [LO, HI]."""
    lo = LO if t.start.point is None else t.start.point.year
    hi = HI if t.end.point is None else t.end.point.year
    return set(range(lo, hi + 1))


def pairs(*snaks):
    return [(EntityId.parse(s["property"]), decode_snak(s)) for s in snaks]


def test_sentinels_have_no_truth_value_and_pickle():
    with pytest.raises(TypeError):
        bool(UNKNOWN)
    assert pickle.loads(pickle.dumps(UNKNOWN)) is UNKNOWN
    assert pickle.loads(pickle.dumps(EMPTY)) is EMPTY


def test_normalize_start_end():
    t = normalize_temporal(pairs(year_snak("P580", 1960), year_snak("P582", 1965)))
    assert t == TemporalContext.years(1960, 1965)
    assert t.form is SourceForm.START_END


def test_normalize_half_open_and_point():
    assert normalize_temporal(pairs(year_snak("P580", 2000))) == TemporalContext.years(2000, None)
    assert normalize_temporal(pairs(year_snak("P582", 2000))) == TemporalContext.years(None, 2000)
    p = normalize_temporal(pairs(time_snak("P585", "+1936-05-10T00:00:00Z", 11)))
    assert p.form is SourceForm.POINT_IN_TIME and p.start == p.end
    assert normalize_temporal([]) == UNSPECIFIED
    assert normalize_temporal(pairs(claim("P1264", "Q6927")["mainsnak"])) == UNSPECIFIED


def test_normalize_duration():
    t = normalize_temporal(pairs(year_snak("P580", 1960), quantity_snak("P2047", 5, "Q577")))
    assert t == TemporalContext.years(1960, 1965)
    assert t.form is SourceForm.START_DURATION
    consistent = pairs(year_snak("P580", 1960), year_snak("P582", 1965), quantity_snak("P2047", 5, "Q577"))
    assert normalize_temporal(consistent) == TemporalContext.years(1960, 1965)


@pytest.mark.parametrize("snaks,msg", [
    ((year_snak("P580", 1970), year_snak("P582", 1960)), "precedes"),
    ((year_snak("P580", 1960), year_snak("P580", 1961)), "inconsistent"),
    ((year_snak("P580", 1960), year_snak("P582", 1970), quantity_snak("P2047", 5, "Q577")), "disagrees"),
    ((year_snak("P580", 1960), quantity_snak("P2047", 3, "Q7727")), "sub-day"),
    ((year_snak("P580", 1960), quantity_snak("P2047", 3)), "unsupported"),
])
def test_normalize_errors(snaks, msg):
    with pytest.raises(TemporalError, match=msg):
        normalize_temporal(pairs(*snaks))


@given(st.dates(min_value=dt.date(2, 1, 1), max_value=dt.date(9000, 12, 31)),
       st.sampled_from(["year", "month", "day"]), st.integers(0, 500))
def test_shift_time_matches_relativedelta(d, unit, n):
    tp = TimePoint(d.year, d.month, d.day, precision=11)
    got = shift_time(tp, unit, n)
    want = d + relativedelta(**{unit + "s": n})
    assert (got.year, got.month, got.day) == (want.year, want.month, want.day)


def test_week_unit():
    t = normalize_temporal(pairs(time_snak("P580", "+2020-02-25T00:00:00Z", 11), quantity_snak("P2047", 1, "Q23387")))
    assert t.end.point.key() == (2020, 3, 3)


def test_mixed_precision_comparison():
    year = TimeBound.year(1960)
    day = TimeBound.at(TimePoint(1960, 6, 1, precision=11))
    assert compare_bounds(year, day) is UNKNOWN
    assert compare_bounds(TimeBound.year(1959), day) == -1
    a = TemporalContext.years(1950, 1960)
    b = TemporalContext(day, TimeBound.at(TimePoint(1970, 1, 1, precision=11)), SourceForm.START_END)
    assert temporal_intersects(a, b) is UNKNOWN
    assert temporal_intersection(a, b) is UNKNOWN
    assert temporal_intersects(TemporalContext.years(1900, 1950), b) is False


@given(contexts(), contexts())
def test_interval_algebra_against_membership_oracle(t1, t2):
    common = members(t1) & members(t2)
    hit = temporal_intersects(t1, t2)
    assert hit == bool(common)
    got = temporal_intersection(t1, t2)
    assert (got is EMPTY) == (not hit)
    if got is not EMPTY:
        assert members(got) == common


@given(contexts(), contexts(), contexts())
def test_intersection_laws(a, b, c):
    assert temporal_intersection(a, UNSPECIFIED) == a
    assert temporal_intersection(a, a) == a
    ab = temporal_intersection(a, b)
    assert ab == temporal_intersection(b, a) or (ab is EMPTY and temporal_intersection(b, a) is EMPTY)
    left = EMPTY if ab is EMPTY else temporal_intersection(ab, c)
    bc = temporal_intersection(b, c)
    right = EMPTY if bc is EMPTY else temporal_intersection(a, bc)
    assert left == right


ids = st.lists(st.integers(1, 20).map(lambda n: EntityId.parse(f"Q{n}")), max_size=4)
causality = st.builds(CausalityValue, ids, ids, ids)


@given(causality, causality, causality)
def test_combine_causality_laws(a, b, c):
    empty = CausalityValue()
    assert combine_causality(a, empty) == a == combine_causality(empty, a)
    assert combine_causality(combine_causality(a, b), c) == combine_causality(a, combine_causality(b, c))
    assert combine_causality(a, a) == a
    ab, ba = combine_causality(a, b), combine_causality(b, a)
    for f in ("has_cause", "end_cause", "effects"):
        assert set(getattr(ab, f)) == set(getattr(ba, f))


def test_project_scott_statement(registry):
    stmt = Statement.from_claim("Q182450", scott_spouse_claim())
    cv = project_statement(stmt, registry)
    assert cv.temporal == TemporalContext.years(1960, 1965)
    assert cv.causality.end_cause == (EntityId.parse("Q93190"),)
    assert len(cv.pairs(str(TEMPORAL))) == 2 and len(cv.pairs(str(CAUSALITY))) == 1
    assert cv.pair_count() == len(stmt.qualifiers)
    assert temporal_intersection(cv.temporal, TemporalContext.years(1963, 1970)) == TemporalContext.years(1963, 1965)
    doc = cv.to_json()
    assert doc["Additional/Causality"]["value"]["end_cause"] == ["Q93190"]
    json.dumps(doc)


def test_projection_keeps_unclassified_and_errors(registry):
    c = claim("P26", "Q2", {"P9999": ["Q1"], "P580": [year_snak("P580", 1970)], "P582": [year_snak("P582", 1960)]})
    cv = project_statement(Statement.from_claim("Q1", c), registry)
    assert cv.pairs("Unclassified")
    assert cv.temporal is None and "precedes" in cv.temporal_error


def test_join_rule_head(registry):
    a = project_statement(Statement.from_claim("Q1", scott_spouse_claim()), registry)
    b = project_statement(Statement.from_claim("Q1", claim("P69", "Q5", {
        "P580": [year_snak("P580", 1963)], "P582": [year_snak("P582", 1970)], "P828": ["Q8"]})), registry)
    head = join_rule_head(a, b)
    assert head.fires is True
    assert head.temporal == TemporalContext.years(1963, 1965)
    assert head.causality.end_cause and head.causality.has_cause
    late = project_statement(Statement.from_claim("Q1", claim("P69", "Q5", {"P580": [year_snak("P580", 1990)]})), registry)
    assert join_rule_head(a, late).fires is False and join_rule_head(a, late).temporal is EMPTY


def test_statements_from_json():
    doc = [dict(scott_spouse_claim(), subject="Q182450"), scott_spouse_claim()]
    stmts = statements_from_json(doc)
    assert stmts[0].subject.raw == "Q182450" and len(stmts) == 2
    assert statements_from_json(scott_spouse_claim())[0].value == SnakValue.item("Q253916")
