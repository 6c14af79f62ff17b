"""Category-level views of a statement's qualifiers, with temporal and causality operations.

Temporal contexts are closed intervals of :class:`TimeBound`. Time points
with different precisions are compared at the coarser one; when they agree
there the order is not known and operations return :data:`UNKNOWN` rather
than guessing.
"""

from __future__ import annotations

import calendar
import datetime as _dt
import enum
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Iterable, Optional, Sequence, Union

from .model import (
    EntityId,
    SnakType,
    SnakValue,
    Statement,
    TimePoint,
)
from .taxonomy import ALL_LEAVES, CAUSALITY, TEMPORAL, TaxonomyRegistry


class _Sentinel:
    __slots__ = ("_name",)

    def __init__(self, name: str) -> None:
        self._name = name

    def __repr__(self) -> str:
        return self._name

    def __reduce__(self) -> str:
        return self._name


class _UnknownType(_Sentinel):
    def __bool__(self) -> bool:
        raise TypeError("UNKNOWN has no truth value; test with `is UNKNOWN`")


UNKNOWN = _UnknownType("UNKNOWN")
EMPTY = _Sentinel("EMPTY")

Tri = Union[bool, _UnknownType]

UNCLASSIFIED = "Unclassified"

START_TIME = "P580"
END_TIME = "P582"
POINT_IN_TIME = "P585"
DURATION = "P2047"
VALID_IN_PERIOD = "P1264"

# qualifier id -> CausalityValue field
CAUSALITY_QUALIFIERS = {
    "P828": "has_cause",
    "P1478": "has_cause",
    "P1534": "end_cause",
    "P1542": "effects",
    "P1536": "effects",
}

# unit item -> (calendar unit, multiplier)
DURATION_UNITS = {
    "Q577": ("year", 1),
    "Q5151": ("month", 1),
    "Q23387": ("day", 7),
    "Q573": ("day", 1),
}
SUB_DAY_UNITS = {"Q25235", "Q7727", "Q11574"}


class TemporalError(ValueError):
    pass


class BoundKind(enum.Enum):
    NEG_INFINITY = "-inf"
    AT = "at"
    POS_INFINITY = "+inf"


_BOUND_ORDER = {BoundKind.NEG_INFINITY: -1, BoundKind.AT: 0, BoundKind.POS_INFINITY: 1}


@dataclass(frozen=True)
class TimeBound:
    kind: BoundKind
    point: Optional[TimePoint] = None

    def __post_init__(self) -> None:
        if (self.kind is BoundKind.AT) != (self.point is not None):
            raise ValueError("only AT bounds carry a time point")

    @classmethod
    def at(cls, point: TimePoint) -> "TimeBound":
        return cls(BoundKind.AT, point)

    @classmethod
    def year(cls, year: int) -> "TimeBound":
        return cls(BoundKind.AT, TimePoint.year_only(year))

    @property
    def is_finite(self) -> bool:
        return self.kind is BoundKind.AT

    def to_json(self) -> Any:
        if self.point is None:
            return self.kind.value
        return {"time": self.point.to_wikidata(), "precision": self.point.precision}

    def __str__(self) -> str:
        return str(self.point) if self.point is not None else self.kind.value


NEG_INF = TimeBound(BoundKind.NEG_INFINITY)
POS_INF = TimeBound(BoundKind.POS_INFINITY)


def compare_bounds(a: TimeBound, b: TimeBound) -> Union[int, _UnknownType]:
    """-1, 0 or 1, or UNKNOWN when the points agree only at the coarser precision."""
    if a.point is None or b.point is None:
        ra, rb = _BOUND_ORDER[a.kind], _BOUND_ORDER[b.kind]
        return (ra > rb) - (ra < rb)
    pa, pb = a.point, b.point
    p = min(pa.precision, pb.precision)
    ka, kb = pa.key(p), pb.key(p)
    if ka != kb:
        return -1 if ka < kb else 1
    return 0 if pa.precision == pb.precision else UNKNOWN


def _le(a: TimeBound, b: TimeBound) -> Tri:
    c = compare_bounds(a, b)
    return UNKNOWN if c is UNKNOWN else c <= 0


class SourceForm(enum.Enum):
    START_END = "StartEnd"
    START_DURATION = "StartDuration"
    POINT_IN_TIME = "PointInTime"
    UNSPECIFIED = "Unspecified"


@dataclass(frozen=True)
class TemporalContext:
    """Validity interval ``[start, end]``. Equality ignores ``form``."""

    start: TimeBound = NEG_INF
    end: TimeBound = POS_INF
    form: SourceForm = field(default=SourceForm.UNSPECIFIED, compare=False)

    def __post_init__(self) -> None:
        if self.start.kind is BoundKind.POS_INFINITY or self.end.kind is BoundKind.NEG_INFINITY:
            raise TemporalError("interval bounds are reversed infinities")
        if compare_bounds(self.start, self.end) == 1:
            raise TemporalError(f"end {self.end} precedes start {self.start}")
        if self.form is SourceForm.POINT_IN_TIME and self.start != self.end:
            raise TemporalError("point-in-time context must have start == end")
        if self.form is SourceForm.UNSPECIFIED and (self.start.is_finite or self.end.is_finite):
            raise TemporalError("unspecified context must be unbounded")

    @classmethod
    def years(cls, start: Optional[int], end: Optional[int]) -> "TemporalContext":
        """Year-precision interval; None means unbounded on that side."""
        s = NEG_INF if start is None else TimeBound.year(start)
        e = POS_INF if end is None else TimeBound.year(end)
        return cls(s, e, _form_for(s, e))

    @property
    def is_unspecified(self) -> bool:
        return not self.start.is_finite and not self.end.is_finite

    def to_json(self) -> dict[str, Any]:
        return {"form": self.form.value, "start": self.start.to_json(), "end": self.end.to_json()}

    def __str__(self) -> str:
        return f"[{self.start}, {self.end}]"


UNSPECIFIED = TemporalContext()


def _form_for(start: TimeBound, end: TimeBound) -> SourceForm:
    if not start.is_finite and not end.is_finite:
        return SourceForm.UNSPECIFIED
    if start == end:
        return SourceForm.POINT_IN_TIME
    return SourceForm.START_END


def temporal_intersects(t1: TemporalContext, t2: TemporalContext) -> Tri:
    """Whether the two validity intervals overlap (True, False or UNKNOWN)."""
    results = (_le(t1.start, t2.end), _le(t2.start, t1.end))
    if any(r is False for r in results):
        return False
    if any(r is UNKNOWN for r in results):
        return UNKNOWN
    return True


def _pick(a: TimeBound, b: TimeBound, want: int) -> Union[TimeBound, _UnknownType]:
    c = compare_bounds(a, b)
    if c is UNKNOWN:
        return UNKNOWN
    return a if c == want or c == 0 else b


def temporal_intersection(t1: TemporalContext, t2: TemporalContext):
    """The overlap of two contexts, :data:`EMPTY` when disjoint, or :data:`UNKNOWN`."""
    if t1.is_unspecified:
        return t2
    if t2.is_unspecified or t1 == t2:
        return t1
    hit = temporal_intersects(t1, t2)
    if hit is UNKNOWN:
        return UNKNOWN
    if not hit:
        return EMPTY
    start = _pick(t1.start, t2.start, 1)
    end = _pick(t1.end, t2.end, -1)
    if start is UNKNOWN or end is UNKNOWN:
        return UNKNOWN
    return TemporalContext(start, end, _form_for(start, end))


# --- duration arithmetic --------------------------------------------------------

def _days_in_month(year: int, month: int) -> int:
    if month == 2:
        return 29 if calendar.isleap(year) else 28
    return 30 if month in (4, 6, 9, 11) else 31


def shift_time(point: TimePoint, unit: str, amount: int) -> TimePoint:
    """Add ``amount`` years, months or days to ``point``, keeping its precision."""
    if unit == "year":
        year, month = point.year + amount, point.month
        day = point.day
        if month and day:
            day = min(day, _days_in_month(year, month))
        return TimePoint(year, month, day, point.hour, point.minute, point.second, point.precision, point.calendar)
    if unit == "month":
        idx = point.year * 12 + (point.month or 1) - 1 + amount
        year, month = divmod(idx, 12)
        month += 1
        day = min(point.day, _days_in_month(year, month)) if point.day else point.day
        return TimePoint(year, month, day, point.hour, point.minute, point.second, point.precision, point.calendar)
    if unit == "day":
        if not 1 <= point.year <= 9999:
            raise TemporalError(f"day arithmetic unsupported for year {point.year}")
        d = _dt.date(point.year, point.month or 1, point.day or 1) + _dt.timedelta(days=amount)
        return TimePoint(d.year, d.month, d.day, point.hour, point.minute, point.second, point.precision, point.calendar)
    raise TemporalError(f"unsupported duration unit {unit!r}")


def duration_of(value: SnakValue) -> tuple[str, int]:
    """Decode a duration quantity into (calendar unit, integer amount)."""
    if value.tag is not SnakType.QUANTITY:
        raise TemporalError("duration must be a quantity")
    q = value.payload
    unit_id = q.unit.raw if q.unit else None
    if unit_id in SUB_DAY_UNITS:
        raise TemporalError("sub-day durations are not supported")
    if unit_id not in DURATION_UNITS:
        raise TemporalError(f"unsupported duration unit {unit_id}")
    unit, mult = DURATION_UNITS[unit_id]
    amount = Decimal(q.amount)
    if amount != amount.to_integral_value():
        raise TemporalError("fractional durations are not supported")
    if amount < 0:
        raise TemporalError("negative duration")
    return unit, int(amount) * mult


def _qid(q: Union[EntityId, str]) -> str:
    return q.raw if isinstance(q, EntityId) else q


def _single_time(values: list[SnakValue], label: str) -> Optional[TimePoint]:
    """The one time value of a qualifier; no-value/some-value read as unbounded."""
    points = []
    for v in values:
        if v.tag is SnakType.TIME:
            points.append(v.payload)
        elif v.tag not in (SnakType.NO_VALUE, SnakType.SOME_VALUE):
            raise TemporalError(f"{label} value is not a time")
    found: list[TimePoint] = []
    for p in points:
        if not any(compare_bounds(TimeBound.at(p), TimeBound.at(f)) == 0 for f in found):
            found.append(p)
    if len(found) > 1:
        raise TemporalError(f"inconsistent temporal qualifiers: several {label} values")
    return found[0] if found else None


def normalize_temporal(pairs: Iterable[tuple[Union[EntityId, str], SnakValue]]) -> TemporalContext:
    """Turn start/end/point-in-time/duration qualifier values into one interval.

    Missing start reads as -inf and missing end as +inf. ``valid in period``
    refers to period items and does not bound the interval here.
    """
    by_q: dict[str, list[SnakValue]] = {}
    for q, v in pairs:
        by_q.setdefault(_qid(q), []).append(v)

    start_p = _single_time(by_q.get(START_TIME, []), "start time")
    end_p = _single_time(by_q.get(END_TIME, []), "end time")
    point_p = _single_time(by_q.get(POINT_IN_TIME, []), "point in time")
    durations = [duration_of(v) for v in by_q.get(DURATION, []) if v.tag is SnakType.QUANTITY]
    if len(set(durations)) > 1:
        raise TemporalError("inconsistent temporal qualifiers: several durations")

    if point_p is not None:
        at = TimeBound.at(point_p)
        for other in (start_p, end_p):
            if other is not None and compare_bounds(at, TimeBound.at(other)) in (-1, 1):
                raise TemporalError("inconsistent temporal qualifiers: point in time outside start/end")
        return TemporalContext(at, at, SourceForm.POINT_IN_TIME)

    start = TimeBound.at(start_p) if start_p else NEG_INF
    end = TimeBound.at(end_p) if end_p else POS_INF
    form = _form_for(start, end)
    if durations:
        unit, amount = durations[0]
        if start_p is not None:
            derived = TimeBound.at(shift_time(start_p, unit, amount))
            if end_p is not None:
                if compare_bounds(derived, end) in (-1, 1):
                    raise TemporalError("inconsistent temporal qualifiers: end time disagrees with duration")
            else:
                end = derived
            form = SourceForm.START_DURATION
        elif end_p is not None:
            start = TimeBound.at(shift_time(end_p, unit, -amount))
            form = SourceForm.START_END
    if start.is_finite and end.is_finite and compare_bounds(start, end) == 1:
        raise TemporalError(f"end {end} precedes start {start}")
    if form is SourceForm.POINT_IN_TIME and start == end and not point_p:
        form = SourceForm.START_END
    return TemporalContext(start, end, form)


# --- causality --------------------------------------------------------------------

def _dedup(ids: Iterable[EntityId]) -> tuple[EntityId, ...]:
    return tuple(dict.fromkeys(ids))


@dataclass(frozen=True)
class CausalityValue:
    has_cause: tuple[EntityId, ...] = ()
    end_cause: tuple[EntityId, ...] = ()
    effects: tuple[EntityId, ...] = ()

    def __post_init__(self) -> None:
        for name in ("has_cause", "end_cause", "effects"):
            object.__setattr__(self, name, _dedup(getattr(self, name)))

    @property
    def is_empty(self) -> bool:
        return not (self.has_cause or self.end_cause or self.effects)

    def to_json(self) -> dict[str, list[str]]:
        return {
            "has_cause": [e.raw for e in self.has_cause],
            "end_cause": [e.raw for e in self.end_cause],
            "effects": [e.raw for e in self.effects],
        }


def combine_causality(c1: CausalityValue, c2: CausalityValue) -> CausalityValue:
    return CausalityValue(
        c1.has_cause + c2.has_cause,
        c1.end_cause + c2.end_cause,
        c1.effects + c2.effects,
    )


def decode_causality(pairs: Iterable[tuple[Union[EntityId, str], SnakValue]]) -> CausalityValue:
    fields: dict[str, list[EntityId]] = {"has_cause": [], "end_cause": [], "effects": []}
    for q, v in pairs:
        name = CAUSALITY_QUALIFIERS.get(_qid(q))
        if name and v.tag is SnakType.ITEM_REF:
            fields[name].append(v.payload)
    return CausalityValue(**fields)


# --- statement projection ----------------------------------------------------------

Pair = tuple[EntityId, SnakValue]


@dataclass(frozen=True)
class CategoryValues:
    groups: dict[str, tuple[Pair, ...]]
    temporal: Optional[TemporalContext]
    causality: CausalityValue
    temporal_error: Optional[str] = None

    def pairs(self, category: str) -> tuple[Pair, ...]:
        return self.groups.get(category, ())

    def pair_count(self) -> int:
        return sum(len(v) for v in self.groups.values())

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        order = [str(p) for p in ALL_LEAVES] + [UNCLASSIFIED]
        for key in order:
            pairs = self.groups.get(key, ())
            if not pairs and key not in (str(TEMPORAL), str(CAUSALITY)):
                continue
            entry: dict[str, Any] = {"pairs": [[q.raw, v.to_json()] for q, v in pairs]}
            if key == str(TEMPORAL):
                entry["value"] = self.temporal.to_json() if self.temporal else None
                if self.temporal_error:
                    entry["error"] = self.temporal_error
            elif key == str(CAUSALITY):
                entry["value"] = self.causality.to_json()
            out[key] = entry
        return out


def project_statement(stmt: Statement, reg: TaxonomyRegistry) -> CategoryValues:
    """Split a statement's qualifier pairs by category and decode the typed values."""
    groups: dict[str, list[Pair]] = {}
    for q, v in stmt.qualifiers:
        path = reg.category_of(q.raw)
        groups.setdefault(str(path) if path else UNCLASSIFIED, []).append((q, v))
    temporal_pairs = groups.get(str(TEMPORAL), [])
    temporal: Optional[TemporalContext]
    try:
        temporal = normalize_temporal(temporal_pairs)
        error = None
    except TemporalError as exc:
        temporal, error = None, str(exc)
    causality = decode_causality(groups.get(str(CAUSALITY), []))
    return CategoryValues({k: tuple(v) for k, v in groups.items()}, temporal, causality, error)


@dataclass(frozen=True)
class RuleHead:
    """Qualifier values for the conclusion of a two-premise rule ``A[T1] & B[T2] -> C``."""

    fires: Tri
    temporal: Any
    causality: CausalityValue

    def to_json(self) -> dict[str, Any]:
        if isinstance(self.temporal, TemporalContext):
            t: Any = self.temporal.to_json()
        else:
            t = repr(self.temporal)
        fires = "unknown" if self.fires is UNKNOWN else self.fires
        return {"fires": fires, "temporal": t, "causality": self.causality.to_json()}


def join_rule_head(a: CategoryValues, b: CategoryValues) -> RuleHead:
    """Guard the rule with ``intersects(T1, T2)`` and qualify the conclusion with
    ``intersection(T1, T2)`` and ``combine(C1, C2)``."""
    causality = combine_causality(a.causality, b.causality)
    if a.temporal is None or b.temporal is None:
        return RuleHead(UNKNOWN, UNKNOWN, causality)
    fires = temporal_intersects(a.temporal, b.temporal)
    if fires is False:
        return RuleHead(False, EMPTY, causality)
    return RuleHead(fires, temporal_intersection(a.temporal, b.temporal), causality)


def statements_from_json(doc: Any) -> list[Statement]:
    """Accept one dump claim object or a list of them; each may carry a ``subject`` key."""
    claims: Sequence[Any] = doc if isinstance(doc, list) else [doc]
    return [Statement.from_claim(c.get("subject", "Q0"), c) for c in claims]
