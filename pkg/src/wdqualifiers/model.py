"""Domain types for entities, statements and snaks, plus the qualifier admissibility rules."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Optional


class EntityKind(enum.Enum):
    ITEM = "Item"
    PROPERTY = "Property"
    LEXEME = "Lexeme"
    OTHER = "Other"


_PREFIX_KIND = {"Q": EntityKind.ITEM, "P": EntityKind.PROPERTY, "L": EntityKind.LEXEME}
_KIND_PREFIX = {v: k for k, v in _PREFIX_KIND.items()}
_ID_RE = re.compile(r"^([QPL])([0-9]+)$")
_ANY_ID_RE = re.compile(r"^[A-Z]+([0-9]+)")


@dataclass(frozen=True, order=True)
class EntityId:
    """A Wikibase entity identifier such as ``Q42`` or ``P26``.

    Forms, senses and media-info IDs (``L7-F1``, ``M12``) are kept verbatim
    with kind ``OTHER``.
    """

    kind: EntityKind = field(compare=False)
    numeric_id: int
    raw: str

    @classmethod
    def parse(cls, raw: str) -> "EntityId":
        m = _ID_RE.match(raw)
        if m:
            return cls(_PREFIX_KIND[m.group(1)], int(m.group(2)), raw)
        m = _ANY_ID_RE.match(raw)
        if not m:
            raise ValueError(f"not an entity id: {raw!r}")
        return cls(EntityKind.OTHER, int(m.group(1)), raw)

    @classmethod
    def of(cls, kind: EntityKind, numeric_id: int) -> "EntityId":
        if kind is EntityKind.OTHER:
            raise ValueError("cannot build an OTHER id from parts")
        if numeric_id < 0:
            raise ValueError("numeric id must be non-negative")
        return cls(kind, numeric_id, f"{_KIND_PREFIX[kind]}{numeric_id}")

    def __str__(self) -> str:
        return self.raw


def pid_sort_key(pid: str) -> tuple[int, str]:
    """Order ID strings numerically (``P2`` before ``P10``)."""
    m = _ANY_ID_RE.match(pid)
    return (int(m.group(1)), pid) if m else (-1, pid)


class SnakType(enum.Enum):
    ITEM_REF = "item-ref"
    TIME = "time"
    QUANTITY = "quantity"
    STRING = "string"
    URL = "url"
    EXTERNAL_ID = "external-id"
    COORDINATE = "coordinate"
    MONOLINGUAL_TEXT = "monolingual-text"
    NO_VALUE = "no-value"
    SOME_VALUE = "some-value"
    OTHER = "other"


# Wikidata time precision codes.
PRECISION_YEAR = 9
PRECISION_MONTH = 10
PRECISION_DAY = 11
PRECISION_SECOND = 14

GREGORIAN = "Q1985727"

_TIME_RE = re.compile(
    r"^([+-]?)(\d+)-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})Z$"
)


@dataclass(frozen=True)
class TimePoint:
    """A point in time at a given precision. Fields finer than ``precision`` are ignored."""

    year: int
    month: Optional[int] = None
    day: Optional[int] = None
    hour: Optional[int] = None
    minute: Optional[int] = None
    second: Optional[int] = None
    precision: int = PRECISION_YEAR
    calendar: str = GREGORIAN

    def __post_init__(self) -> None:
        if not 0 <= self.precision <= PRECISION_SECOND:
            raise ValueError(f"precision out of range: {self.precision}")
        # clear fields below the precision so equal points compare equal
        names = ("month", "day", "hour", "minute", "second")
        for offset, name in enumerate(names, PRECISION_MONTH):
            if self.precision < offset:
                object.__setattr__(self, name, None)

    @classmethod
    def parse(cls, time: str, precision: int = PRECISION_YEAR, calendar: str = GREGORIAN) -> "TimePoint":
        """Parse the dump's ``+1960-00-00T00:00:00Z`` notation."""
        m = _TIME_RE.match(time)
        if not m:
            raise ValueError(f"malformed time value: {time!r}")
        sign, y, mo, d, h, mi, s = m.groups()
        year = -int(y) if sign == "-" else int(y)

        def opt(v: str) -> Optional[int]:
            return int(v) or None

        return cls(year, opt(mo), opt(d), int(h), int(mi), int(s), precision, calendar)

    @classmethod
    def year_only(cls, year: int) -> "TimePoint":
        return cls(year=year, precision=PRECISION_YEAR)

    def key(self, precision: Optional[int] = None) -> tuple[int, ...]:
        """Sort key truncated to ``precision`` (defaults to the point's own)."""
        p = self.precision if precision is None else min(precision, self.precision)
        if p < PRECISION_YEAR:
            unit = 10 ** (PRECISION_YEAR - p)
            return (self.year // unit,)
        parts = [self.year, self.month or 1, self.day or 1, self.hour or 0, self.minute or 0, self.second or 0]
        return tuple(parts[: p - PRECISION_YEAR + 1])

    def to_wikidata(self) -> str:
        sign = "-" if self.year < 0 else "+"
        mo = (self.month or 0) if self.precision >= PRECISION_MONTH else 0
        d = (self.day or 0) if self.precision >= PRECISION_DAY else 0
        if self.precision >= 12:
            hms = (self.hour or 0, self.minute or 0, self.second or 0)
        else:
            hms = (0, 0, 0)
        return f"{sign}{abs(self.year):04d}-{mo:02d}-{d:02d}T{hms[0]:02d}:{hms[1]:02d}:{hms[2]:02d}Z"

    def __str__(self) -> str:
        if self.precision <= PRECISION_YEAR:
            return str(self.year)
        if self.precision == PRECISION_MONTH:
            return f"{self.year:04d}-{self.month or 1:02d}"
        return f"{self.year:04d}-{self.month or 1:02d}-{self.day or 1:02d}"


@dataclass(frozen=True)
class Quantity:
    amount: Decimal
    unit: Optional[EntityId] = None


@dataclass(frozen=True)
class SnakValue:
    """A typed snak value. ``payload`` is None for no-value/some-value."""

    tag: SnakType
    payload: Any = None

    def __post_init__(self) -> None:
        if self.tag in (SnakType.NO_VALUE, SnakType.SOME_VALUE):
            if self.payload is not None:
                raise ValueError(f"{self.tag.value} carries no payload")
        elif self.tag is SnakType.ITEM_REF and not isinstance(self.payload, EntityId):
            raise TypeError("item-ref payload must be an EntityId")
        elif self.tag is SnakType.TIME and not isinstance(self.payload, TimePoint):
            raise TypeError("time payload must be a TimePoint")
        elif self.tag is SnakType.QUANTITY and not isinstance(self.payload, Quantity):
            raise TypeError("quantity payload must be a Quantity")

    @classmethod
    def item(cls, raw: str) -> "SnakValue":
        return cls(SnakType.ITEM_REF, EntityId.parse(raw))

    @classmethod
    def time(cls, point: TimePoint) -> "SnakValue":
        return cls(SnakType.TIME, point)

    def to_json(self) -> dict[str, Any]:
        p = self.payload
        if p is None:
            value: Any = None
        elif isinstance(p, EntityId):
            value = p.raw
        elif isinstance(p, TimePoint):
            value = {"time": p.to_wikidata(), "precision": p.precision}
        elif isinstance(p, Quantity):
            value = {"amount": str(p.amount), "unit": p.unit.raw if p.unit else None}
        else:
            value = p
        return {"type": self.tag.value, "value": value}


_STRING_DATATYPES = {"url": SnakType.URL, "external-id": SnakType.EXTERNAL_ID}
_UNIT_PREFIX = "http://www.wikidata.org/entity/"


def _strip_entity_uri(uri: str) -> str:
    return uri[len(_UNIT_PREFIX):] if uri.startswith(_UNIT_PREFIX) else uri


def decode_snak(snak: Mapping[str, Any]) -> SnakValue:
    """Decode a dump snak object. Unknown shapes become ``OTHER`` with the raw value kept."""
    snaktype = snak.get("snaktype", "value")
    if snaktype == "novalue":
        return SnakValue(SnakType.NO_VALUE)
    if snaktype == "somevalue":
        return SnakValue(SnakType.SOME_VALUE)
    dv = snak.get("datavalue") or {}
    vtype = dv.get("type")
    value = dv.get("value")
    try:
        if vtype == "wikibase-entityid":
            raw = value.get("id") or f"{value['entity-type'][0].upper()}{value['numeric-id']}"
            return SnakValue(SnakType.ITEM_REF, EntityId.parse(raw))
        if vtype == "time":
            tp = TimePoint.parse(
                value["time"], int(value.get("precision", PRECISION_YEAR)),
                _strip_entity_uri(value.get("calendarmodel", GREGORIAN)),
            )
            return SnakValue(SnakType.TIME, tp)
        if vtype == "quantity":
            unit = value.get("unit", "1")
            unit_id = None if unit == "1" else EntityId.parse(_strip_entity_uri(unit))
            return SnakValue(SnakType.QUANTITY, Quantity(Decimal(value["amount"]), unit_id))
        if vtype == "string":
            return SnakValue(_STRING_DATATYPES.get(snak.get("datatype", ""), SnakType.STRING), value)
        if vtype == "globecoordinate":
            return SnakValue(SnakType.COORDINATE, f"{value['latitude']},{value['longitude']}")
        if vtype == "monolingualtext":
            return SnakValue(SnakType.MONOLINGUAL_TEXT, f"{value['text']}@{value['language']}")
    except (KeyError, TypeError, ValueError, AttributeError, InvalidOperation):
        pass
    return SnakValue(SnakType.OTHER, json.dumps(value, sort_keys=True) if value is not None else None)


class Rank(enum.Enum):
    PREFERRED = "preferred"
    NORMAL = "normal"
    DEPRECATED = "deprecated"


@dataclass(frozen=True)
class Statement:
    """``(subject, property, value)[q1: v1, ...]``. Qualifiers keep dump order and repeats."""

    subject: EntityId
    property: EntityId
    value: SnakValue
    qualifiers: tuple[tuple[EntityId, SnakValue], ...] = ()
    rank: Rank = Rank.NORMAL

    def __post_init__(self) -> None:
        if self.property.kind is not EntityKind.PROPERTY:
            raise ValueError(f"statement property must be a property id, got {self.property}")
        for q, _ in self.qualifiers:
            if q.kind is not EntityKind.PROPERTY:
                raise ValueError(f"qualifier must be a property id, got {q}")

    def qualifier_values(self, qualifier: EntityId) -> list[SnakValue]:
        return [v for q, v in self.qualifiers if q == qualifier]

    @classmethod
    def from_claim(cls, subject: str, claim: Mapping[str, Any]) -> "Statement":
        """Build from a dump claim object (``mainsnak``, ``qualifiers``, ``qualifiers-order``, ``rank``)."""
        mainsnak = claim["mainsnak"]
        quals = claim.get("qualifiers") or {}
        order = claim.get("qualifiers-order") or list(quals)
        pairs = []
        for q in order:
            for snak in quals.get(q, ()):
                pairs.append((EntityId.parse(q), decode_snak(snak)))
        return cls(
            subject=EntityId.parse(subject),
            property=EntityId.parse(mainsnak["property"]),
            value=decode_snak(mainsnak),
            qualifiers=tuple(pairs),
            rank=Rank(claim.get("rank", "normal")),
        )


class Scope(enum.Enum):
    AS_MAIN_VALUE = "AsMainValue"
    AS_QUALIFIER = "AsQualifier"
    AS_REFERENCE = "AsReference"


class Admissibility(enum.Enum):
    ALLOWED = "Allowed"
    DISALLOWED_BY_SCOPE = "DisallowedByScope"


@dataclass(frozen=True)
class PropertyMeta:
    """Per-property metadata. ``scopes`` of None means no scope constraint."""

    id: EntityId
    datatype: str = ""
    scopes: Optional[frozenset[Scope]] = None
    is_example_property: bool = False


DEFAULT_CONFIG_RESOURCE = "admissibility.json"


@dataclass(frozen=True)
class AdmissibilityConfig:
    example_properties: frozenset[str]
    scope_constraint_property: str
    scope_constraint_item: str
    scope_qualifier_property: str
    scope_value_map: Mapping[str, Scope]
    include_deprecated_rank: bool = True

    def __post_init__(self) -> None:
        if not self.example_properties:
            raise ValueError("example_properties must not be empty")
        if not self.scope_value_map:
            raise ValueError("scope_value_map must not be empty")
        for name in ("scope_constraint_property", "scope_constraint_item", "scope_qualifier_property"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be set")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "AdmissibilityConfig":
        try:
            return cls(
                example_properties=frozenset(doc["example_properties"]),
                scope_constraint_property=doc["scope_constraint_property"],
                scope_constraint_item=doc["scope_constraint_item"],
                scope_qualifier_property=doc["scope_qualifier_property"],
                scope_value_map={k: Scope(v) for k, v in doc["scope_value_map"].items()},
                include_deprecated_rank=bool(doc.get("include_deprecated_rank", True)),
            )
        except KeyError as exc:
            raise ValueError(f"admissibility config is missing key {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path: str | Path | None = None) -> "AdmissibilityConfig":
        """Load from a JSON file, or the bundled defaults when ``path`` is None."""
        if path is None:
            text = resources.files("wdqualifiers.data").joinpath(DEFAULT_CONFIG_RESOURCE).read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    @classmethod
    def default(cls) -> "AdmissibilityConfig":
        return cls.load(None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "example_properties": sorted(self.example_properties, key=pid_sort_key),
            "scope_constraint_property": self.scope_constraint_property,
            "scope_constraint_item": self.scope_constraint_item,
            "scope_qualifier_property": self.scope_qualifier_property,
            "scope_value_map": {k: v.value for k, v in sorted(self.scope_value_map.items())},
            "include_deprecated_rank": self.include_deprecated_rank,
        }


def is_example_statement(stmt: Statement, cfg: AdmissibilityConfig) -> bool:
    """True for meta-statements illustrating a property's use (e.g. via P1855)."""
    return stmt.property.raw in cfg.example_properties


def qualifier_admissibility(meta: PropertyMeta) -> Admissibility:
    if meta.scopes is not None and Scope.AS_QUALIFIER not in meta.scopes:
        return Admissibility.DISALLOWED_BY_SCOPE
    return Admissibility.ALLOWED


def iter_statements(entity_id: str, claims: Mapping[str, Iterable[Mapping[str, Any]]]) -> Iterator[Statement]:
    for claim_list in claims.values():
        for claim in claim_list:
            yield Statement.from_claim(entity_id, claim)
