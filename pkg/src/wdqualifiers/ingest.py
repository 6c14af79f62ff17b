"""Streaming extraction of the property/qualifier frequency dictionaries from entity dumps.

A dump is a JSON array with one entity object per line. Extraction runs in
two passes: property entities first (to learn which properties are barred
from qualifier use), then statement counting. The counting pass is a
map-reduce over line batches, so it can fan out across worker processes;
:func:`merge_tables` is the reduction.
"""

from __future__ import annotations

import bz2
import gzip
import io
import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import islice
from pathlib import Path
from typing import IO, Any, BinaryIO, Iterable, Iterator, Mapping, Optional, Union

from .model import (
    AdmissibilityConfig,
    EntityId,
    PropertyMeta,
    Scope,
    pid_sort_key,
)

try:
    import orjson as _orjson

    def _loads(data: bytes) -> Any:
        return _orjson.loads(data)

    _DecodeError: tuple[type[Exception], ...] = (_orjson.JSONDecodeError,)
except ImportError:  # pragma: no cover - exercised when orjson is absent
    def _loads(data: bytes) -> Any:
        return json.loads(data)

    _DecodeError = (json.JSONDecodeError, UnicodeDecodeError)

logger = logging.getLogger(__name__)

Source = Union[str, os.PathLike, BinaryIO]

MAX_DIAGNOSTICS = 20

_GZIP_MAGIC = b"\x1f\x8b"
_BZ2_MAGIC = b"BZh"


class DumpReadError(IOError):
    """Unrecoverable I/O failure while reading a dump."""


class MalformedLine(ValueError):
    pass


@dataclass(frozen=True)
class EntityRecord:
    id: str
    type: str
    claims: Mapping[str, list]
    datatype: Optional[str] = None

    @property
    def kind(self) -> str:
        return self.type or "unknown"


@dataclass
class StreamStats:
    lines: int = 0
    entities: int = 0
    skipped_lines: int = 0
    entities_by_kind: Counter = field(default_factory=Counter)
    diagnostics: list[tuple[int, str]] = field(default_factory=list)

    def skip(self, lineno: int, reason: str) -> None:
        self.skipped_lines += 1
        if len(self.diagnostics) < MAX_DIAGNOSTICS:
            self.diagnostics.append((lineno, reason))

    def merge(self, other: "StreamStats") -> "StreamStats":
        diags = sorted(self.diagnostics + other.diagnostics)[:MAX_DIAGNOSTICS]
        return StreamStats(
            lines=self.lines + other.lines,
            entities=self.entities + other.entities,
            skipped_lines=self.skipped_lines + other.skipped_lines,
            entities_by_kind=self.entities_by_kind + other.entities_by_kind,
            diagnostics=diags,
        )


def _detect_compression(head: bytes) -> str:
    if head.startswith(_GZIP_MAGIC):
        return "gzip"
    if head.startswith(_BZ2_MAGIC):
        return "bzip2"
    return "none"


def open_dump(source: Source, compression: str = "auto") -> BinaryIO:
    """Open ``source`` (a path or binary stream) for line reading, decompressing as needed."""
    if compression not in ("auto", "none", "gzip", "bzip2"):
        raise ValueError(f"unknown compression {compression!r}")
    if isinstance(source, (str, os.PathLike)):
        raw: BinaryIO = open(source, "rb")
    else:
        raw = source
    if compression == "auto":
        if not isinstance(raw, io.BufferedIOBase) or not hasattr(raw, "peek"):
            raw = io.BufferedReader(raw)  # type: ignore[arg-type]
        compression = _detect_compression(raw.peek(3)[:3])  # type: ignore[attr-defined]
    if compression == "gzip":
        return gzip.GzipFile(fileobj=raw, mode="rb")  # type: ignore[return-value]
    if compression == "bzip2":
        return bz2.BZ2File(raw, mode="rb")  # type: ignore[return-value]
    return raw


def parse_entity_line(line: bytes) -> Optional[EntityRecord]:
    """Decode one dump line. Returns None for array brackets and blank lines.

    Raises MalformedLine for anything that is not an entity object with an id.
    """
    line = line.strip()
    if line.endswith(b","):
        line = line[:-1].rstrip()
    if not line or line in (b"[", b"]"):
        return None
    try:
        obj = _loads(line)
    except _DecodeError as exc:
        raise MalformedLine(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedLine("line is not a JSON object")
    eid = obj.get("id")
    if not isinstance(eid, str) or not eid:
        raise MalformedLine("entity has no id")
    claims = obj.get("claims")
    if not isinstance(claims, dict):
        # empty claim sets are serialized as [] in some dumps
        claims = {}
    return EntityRecord(eid, obj.get("type") or "", claims, obj.get("datatype"))


def _iter_lines(fh: IO[bytes], name: str) -> Iterator[tuple[int, bytes]]:
    lineno = 0
    try:
        for line in fh:
            lineno += 1
            yield lineno, line
    except (OSError, EOFError) as exc:
        raise DumpReadError(f"{name}: read failed after line {lineno}: {exc}") from exc


def _source_name(source: Source) -> str:
    if isinstance(source, (str, os.PathLike)):
        return os.fspath(source)
    return getattr(source, "name", "<stream>")


def _decode_numbered(numbered: Iterable[tuple[int, bytes]], stats: StreamStats) -> Iterator[EntityRecord]:
    for lineno, line in numbered:
        stats.lines += 1
        try:
            rec = parse_entity_line(line)
        except MalformedLine as exc:
            stats.skip(lineno, str(exc))
            logger.debug("line %d skipped: %s", lineno, exc)
            continue
        if rec is not None:
            stats.entities += 1
            stats.entities_by_kind[rec.kind] += 1
            yield rec


def stream_entities(
    source: Source, compression: str = "auto", stats: Optional[StreamStats] = None
) -> Iterator[EntityRecord]:
    """Yield the entities of a dump in file order, skipping malformed lines.

    Skips are tallied on ``stats`` when given. I/O failures raise
    :class:`DumpReadError` carrying the last good line number.
    """
    stats = stats if stats is not None else StreamStats()
    fh = open_dump(source, compression)
    try:
        yield from _decode_numbered(_iter_lines(fh, _source_name(source)), stats)
    finally:
        if isinstance(source, (str, os.PathLike)):
            fh.close()


class PropertyCatalog:
    """Metadata of every property entity seen. Unknown properties read as unconstrained."""

    def __init__(self, metas: Optional[Mapping[str, PropertyMeta]] = None, unknown_constraint_shapes: int = 0):
        self._metas = dict(metas or {})
        self.unknown_constraint_shapes = unknown_constraint_shapes
        self.disallowed_as_qualifier = frozenset(
            pid for pid, m in self._metas.items() if m.scopes is not None and Scope.AS_QUALIFIER not in m.scopes
        )

    def lookup(self, pid: str) -> PropertyMeta:
        meta = self._metas.get(pid)
        if meta is None:
            return PropertyMeta(EntityId.parse(pid))
        return meta

    def __contains__(self, pid: object) -> bool:
        return pid in self._metas

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._metas, key=pid_sort_key))

    def __len__(self) -> int:
        return len(self._metas)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PropertyCatalog) and self._metas == other._metas

    def summary(self) -> dict[str, int]:
        return {
            "properties": len(self._metas),
            "scope_constrained": sum(1 for m in self._metas.values() if m.scopes is not None),
            "disallowed_as_qualifier": len(self.disallowed_as_qualifier),
            "unknown_constraint_shapes": self.unknown_constraint_shapes,
        }


def _snak_item_id(snak: Mapping[str, Any]) -> Optional[str]:
    if snak.get("snaktype", "value") != "value":
        return None
    value = (snak.get("datavalue") or {}).get("value")
    if not isinstance(value, dict):
        return None
    if "id" in value:
        return value["id"]
    if "numeric-id" in value:
        return f"Q{value['numeric-id']}"
    return None


def decode_scopes(
    claims: Mapping[str, list], cfg: AdmissibilityConfig
) -> tuple[Optional[frozenset[Scope]], int]:
    """Scope allowances declared by a property's scope constraints, plus a count of unreadable shapes."""
    scopes: set[Scope] = set()
    found = False
    unknown = 0
    for claim in claims.get(cfg.scope_constraint_property, ()):
        if _snak_item_id(claim.get("mainsnak", {})) != cfg.scope_constraint_item:
            continue
        quals = (claim.get("qualifiers") or {}).get(cfg.scope_qualifier_property, ())
        decoded = False
        for snak in quals:
            scope = cfg.scope_value_map.get(_snak_item_id(snak) or "")
            if scope is None:
                unknown += 1
            else:
                scopes.add(scope)
                decoded = True
        if decoded:
            found = True
        elif not quals:
            unknown += 1
    return (frozenset(scopes) if found else None), unknown


def collect_property_catalog(
    entities: Iterable[EntityRecord], cfg: Optional[AdmissibilityConfig] = None
) -> PropertyCatalog:
    cfg = cfg or AdmissibilityConfig.default()
    metas: dict[str, PropertyMeta] = {}
    unknown = 0
    for ent in entities:
        if ent.type != "property":
            continue
        scopes, bad = decode_scopes(ent.claims, cfg)
        unknown += bad
        metas[ent.id] = PropertyMeta(
            id=EntityId.parse(ent.id),
            datatype=ent.datatype or "",
            scopes=scopes,
            is_example_property=ent.id in cfg.example_properties,
        )
    return PropertyCatalog(metas, unknown)


@dataclass
class FrequencyTables:
    """The three frequency dictionaries plus global counters.

    ``p_freq[p]`` counts statements with main property p; ``q_freq[q]`` counts
    statements where q occurs at least once; ``p_q_freq[q][p]`` counts
    p-statements qualified by q; ``q_pair_freq[q]`` counts q's qualifier-value
    pairs. Only admissible qualifiers are counted; ``seen_as_qualifier`` holds
    every property that occurred as a qualifier on a non-example statement.
    """

    p_freq: Counter = field(default_factory=Counter)
    q_freq: Counter = field(default_factory=Counter)
    p_q_freq: dict[str, Counter] = field(default_factory=dict)
    q_pair_freq: Counter = field(default_factory=Counter)
    total_statements: int = 0
    qualified_statements: int = 0
    total_qualifications: int = 0
    seen_as_qualifier: set[str] = field(default_factory=set)
    statements_by_kind: Counter = field(default_factory=Counter)
    excluded: Counter = field(default_factory=Counter)

    @property
    def qualifiers(self) -> list[str]:
        return sorted(self.q_freq, key=pid_sort_key)

    def check_consistency(self) -> list[str]:
        """Self-consistency problems; an empty list means the tables are coherent."""
        problems = []
        if set(self.q_freq) != set(self.p_q_freq):
            problems.append("q_freq and p_q_freq have different qualifier sets")
        for q, by_p in self.p_q_freq.items():
            if sum(by_p.values()) != self.q_freq.get(q, 0):
                problems.append(f"{q}: sum of F(p,q) differs from F(q)")
            for p, n in by_p.items():
                if n <= 0:
                    problems.append(f"{q}/{p}: non-positive count")
                if n > self.p_freq.get(p, 0):
                    problems.append(f"{q}/{p}: F(p,q) exceeds GF(p)")
            if self.q_pair_freq.get(q, 0) < self.q_freq.get(q, 0):
                problems.append(f"{q}: fewer pairs than qualified statements")
        if self.qualified_statements > self.total_statements:
            problems.append("more qualified statements than statements")
        if self.total_qualifications < self.qualified_statements:
            problems.append("fewer qualifications than qualified statements")
        if sum(self.q_pair_freq.values()) != self.total_qualifications:
            problems.append("pair counts do not sum to total_qualifications")
        if not set(self.q_freq) <= self.seen_as_qualifier:
            problems.append("admissible qualifier missing from seen_as_qualifier")
        return problems


def merge_tables(a: FrequencyTables, b: FrequencyTables) -> FrequencyTables:
    """Pointwise sum of two shard tables (set union for ``seen_as_qualifier``)."""
    pq: dict[str, Counter] = {q: Counter(c) for q, c in a.p_q_freq.items()}
    for q, c in b.p_q_freq.items():
        if q in pq:
            pq[q].update(c)
        else:
            pq[q] = Counter(c)
    return FrequencyTables(
        p_freq=a.p_freq + b.p_freq,
        q_freq=a.q_freq + b.q_freq,
        p_q_freq=pq,
        q_pair_freq=a.q_pair_freq + b.q_pair_freq,
        total_statements=a.total_statements + b.total_statements,
        qualified_statements=a.qualified_statements + b.qualified_statements,
        total_qualifications=a.total_qualifications + b.total_qualifications,
        seen_as_qualifier=a.seen_as_qualifier | b.seen_as_qualifier,
        statements_by_kind=a.statements_by_kind + b.statements_by_kind,
        excluded=a.excluded + b.excluded,
    )


def extract_frequency_tables(
    entities: Iterable[EntityRecord],
    catalog: PropertyCatalog,
    cfg: Optional[AdmissibilityConfig] = None,
) -> FrequencyTables:
    cfg = cfg or AdmissibilityConfig.default()
    examples = cfg.example_properties
    disallowed = catalog.disallowed_as_qualifier
    keep_deprecated = cfg.include_deprecated_rank

    p_freq: Counter = Counter()
    q_freq: Counter = Counter()
    pq: dict[str, Counter] = {}
    pairs: Counter = Counter()
    by_kind: Counter = Counter()
    excluded: Counter = Counter()
    seen: set[str] = set()
    total = qualified = total_pairs = 0

    for ent in entities:
        kind = ent.kind
        for prop, claim_list in ent.claims.items():
            if prop in examples:
                excluded["example_statements"] += len(claim_list)
                continue
            for claim in claim_list:
                if not keep_deprecated and claim.get("rank") == "deprecated":
                    excluded["deprecated_statements"] += 1
                    continue
                total += 1
                p_freq[prop] += 1
                by_kind[kind] += 1
                quals = claim.get("qualifiers")
                if not quals:
                    continue
                any_admissible = False
                for q, snaks in quals.items():
                    n = len(snaks)
                    if n == 0:
                        continue
                    seen.add(q)
                    if q in disallowed:
                        excluded["scope_disallowed_pairs"] += n
                        continue
                    any_admissible = True
                    q_freq[q] += 1
                    pairs[q] += n
                    total_pairs += n
                    by_p = pq.get(q)
                    if by_p is None:
                        by_p = pq[q] = Counter()
                    by_p[prop] += 1
                if any_admissible:
                    qualified += 1

    return FrequencyTables(
        p_freq=p_freq,
        q_freq=q_freq,
        p_q_freq=pq,
        q_pair_freq=pairs,
        total_statements=total,
        qualified_statements=qualified,
        total_qualifications=total_pairs,
        seen_as_qualifier=seen,
        statements_by_kind=by_kind,
        excluded=excluded,
    )


# --- parallel two-pass driver -------------------------------------------------

_worker_state: dict[str, Any] = {}


def _init_worker(catalog: PropertyCatalog, cfg: AdmissibilityConfig) -> None:
    _worker_state["catalog"] = catalog
    _worker_state["cfg"] = cfg


def _count_batch(batch: list[tuple[int, bytes]]) -> tuple[FrequencyTables, StreamStats]:
    stats = StreamStats()
    tables = extract_frequency_tables(
        _decode_numbered(batch, stats), _worker_state["catalog"], _worker_state["cfg"]
    )
    return tables, stats


def _batches(numbered: Iterator[tuple[int, bytes]], size: int) -> Iterator[list[tuple[int, bytes]]]:
    while True:
        batch = list(islice(numbered, size))
        if not batch:
            return
        yield batch


def _property_lines(numbered: Iterable[tuple[int, bytes]]) -> Iterator[tuple[int, bytes]]:
    # cheap prefilter; the decoded type field is checked afterwards
    for lineno, line in numbered:
        if b'"property"' in line:
            yield lineno, line


def build_catalog_from_dump(
    source: Source, cfg: Optional[AdmissibilityConfig] = None, compression: str = "auto"
) -> PropertyCatalog:
    """Pass 1: read only property entities. ``source`` may be a property-only file."""
    cfg = cfg or AdmissibilityConfig.default()
    fh = open_dump(source, compression)
    try:
        lines = _property_lines(_iter_lines(fh, _source_name(source)))
        return collect_property_catalog(_decode_numbered(lines, StreamStats()), cfg)
    finally:
        if isinstance(source, (str, os.PathLike)):
            fh.close()


@dataclass
class ExtractionResult:
    tables: FrequencyTables
    catalog: PropertyCatalog
    stats: StreamStats


def extract_dump(
    source: Union[str, os.PathLike],
    cfg: Optional[AdmissibilityConfig] = None,
    *,
    shards: int = 1,
    catalog: Optional[PropertyCatalog] = None,
    property_source: Optional[Union[str, os.PathLike]] = None,
    compression: str = "auto",
    batch_lines: int = 20_000,
) -> ExtractionResult:
    """Two-pass extraction of a dump file, fanning pass 2 out over ``shards`` processes.

    The result does not depend on ``shards`` or ``batch_lines``.
    """
    if shards < 1:
        raise ValueError("shards must be >= 1")
    cfg = cfg or AdmissibilityConfig.default()
    if catalog is None:
        catalog = build_catalog_from_dump(property_source or source, cfg, compression)
    logger.info("catalog: %s", catalog.summary())

    tables = FrequencyTables()
    stats = StreamStats()
    fh = open_dump(source, compression)
    try:
        batches = _batches(_iter_lines(fh, _source_name(source)), batch_lines)
        if shards == 1:
            _init_worker(catalog, cfg)
            for batch in batches:
                t, s = _count_batch(batch)
                tables, stats = merge_tables(tables, t), stats.merge(s)
        else:
            with ProcessPoolExecutor(max_workers=shards, initializer=_init_worker, initargs=(catalog, cfg)) as pool:
                pending = []
                for batch in batches:
                    pending.append(pool.submit(_count_batch, batch))
                    if len(pending) >= 2 * shards:
                        t, s = pending.pop(0).result()
                        tables, stats = merge_tables(tables, t), stats.merge(s)
                for fut in pending:
                    t, s = fut.result()
                    tables, stats = merge_tables(tables, t), stats.merge(s)
    finally:
        fh.close()
    return ExtractionResult(tables, catalog, stats)


# --- serialization ---------------------------------------------------------------

P_FREQ_FILE = "p-freq.json"
Q_FREQ_FILE = "q-freq.json"
P_Q_FREQ_FILE = "p-q-freq.json"
Q_PAIR_FREQ_FILE = "q-pair-freq.json"
STATS_FILE = "ingest-stats.json"


def _ordered(counts: Mapping[str, int]) -> dict[str, int]:
    return {k: counts[k] for k in sorted(counts, key=pid_sort_key) if counts[k]}


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=1) + "\n"


def tables_to_documents(
    tables: FrequencyTables,
    catalog: Optional[PropertyCatalog] = None,
    stats: Optional[StreamStats] = None,
) -> dict[str, str]:
    """Serialized output files keyed by file name. Content is deterministic."""
    seen = sorted(tables.seen_as_qualifier, key=pid_sort_key)
    ingest: dict[str, Any] = {
        "total_statements": tables.total_statements,
        "qualified_statements": tables.qualified_statements,
        "total_qualifications": tables.total_qualifications,
        "statements_by_kind": dict(sorted(tables.statements_by_kind.items())),
        "excluded": dict(sorted(tables.excluded.items())),
        "admissible_qualifiers": len(tables.q_freq),
        "properties_seen_as_qualifier": seen,
        "disallowed_qualifiers_used": [q for q in seen if q not in tables.q_freq],
    }
    if stats is not None:
        ingest["stream"] = {
            "lines": stats.lines,
            "entities": stats.entities,
            "entities_by_kind": dict(sorted(stats.entities_by_kind.items())),
            "skipped_lines": stats.skipped_lines,
            "skip_diagnostics": [{"line": n, "reason": r} for n, r in stats.diagnostics],
        }
    if catalog is not None:
        ingest["catalog"] = catalog.summary()
    return {
        P_FREQ_FILE: dumps_json(_ordered(tables.p_freq)),
        Q_FREQ_FILE: dumps_json(_ordered(tables.q_freq)),
        P_Q_FREQ_FILE: dumps_json(
            {q: _ordered(tables.p_q_freq[q]) for q in sorted(tables.p_q_freq, key=pid_sort_key)}
        ),
        Q_PAIR_FREQ_FILE: dumps_json(_ordered(tables.q_pair_freq)),
        STATS_FILE: dumps_json(ingest),
    }


def read_tables(directory: Union[str, os.PathLike]) -> FrequencyTables:
    """Load tables written by :func:`tables_to_documents`.

    Only ``p-freq.json`` and ``p-q-freq.json`` are required; missing pieces are
    derived (``q_freq`` from row sums, pair counts default to ``q_freq``).
    """
    d = Path(directory)

    def load(name: str) -> Any:
        with open(d / name, encoding="utf-8") as fh:
            return json.load(fh)

    p_freq = Counter(load(P_FREQ_FILE))
    pq = {q: Counter(by_p) for q, by_p in load(P_Q_FREQ_FILE).items()}
    q_freq = Counter(load(Q_FREQ_FILE)) if (d / Q_FREQ_FILE).exists() else Counter(
        {q: sum(c.values()) for q, c in pq.items()}
    )
    pairs = Counter(load(Q_PAIR_FREQ_FILE)) if (d / Q_PAIR_FREQ_FILE).exists() else Counter(q_freq)
    stats = load(STATS_FILE) if (d / STATS_FILE).exists() else {}
    return FrequencyTables(
        p_freq=p_freq,
        q_freq=q_freq,
        p_q_freq=pq,
        q_pair_freq=pairs,
        total_statements=stats.get("total_statements", sum(p_freq.values())),
        qualified_statements=stats.get("qualified_statements", 0),
        total_qualifications=stats.get("total_qualifications", sum(pairs.values())),
        seen_as_qualifier=set(stats.get("properties_seen_as_qualifier", q_freq)),
        statements_by_kind=Counter(stats.get("statements_by_kind", {})),
        excluded=Counter(stats.get("excluded", {})),
    )
