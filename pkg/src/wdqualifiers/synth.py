"""Synthetic entity dumps with exact ground-truth frequency tables.

The generator first lays out a blueprint of entities and statements, then
either serializes it to dump lines or counts it directly. The counting here
does not touch the ingest code, so it can serve as an oracle for it.
"""

from __future__ import annotations

import gzip
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from .ingest import FrequencyTables
from .model import AdmissibilityConfig, Scope, pid_sort_key

ENTITY_URI = "http://www.wikidata.org/entity/"
DATATYPES = ("wikibase-item", "time", "quantity", "string", "external-id")


class SynthSpecError(ValueError):
    pass


@dataclass(frozen=True)
class PropertyDef:
    id: str
    scopes: Optional[frozenset[Scope]] = None
    datatype: str = "wikibase-item"


@dataclass(frozen=True)
class QualifierPlan:
    """Attach ``qualifier`` with ``values`` values to ``exact_count`` statements,
    or to each statement with ``probability``. Neither means every statement."""

    qualifier: str
    values: int = 1
    probability: Optional[float] = None
    exact_count: Optional[int] = None


@dataclass(frozen=True)
class StatementPlan:
    property: str
    count: int
    qualifiers: tuple[QualifierPlan, ...] = ()
    deprecated: int = 0


@dataclass(frozen=True)
class SynthSpec:
    entities: int
    property_defs: tuple[PropertyDef, ...] = ()
    statement_plan: tuple[StatementPlan, ...] = ()
    example_statement_count: int = 0
    seed: int = 0
    malformed_lines: int = 0

    def validate(self) -> None:
        if self.entities < 0:
            raise SynthSpecError("entities must be non-negative")
        if self.statement_plan and any(p.count for p in self.statement_plan) and self.entities == 0:
            raise SynthSpecError("statements planned but no entities to hold them")
        if self.example_statement_count and not self.property_defs:
            raise SynthSpecError("example statements need at least one property definition")
        ids = [d.id for d in self.property_defs]
        if len(set(ids)) != len(ids):
            raise SynthSpecError("duplicate property definition")
        for d in self.property_defs:
            if not d.id.startswith("P"):
                raise SynthSpecError(f"property id must start with P: {d.id}")
            if d.scopes is not None and not d.scopes:
                raise SynthSpecError(f"{d.id}: scope set must be non-empty when given")
            if d.datatype not in DATATYPES:
                raise SynthSpecError(f"{d.id}: unsupported datatype {d.datatype}")
        for plan in self.statement_plan:
            if plan.count < 0 or not 0 <= plan.deprecated <= plan.count:
                raise SynthSpecError(f"{plan.property}: bad count/deprecated")
            quals = [qp.qualifier for qp in plan.qualifiers]
            if len(set(quals)) != len(quals):
                raise SynthSpecError(f"{plan.property}: qualifier planned twice")
            for qp in plan.qualifiers:
                if qp.values < 1:
                    raise SynthSpecError(f"{qp.qualifier}: values must be >= 1")
                if qp.probability is not None and qp.exact_count is not None:
                    raise SynthSpecError(f"{qp.qualifier}: give probability or exact_count, not both")
                if qp.probability is not None and not 0.0 <= qp.probability <= 1.0:
                    raise SynthSpecError(f"{qp.qualifier}: probability outside [0, 1]")
                if qp.exact_count is not None and not 0 <= qp.exact_count <= plan.count:
                    raise SynthSpecError(
                        f"{qp.qualifier}: exact_count {qp.exact_count} unsatisfiable for {plan.count} statements"
                    )

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SynthSpec":
        try:
            defs = tuple(
                PropertyDef(
                    d["id"],
                    None if d.get("scope") is None else frozenset(Scope(s) for s in d["scope"]),
                    d.get("datatype", "wikibase-item"),
                )
                for d in doc.get("property_defs", ())
            )
            plans = tuple(
                StatementPlan(
                    p["property"],
                    int(p["count"]),
                    tuple(
                        QualifierPlan(
                            q["qualifier"], int(q.get("values", 1)), q.get("probability"), q.get("exact_count")
                        )
                        for q in p.get("qualifiers", ())
                    ),
                    int(p.get("deprecated", 0)),
                )
                for p in doc.get("statement_plan", ())
            )
            spec = cls(
                entities=int(doc["entities"]),
                property_defs=defs,
                statement_plan=plans,
                example_statement_count=int(doc.get("example_statement_count", 0)),
                seed=int(doc.get("seed", 0)),
                malformed_lines=int(doc.get("malformed_lines", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SynthSpecError(f"bad synth spec: {exc}") from None
        spec.validate()
        return spec

    def to_dict(self) -> dict[str, Any]:
        return {
            "entities": self.entities,
            "seed": self.seed,
            "example_statement_count": self.example_statement_count,
            "malformed_lines": self.malformed_lines,
            "property_defs": [
                {"id": d.id, "datatype": d.datatype,
                 "scope": None if d.scopes is None else sorted(s.value for s in d.scopes)}
                for d in self.property_defs
            ],
            "statement_plan": [
                {"property": p.property, "count": p.count, "deprecated": p.deprecated,
                 "qualifiers": [
                     {"qualifier": q.qualifier, "values": q.values,
                      "probability": q.probability, "exact_count": q.exact_count}
                     for q in p.qualifiers
                 ]}
                for p in self.statement_plan
            ],
        }


# --- blueprint ---------------------------------------------------------------------

@dataclass
class _Claim:
    property: str
    value: dict
    qualifiers: list[tuple[str, list[dict]]] = field(default_factory=list)
    rank: str = "normal"


@dataclass
class _Entity:
    id: str
    type: str
    datatype: Optional[str] = None
    claims: dict[str, list[_Claim]] = field(default_factory=dict)

    def add(self, claim: _Claim) -> None:
        self.claims.setdefault(claim.property, []).append(claim)


class _Values:
    def __init__(self, rng: random.Random, datatypes: Mapping[str, str]):
        self.rng = rng
        self.datatypes = datatypes

    def snak(self, pid: str, allow_special: bool = True) -> dict:
        rng = self.rng
        dt = self.datatypes.get(pid, "wikibase-item")
        if allow_special and rng.random() < 0.03:
            return {"snaktype": rng.choice(("somevalue", "novalue")), "property": pid, "datatype": dt}
        if dt == "wikibase-item":
            n = rng.randrange(1, 10_000_000)
            dv = {"value": {"entity-type": "item", "numeric-id": n, "id": f"Q{n}"}, "type": "wikibase-entityid"}
        elif dt == "time":
            y = rng.randrange(-500, 2030)
            sign = "-" if y < 0 else "+"
            dv = {"value": {"time": f"{sign}{abs(y):04d}-00-00T00:00:00Z", "timezone": 0, "before": 0, "after": 0,
                            "precision": 9, "calendarmodel": ENTITY_URI + "Q1985727"}, "type": "time"}
        elif dt == "quantity":
            dv = {"value": {"amount": f"+{rng.randrange(0, 10_000)}", "unit": "1"}, "type": "quantity"}
        else:
            dv = {"value": f"v{rng.randrange(1 << 30):x}", "type": "string"}
        return {"snaktype": "value", "property": pid, "datavalue": dv, "datatype": dt}

    def item_snak(self, pid: str, item: str) -> dict:
        n = int(item[1:])
        return {"snaktype": "value", "property": pid, "datatype": "wikibase-item",
                "datavalue": {"value": {"entity-type": "item", "numeric-id": n, "id": item},
                              "type": "wikibase-entityid"}}


def _blueprint(spec: SynthSpec, cfg: AdmissibilityConfig) -> list[_Entity]:
    spec.validate()
    rng = random.Random(spec.seed)
    vals = _Values(rng, {d.id: d.datatype for d in spec.property_defs})

    items = [_Entity(f"Q{i + 1}", "item") for i in range(spec.entities)]
    for plan in spec.statement_plan:
        attach: list[set[int]] = []
        for qp in plan.qualifiers:
            if qp.probability is not None:
                attach.append({i for i in range(plan.count) if rng.random() < qp.probability})
            else:
                k = plan.count if qp.exact_count is None else qp.exact_count
                attach.append(set(rng.sample(range(plan.count), k)))
        deprecated = set(rng.sample(range(plan.count), plan.deprecated))
        for i in range(plan.count):
            claim = _Claim(plan.property, vals.snak(plan.property, allow_special=False),
                           rank="deprecated" if i in deprecated else rng.choice(("normal", "normal", "preferred")))
            for qp, chosen in zip(plan.qualifiers, attach):
                if i in chosen:
                    claim.qualifiers.append((qp.qualifier, [vals.snak(qp.qualifier) for _ in range(qp.values)]))
            items[rng.randrange(spec.entities)].add(claim)

    inverse_scope = {scope: item for item, scope in sorted(cfg.scope_value_map.items())}
    props = []
    for d in spec.property_defs:
        ent = _Entity(d.id, "property", d.datatype)
        if d.scopes is not None:
            missing = set(d.scopes) - set(inverse_scope)
            if missing:
                raise SynthSpecError(f"config has no scope item for {sorted(s.value for s in missing)}")
            scope_snaks = [vals.item_snak(cfg.scope_qualifier_property, inverse_scope[s])
                           for s in sorted(d.scopes, key=lambda s: s.value)]
            ent.add(_Claim(cfg.scope_constraint_property,
                           vals.item_snak(cfg.scope_constraint_property, cfg.scope_constraint_item),
                           [(cfg.scope_qualifier_property, scope_snaks)]))
        props.append(ent)

    example_props = sorted(cfg.example_properties, key=pid_sort_key)
    for i in range(spec.example_statement_count):
        ent = props[i % len(props)]
        qualifiers = [(ent.id, [vals.snak(ent.id, allow_special=False)])]
        extra = rng.choice(spec.property_defs).id
        if extra != ent.id:
            qualifiers.append((extra, [vals.snak(extra)]))
        prop = rng.choice(example_props)
        ent.add(_Claim(prop, vals.snak(prop, allow_special=False), qualifiers))
    return items + props


def _claim_json(c: _Claim, guid: str) -> dict:
    out: dict[str, Any] = {"mainsnak": c.value, "type": "statement", "id": guid, "rank": c.rank}
    if c.qualifiers:
        out["qualifiers"] = {q: snaks for q, snaks in c.qualifiers}
        out["qualifiers-order"] = [q for q, _ in c.qualifiers]
    out["references"] = []
    return out


def _entity_json(e: _Entity) -> dict:
    claims = {
        p: [_claim_json(c, f"{e.id}${p}-{j}") for j, c in enumerate(cs)]
        for p, cs in e.claims.items()
    }
    doc: dict[str, Any] = {"type": e.type, "id": e.id}
    if e.datatype:
        doc["datatype"] = e.datatype
    doc["labels"] = {"en": {"language": "en", "value": f"label of {e.id}"}}
    # entities without claims serialize them as [] like real dumps
    doc["claims"] = claims if claims else []
    return doc


def _count(entities: Sequence[_Entity], spec: SynthSpec, cfg: AdmissibilityConfig) -> FrequencyTables:
    disallowed = {
        d.id for d in spec.property_defs if d.scopes is not None and Scope.AS_QUALIFIER not in d.scopes
    }
    t = FrequencyTables()
    for e in entities:
        for c in (c for cs in e.claims.values() for c in cs):
            if c.property in cfg.example_properties:
                t.excluded["example_statements"] += 1
                continue
            if c.rank == "deprecated" and not cfg.include_deprecated_rank:
                t.excluded["deprecated_statements"] += 1
                continue
            t.total_statements += 1
            t.p_freq[c.property] += 1
            t.statements_by_kind[e.type] += 1
            admissible = [(q, len(v)) for q, v in c.qualifiers if q not in disallowed]
            for q, v in c.qualifiers:
                t.seen_as_qualifier.add(q)
                if q in disallowed:
                    t.excluded["scope_disallowed_pairs"] += len(v)
            for q, n in admissible:
                t.q_freq[q] += 1
                t.q_pair_freq[q] += n
                t.p_q_freq.setdefault(q, Counter())[c.property] += 1
                t.total_qualifications += n
            if admissible:
                t.qualified_statements += 1
    return t


def oracle_tables(spec: SynthSpec, cfg: Optional[AdmissibilityConfig] = None) -> FrequencyTables:
    """Ground-truth tables for ``spec`` by direct enumeration of its blueprint."""
    cfg = cfg or AdmissibilityConfig.default()
    return _count(_blueprint(spec, cfg), spec, cfg)


def generate_dump(
    spec: SynthSpec, cfg: Optional[AdmissibilityConfig] = None, compress: bool = False
) -> tuple[bytes, FrequencyTables]:
    """Serialize ``spec`` as a dump (one entity per line inside a JSON array).

    Deterministic for a given spec: gzip output has a zero mtime.
    """
    cfg = cfg or AdmissibilityConfig.default()
    entities = _blueprint(spec, cfg)
    lines = [json.dumps(_entity_json(e), ensure_ascii=False, separators=(",", ":")) for e in entities]
    junk_rng = random.Random(spec.seed ^ 0x5EED)
    junk = ['{"type":"item","claims":{}}', '{"id":"Q0","type":"item","claims":{"P1":[{"mainsnak":']
    for i in range(spec.malformed_lines):
        lines.insert(junk_rng.randrange(len(lines) + 1), junk[i % len(junk)])
    body = ("[\n" + ",\n".join(lines) + "\n]\n").encode("utf-8")
    if compress:
        body = gzip.compress(body, mtime=0)
    return body, _count(entities, spec, cfg)


def random_spec(
    seed: int,
    max_entities: int = 5000,
    qualifiers: int = 50,
    properties: int = 20,
    planted_disallowed: int = 3,
    example_statements: int = 5,
) -> SynthSpec:
    """A randomized spec with some scope-disallowed qualifiers and example statements."""
    rng = random.Random(seed)
    n_entities = rng.randrange(max(1, max_entities // 4), max_entities + 1)
    prop_ids = [f"P{n}" for n in rng.sample(range(100, 1000), properties)]
    qual_ids = [f"P{n}" for n in rng.sample(range(1000, 3000), qualifiers)]
    bad = set(rng.sample(qual_ids, min(planted_disallowed, len(qual_ids))))
    defs = []
    for q in qual_ids:
        if q in bad:
            scopes: Optional[frozenset[Scope]] = frozenset({Scope.AS_MAIN_VALUE})
        elif rng.random() < 0.3:
            scopes = frozenset(rng.sample([Scope.AS_MAIN_VALUE, Scope.AS_REFERENCE], rng.randint(0, 2))
                               + [Scope.AS_QUALIFIER])
        else:
            scopes = None
        defs.append(PropertyDef(q, scopes, rng.choice(DATATYPES)))
    for p in prop_ids[: properties // 2]:
        defs.append(PropertyDef(p, None, "wikibase-item"))
    budget = n_entities * 2
    plans = []
    for p in prop_ids:
        count = rng.randrange(0, max(2, budget // properties))
        qps = []
        for q in rng.sample(qual_ids, rng.randint(0, min(8, len(qual_ids)))):
            if rng.random() < 0.5:
                qps.append(QualifierPlan(q, rng.randint(1, 3), probability=rng.random()))
            else:
                qps.append(QualifierPlan(q, rng.randint(1, 3), exact_count=rng.randint(0, count)))
        plans.append(StatementPlan(p, count, tuple(qps), deprecated=rng.randint(0, count // 10)))
    return SynthSpec(
        entities=n_entities,
        property_defs=tuple(defs),
        statement_plan=tuple(plans),
        example_statement_count=example_statements,
        seed=seed,
    )
