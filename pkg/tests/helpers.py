import json

TIME_URI = "http://www.wikidata.org/entity/Q1985727"


def item_snak(prop, qid):
    n = int(qid[1:])
    return {
        "snaktype": "value",
        "property": prop,
        "datatype": "wikibase-item",
        "datavalue": {"value": {"entity-type": "item", "numeric-id": n, "id": qid}, "type": "wikibase-entityid"},
    }


def time_snak(prop, time, precision=9):
    return {
        "snaktype": "value",
        "property": prop,
        "datatype": "time",
        "datavalue": {
            "value": {"time": time, "timezone": 0, "before": 0, "after": 0,
                      "precision": precision, "calendarmodel": TIME_URI},
            "type": "time",
        },
    }


def year_snak(prop, year):
    sign = "-" if year < 0 else "+"
    return time_snak(prop, f"{sign}{abs(year):04d}-00-00T00:00:00Z", 9)


def quantity_snak(prop, amount, unit=None):
    unit_uri = "1" if unit is None else f"http://www.wikidata.org/entity/{unit}"
    return {
        "snaktype": "value",
        "property": prop,
        "datatype": "quantity",
        "datavalue": {"value": {"amount": f"+{amount}", "unit": unit_uri}, "type": "quantity"},
    }


def claim(prop, value, qualifiers=None, rank="normal"):
    """``qualifiers`` maps qualifier id -> list of snaks (or item ids)."""
    main = item_snak(prop, value) if isinstance(value, str) else value
    out = {"mainsnak": main, "type": "statement", "rank": rank}
    if qualifiers:
        out["qualifiers"] = {
            q: [item_snak(q, v) if isinstance(v, str) else v for v in vals] for q, vals in qualifiers.items()
        }
        out["qualifiers-order"] = list(qualifiers)
    return out


def entity(eid, claims, etype=None, datatype=None):
    etype = etype or ("property" if eid.startswith("P") else "item")
    grouped = {}
    for c in claims:
        grouped.setdefault(c["mainsnak"]["property"], []).append(c)
    doc = {"type": etype, "id": eid, "claims": grouped}
    if datatype:
        doc["datatype"] = datatype
    return doc


def scope_constraint(*scope_items):
    return claim("P2302", "Q53869507", {"P5314": list(scope_items)})


def dump_bytes(entities):
    return ("[\n" + ",\n".join(json.dumps(e) for e in entities) + "\n]\n").encode()


def make_tables(pq, gf=None, pairs=None):
    """Coherent FrequencyTables from ``{q: {p: F(p,q)}}``; GF defaults to the column max."""
    from collections import Counter

    from wdqualifiers.ingest import FrequencyTables

    p_q = {q: Counter(row) for q, row in pq.items()}
    p_freq = Counter()
    for row in p_q.values():
        for p, n in row.items():
            p_freq[p] = max(p_freq[p], n)
    if gf:
        p_freq.update({p: 0 for p in gf})
        for p, n in gf.items():
            p_freq[p] = n
    q_freq = Counter({q: sum(row.values()) for q, row in p_q.items()})
    q_pair = Counter(pairs) if pairs else Counter(q_freq)
    total = sum(p_freq.values())
    qualified = min(total, sum(q_freq.values()))
    return FrequencyTables(
        p_freq=p_freq, q_freq=q_freq, p_q_freq=p_q, q_pair_freq=q_pair,
        total_statements=total, qualified_statements=qualified,
        total_qualifications=sum(q_pair.values()), seen_as_qualifier=set(q_freq),
    )


def random_scores(rng, n):
    """Ranked DiversityScore records with random frequencies and diversities."""
    from wdqualifiers.metrics import DiversityScore

    qids = rng.sample(range(1, 5000), n)
    recs = []
    for q in qids:
        f = rng.randint(1, 10_000)
        pc = rng.randint(1, 30)
        d = rng.uniform(1.0, pc)
        recs.append(DiversityScore(f"P{q}", f, pc, d, d, f * d))
    recs.sort(key=lambda s: (-s.score, -s.frequency, int(s.qualifier[1:])))
    return [DiversityScore(s.qualifier, s.frequency, s.property_count, s.diversity_raw,
                           s.diversity_proportional, s.score, i) for i, s in enumerate(recs, 1)]


def random_registry(rng, qualifiers, share=0.7):
    from wdqualifiers.taxonomy import ALL_LEAVES, TaxonomyRegistry

    chosen = [q for q in qualifiers if rng.random() < share]
    return TaxonomyRegistry({q: rng.choice(ALL_LEAVES) for q in chosen})


def scott_spouse_claim():
    """George C. Scott, spouse, Colleen Dewhurst, 1960 to 1965, ended by divorce."""
    return claim("P26", "Q253916", {
        "P580": [year_snak("P580", 1960)],
        "P582": [year_snak("P582", 1965)],
        "P1534": ["Q93190"],
    })


def planted_spec(examples=4, disallowed_on=10, values=2, temporal_on=15):
    """A hand-countable spec: one AsMainValue-only qualifier and some example statements."""
    from wdqualifiers.model import Scope
    from wdqualifiers.synth import PropertyDef, QualifierPlan, StatementPlan, SynthSpec

    return SynthSpec(
        entities=50,
        property_defs=(PropertyDef("P7000", frozenset({Scope.AS_MAIN_VALUE})), PropertyDef("P580", None, "time")),
        statement_plan=(StatementPlan("P100", 40, (
            QualifierPlan("P7000", values, exact_count=disallowed_on),
            QualifierPlan("P580", 1, exact_count=temporal_on),
        )),),
        example_statement_count=examples,
        seed=7,
    )
