import bz2
import gzip
import io
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import claim, dump_bytes, entity, scope_constraint, year_snak
from wdqualifiers.ingest import (
    DumpReadError,
    FrequencyTables,
    PropertyCatalog,
    StreamStats,
    collect_property_catalog,
    extract_dump,
    extract_frequency_tables,
    merge_tables,
    read_tables,
    stream_entities,
    tables_to_documents,
)
from wdqualifiers.model import Scope
from wdqualifiers.synth import generate_dump, random_spec

AS_MAIN_VALUE = "Q54828448"
AS_QUALIFIER = "Q54828449"


def test_minimal_dump():
    recs = list(stream_entities(io.BytesIO(b'[\n{"id":"Q1","type":"item","claims":{}},\n]\n')))
    assert [r.id for r in recs] == ["Q1"]


def test_malformed_lines_are_skipped_and_counted():
    data = b'[\n{"type":"item","claims":{}},\nnot json,\n{"id":"Q2","type":"item","claims":[]}\n]'
    stats = StreamStats()
    recs = list(stream_entities(io.BytesIO(data), stats=stats))
    assert [r.id for r in recs] == ["Q2"]
    assert stats.skipped_lines == 2
    assert [n for n, _ in stats.diagnostics] == [2, 3]
    assert recs[0].claims == {}


@pytest.mark.parametrize("compress,name", [(gzip.compress, "gzip"), (bz2.compress, "bzip2"), (lambda b: b, "none")])
def test_compression_detection(compress, name):
    data = compress(dump_bytes([entity("Q1", []), entity("Q2", [])]))
    assert [r.id for r in stream_entities(io.BytesIO(data))] == ["Q1", "Q2"]
    assert [r.id for r in stream_entities(io.BytesIO(data), compression=name)] == ["Q1", "Q2"]


def test_truncated_gzip_aborts_with_position(tmp_path):
    data = gzip.compress(dump_bytes([entity(f"Q{i}", []) for i in range(2000)]))
    path = tmp_path / "cut.json.gz"
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(DumpReadError, match="after line"):
        list(stream_entities(path))


def test_synthetic_dump_records_in_order():
    spec = random_spec(11, max_entities=1000)
    spec = type(spec)(**{**spec.__dict__, "entities": 1000, "property_defs": ()})
    spec = type(spec)(**{**spec.__dict__, "example_statement_count": 0})
    data, _ = generate_dump(spec)
    ids = [r.id for r in stream_entities(io.BytesIO(data))]
    assert ids == [f"Q{i + 1}" for i in range(1000)]


def test_property_catalog_scope_decoding(cfg):
    ents = [
        entity("P31", [scope_constraint(AS_MAIN_VALUE)], datatype="wikibase-item"),
        entity("P580", [], datatype="time"),
        entity("P1855", []),
        entity("Q1", [scope_constraint(AS_MAIN_VALUE)]),
    ]
    recs = list(stream_entities(io.BytesIO(dump_bytes(ents))))
    cat = collect_property_catalog(recs, cfg)
    assert list(cat) == ["P31", "P580", "P1855"]
    assert cat.lookup("P31").scopes == frozenset({Scope.AS_MAIN_VALUE})
    assert cat.lookup("P31").datatype == "wikibase-item"
    assert cat.lookup("P580").scopes is None
    assert cat.lookup("P1855").is_example_property
    assert cat.lookup("P9999").scopes is None
    assert cat.disallowed_as_qualifier == {"P31"}


def test_catalog_counts_unknown_constraint_shapes(cfg):
    ents = [entity("P5", [scope_constraint("Q1"), claim("P2302", "Q53869507")])]
    cat = collect_property_catalog(stream_entities(io.BytesIO(dump_bytes(ents))), cfg)
    assert cat.lookup("P5").scopes is None
    assert cat.unknown_constraint_shapes == 2


def test_empty_catalog(cfg):
    assert len(collect_property_catalog(stream_entities(io.BytesIO(dump_bytes([entity("Q1", [])]))), cfg)) == 0


def _records(ents):
    return list(stream_entities(io.BytesIO(dump_bytes(ents))))


def test_single_statement_hand_count(cfg):
    ents = [entity("Q1", [claim("P26", "Q2", {"P580": [year_snak("P580", 1960)], "P582": [year_snak("P582", 1965)]})])]
    t = extract_frequency_tables(_records(ents), PropertyCatalog(), cfg)
    assert t.p_freq == {"P26": 1}
    assert t.q_freq == {"P580": 1, "P582": 1}
    assert t.p_q_freq == {"P580": {"P26": 1}, "P582": {"P26": 1}}
    assert t.total_qualifications == 2
    assert t.qualified_statements == 1 and t.total_statements == 1


def test_scope_disallowed_qualifier_excluded_but_seen(cfg):
    ents = [
        entity("P31", [scope_constraint(AS_MAIN_VALUE)]),
        entity("Q1", [claim("P26", "Q2", {"P31": ["Q5"], "P580": [year_snak("P580", 1960)]})]),
    ]
    recs = _records(ents)
    t = extract_frequency_tables(recs, collect_property_catalog(recs, cfg), cfg)
    assert "P31" not in t.q_freq and "P31" not in t.p_q_freq
    assert "P31" in t.seen_as_qualifier
    assert t.excluded["scope_disallowed_pairs"] == 1
    # the constraint statement on P31 counts like any statement, P5314 as its qualifier
    assert t.p_freq == {"P26": 1, "P2302": 1}
    assert t.q_freq == {"P580": 1, "P5314": 1}


def test_example_statements_excluded_from_all_counts(cfg):
    ents = [entity("P659", [claim("P1855", "Q20", {"P659": ["Q1234"]})])]
    t = extract_frequency_tables(_records(ents), PropertyCatalog(), cfg)
    assert t.total_statements == 0 and not t.p_freq and not t.q_freq and not t.seen_as_qualifier
    assert t.excluded["example_statements"] == 1


def test_repeated_qualifier_counts_once_per_statement(cfg):
    ents = [entity("Q1", [claim("P800", "Q2", {"P2868": ["Q3", "Q4", "Q5"]})])]
    t = extract_frequency_tables(_records(ents), PropertyCatalog(), cfg)
    assert t.q_freq["P2868"] == 1
    assert t.p_q_freq["P2868"]["P800"] == 1
    assert t.q_pair_freq["P2868"] == 3 and t.total_qualifications == 3


def test_deprecated_rank_toggle(cfg):
    from dataclasses import replace

    ents = [entity("Q1", [claim("P26", "Q2", {"P580": [year_snak("P580", 1)]}, rank="deprecated"), claim("P26", "Q3")])]
    recs = _records(ents)
    assert extract_frequency_tables(recs, PropertyCatalog(), cfg).p_freq["P26"] == 2
    t = extract_frequency_tables(recs, PropertyCatalog(), replace(cfg, include_deprecated_rank=False))
    assert t.p_freq["P26"] == 1 and not t.q_freq
    assert t.excluded["deprecated_statements"] == 1


def test_merge_identity_and_synthetic_equality(cfg):
    data, truth = generate_dump(random_spec(3, max_entities=400))
    recs = list(stream_entities(io.BytesIO(data)))
    cat = collect_property_catalog(recs, cfg)
    whole = extract_frequency_tables(recs, cat, cfg)
    assert whole == truth
    assert merge_tables(whole, FrequencyTables()) == whole
    assert merge_tables(FrequencyTables(), whole) == whole


def _shard_tables(seed, n_shards):
    data, _ = generate_dump(random_spec(seed, max_entities=300))
    recs = list(stream_entities(io.BytesIO(data)))
    cfg_ = None
    cat = collect_property_catalog(recs, cfg_)
    rng = random.Random(seed)
    shards = [[] for _ in range(n_shards)]
    for r in recs:
        shards[rng.randrange(n_shards)].append(r)
    return extract_frequency_tables(recs, cat, cfg_), [extract_frequency_tables(s, cat, cfg_) for s in shards]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_merge_is_associative_and_commutative(seed):
    whole, (a, b, c) = _shard_tables(seed, 3)
    assert merge_tables(merge_tables(a, b), c) == merge_tables(a, merge_tables(b, c))
    assert merge_tables(a, b) == merge_tables(b, a)
    assert merge_tables(merge_tables(a, b), c) == whole


def test_tables_self_consistency():
    data, truth = generate_dump(random_spec(5, max_entities=500))
    assert truth.check_consistency() == []
    for q, by_p in truth.p_q_freq.items():
        assert sum(by_p.values()) == truth.q_freq[q]
        for p, n in by_p.items():
            assert n <= min(truth.p_freq[p], truth.q_freq[q])
    assert truth.qualified_statements <= truth.total_statements
    assert truth.total_qualifications >= truth.qualified_statements


def test_documents_round_trip(tmp_path):
    data, truth = generate_dump(random_spec(6, max_entities=300))
    for name, text in tables_to_documents(truth).items():
        (tmp_path / name).write_text(text)
    assert read_tables(tmp_path) == truth
    pfreq = json.loads((tmp_path / "p-freq.json").read_text())
    assert list(pfreq) == sorted(pfreq, key=lambda k: int(k[1:]))


def test_extract_dump_shards_and_property_file(tmp_path):
    data, truth = generate_dump(random_spec(8, max_entities=600), compress=True)
    path = tmp_path / "d.json.gz"
    path.write_bytes(data)
    single = extract_dump(path)
    sharded = extract_dump(path, shards=3, batch_lines=40)
    assert single.tables == sharded.tables == truth
    assert single.stats.entities == sharded.stats.entities
    # pass 1 over a property-only file gives the same catalog
    props = [line for line in gzip.decompress(data).split(b"\n") if b'"type":"property"' in line]
    ppath = tmp_path / "props.json"
    ppath.write_bytes(b"[\n" + b"\n".join(props) + b"\n]\n")
    assert extract_dump(path, property_source=ppath).catalog == single.catalog
