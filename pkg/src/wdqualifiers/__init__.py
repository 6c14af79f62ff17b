"""Frequency, diversity and taxonomy analysis of Wikidata qualifiers."""

from .ingest import (
    FrequencyTables,
    PropertyCatalog,
    collect_property_catalog,
    extract_dump,
    extract_frequency_tables,
    merge_tables,
    stream_entities,
)
from .metrics import (
    DiversityScore,
    QualifierScorer,
    coverage_of_top_k,
    frequency_distribution,
    hill_diversity,
    importance_scores,
    proportional_diversity,
    proportional_frequencies,
    relative_frequencies,
)
from .model import AdmissibilityConfig, EntityId, Statement, is_example_statement, qualifier_admissibility

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityConfig",
    "DiversityScore",
    "EntityId",
    "FrequencyTables",
    "PropertyCatalog",
    "QualifierScorer",
    "Statement",
    "collect_property_catalog",
    "coverage_of_top_k",
    "extract_dump",
    "extract_frequency_tables",
    "frequency_distribution",
    "hill_diversity",
    "importance_scores",
    "is_example_statement",
    "merge_tables",
    "proportional_diversity",
    "proportional_frequencies",
    "qualifier_admissibility",
    "relative_frequencies",
    "stream_entities",
]
