"""Hill-number diversity, importance scores, rankings and distribution summaries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, TextIO

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .ingest import FrequencyTables
from .model import pid_sort_key


class EmptyAbundanceError(ValueError):
    def __init__(self) -> None:
        super().__init__("empty abundance")


class QualifierNotFoundError(KeyError):
    def __init__(self, qualifier: str) -> None:
        super().__init__(f"qualifier not found: {qualifier}")
        self.qualifier = qualifier


def _check_weights(m: Mapping[str, float]) -> None:
    for k, w in m.items():
        if not math.isfinite(w):
            raise ValueError(f"weight for {k!r} is not finite")
        if w < 0:
            raise ValueError(f"weight for {k!r} is negative")


def relative_frequencies(m: Mapping[str, float]) -> dict[str, float]:
    """Normalize ``m`` to sum to one, dropping zero-weight keys.

    Raises
    ------
    EmptyAbundanceError
        If no key has positive weight.
    """
    _check_weights(m)
    total = math.fsum(m.values())
    if total <= 0:
        raise EmptyAbundanceError()
    return {k: w / total for k, w in m.items() if w > 0}


def hill_diversity(m: Mapping[str, float]) -> float:
    r"""Hill number of order 1 (exponential of the Shannon entropy) of abundances ``m``.

    .. math::

       {}^1D = \exp\left(-\sum_i p_i \ln p_i\right)

    where :math:`p_i` are the relative frequencies. The result is the
    effective number of equally abundant keys; it lies in ``[1, R]`` with
    :math:`R` the number of positive keys. Zero-weight keys contribute
    nothing. The entropy sum is accumulated with :func:`math.fsum`.
    """
    rel = relative_frequencies(m)
    if len(rel) == 1:
        return 1.0
    entropy = -math.fsum(p * math.log(p) for p in rel.values())
    # rounding can push the value a hair outside the exact bounds
    return min(max(math.exp(entropy), 1.0), float(len(rel)))


def _qualifier_row(q: str, t: FrequencyTables) -> Mapping[str, int]:
    row = t.p_q_freq.get(q)
    if not row:
        raise QualifierNotFoundError(q)
    return row


def proportional_frequencies(q: str, t: FrequencyTables) -> dict[str, float]:
    """``PF(p, q) = F(p, q) / GF(p)`` for every property qualified by ``q``."""
    out = {}
    for p, n in _qualifier_row(q, t).items():
        gf = t.p_freq.get(p, 0)
        if gf <= 0:
            raise ValueError(f"no global frequency for {p} (qualified by {q})")
        out[p] = n / gf
    return out


def raw_diversity(q: str, t: FrequencyTables) -> float:
    return hill_diversity(_qualifier_row(q, t))


def proportional_diversity(q: str, t: FrequencyTables) -> float:
    # PF values do not sum to one; hill_diversity renormalizes them
    return hill_diversity(proportional_frequencies(q, t))


@dataclass(frozen=True)
class DiversityScore:
    qualifier: str
    frequency: int
    property_count: int
    diversity_raw: float
    diversity_proportional: float
    score: float
    rank: int = 0


DIVERSITY_KINDS = ("proportional", "raw")


def _rank_key(s: DiversityScore) -> tuple:
    return (-s.score, -s.frequency, pid_sort_key(s.qualifier))


def importance_scores(t: FrequencyTables, diversity: str = "proportional") -> list[DiversityScore]:
    """Score every admissible qualifier by ``frequency * diversity`` and rank them.

    Ties on score fall back to higher frequency, then lower numeric ID.
    ``diversity="raw"`` scores with the plain frequency-based index instead.
    """
    if diversity not in DIVERSITY_KINDS:
        raise ValueError(f"diversity must be one of {DIVERSITY_KINDS}")
    records = []
    for q in t.p_q_freq:
        row = _qualifier_row(q, t)
        d_raw = hill_diversity(row)
        d_prop = proportional_diversity(q, t)
        freq = t.q_freq.get(q, sum(row.values()))
        d = d_prop if diversity == "proportional" else d_raw
        records.append(DiversityScore(q, freq, len(row), d_raw, d_prop, freq * d))
    records.sort(key=_rank_key)
    return [
        DiversityScore(r.qualifier, r.frequency, r.property_count, r.diversity_raw,
                       r.diversity_proportional, r.score, i)
        for i, r in enumerate(records, 1)
    ]


def coverage_of_top_k(t: FrequencyTables, scores: Sequence[DiversityScore], k: int) -> float:
    """Fraction of all qualifier-value pairs whose qualifier ranks in the top ``k``."""
    if k < 0 or k > len(scores):
        raise ValueError(f"k must be in [0, {len(scores)}]")
    if k == 0 or t.total_qualifications == 0:
        return 0.0
    top = sorted(scores, key=lambda s: s.rank)[:k]
    covered = sum(t.q_pair_freq.get(s.qualifier, 0) for s in top)
    return covered / t.total_qualifications


@dataclass(frozen=True)
class ThresholdBucket:
    threshold: int
    count_above: int
    percent_above: float
    count_below: int
    percent_below: float


@dataclass(frozen=True)
class FrequencySummary:
    qualifiers: int
    buckets: list[ThresholdBucket]
    # (rank, qualifier, frequency), most frequent first
    series: list[tuple[int, str, int]]


def frequency_distribution(t: FrequencyTables, thresholds: Sequence[int]) -> FrequencySummary:
    """How many qualifiers lie strictly above / strictly below each threshold."""
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly increasing")
    freqs = {q: f for q, f in t.q_freq.items() if f > 0}
    n = len(freqs)
    buckets = []
    for th in thresholds:
        above = sum(1 for f in freqs.values() if f > th)
        below = sum(1 for f in freqs.values() if f < th)
        buckets.append(ThresholdBucket(
            th, above, 100.0 * above / n if n else 0.0, below, 100.0 * below / n if n else 0.0
        ))
    ordered = sorted(freqs, key=lambda q: (-freqs[q], pid_sort_key(q)))
    series = [(i, q, freqs[q]) for i, q in enumerate(ordered, 1)]
    return FrequencySummary(n, buckets, series)


# --- CSV ----------------------------------------------------------------------

SCORE_COLUMNS = (
    "rank", "qualifier_id", "frequency", "property_count",
    "diversity_raw", "diversity_proportional", "score",
)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_scores_csv(scores: Iterable[DiversityScore], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for s in scores:
        w.writerow([s.rank, s.qualifier, s.frequency, s.property_count,
                    _fmt(s.diversity_raw), _fmt(s.diversity_proportional), _fmt(s.score)])


def scores_to_csv(scores: Iterable[DiversityScore]) -> str:
    buf = io.StringIO()
    write_scores_csv(scores, buf)
    return buf.getvalue()


def read_scores_csv(fh: TextIO) -> list[DiversityScore]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or tuple(reader.fieldnames) != SCORE_COLUMNS:
        raise ValueError(f"score CSV header must be {','.join(SCORE_COLUMNS)}")
    out = []
    for lineno, row in enumerate(reader, 2):
        try:
            out.append(DiversityScore(
                qualifier=row["qualifier_id"],
                frequency=int(row["frequency"]),
                property_count=int(row["property_count"]),
                diversity_raw=float(row["diversity_raw"]),
                diversity_proportional=float(row["diversity_proportional"]),
                score=float(row["score"]),
                rank=int(row["rank"]),
            ))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


# --- estimator ------------------------------------------------------------------

def check_tables(X: object) -> FrequencyTables:
    """Validate estimator input: must be coherent, non-empty :class:`FrequencyTables`."""
    if not isinstance(X, FrequencyTables):
        raise TypeError(f"expected FrequencyTables, got {type(X).__name__}")
    problems = X.check_consistency()
    if problems:
        raise ValueError("inconsistent frequency tables: " + "; ".join(problems[:5]))
    if not X.p_q_freq:
        raise ValueError("frequency tables contain no qualifiers")
    return X


class QualifierScorer(TransformerMixin, BaseEstimator):
    """Rank qualifiers by importance score.

    ``fit`` takes :class:`FrequencyTables`; ``transform`` returns one row
    per ranked qualifier with the columns of :meth:`get_feature_names_out`.

    Parameters
    ----------
    diversity : {"proportional", "raw"}
        Diversity index multiplied with frequency to form the score.
    top_k : int or None
        Keep only the ``top_k`` best-ranked qualifiers.
    """

    _features = ("frequency", "property_count", "diversity_raw", "diversity_proportional", "score")

    def __init__(self, diversity: str = "proportional", top_k: Optional[int] = None):
        self.diversity = diversity
        self.top_k = top_k

    def fit(self, X: FrequencyTables, y: None = None) -> "QualifierScorer":
        tables = check_tables(X)
        if self.top_k is not None and self.top_k < 0:
            raise ValueError("top_k must be non-negative")
        scores = importance_scores(tables, self.diversity)
        self.n_qualifiers_ = len(scores)
        if self.top_k is not None:
            scores = scores[: self.top_k]
        self.scores_ = scores
        self.qualifiers_ = [s.qualifier for s in scores]
        self.coverage_ = coverage_of_top_k(tables, scores, len(scores))
        return self

    def transform(self, X: Optional[FrequencyTables] = None) -> np.ndarray:
        check_is_fitted(self, "scores_")
        return np.array(
            [[getattr(s, f) for f in self._features] for s in self.scores_], dtype=float
        ).reshape(-1, len(self._features))

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.array(self._features, dtype=object)
