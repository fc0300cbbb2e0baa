"""
Query expansion.

A query is expanded by taking the union of up to four term sets:

- **keyword**: the analyzed query itself (the baseline),
- **word_embedding**: the ``k`` nearest vocabulary words of each query word,
- **dbpedia**: the ``dct:subject`` labels of the concept each word names,
- **hypernym**: hyponym labels of each word whose confidence clears a threshold.

Expanders are fed surface words (punctuation and stopwords removed, not
stemmed) and every value they produce goes through
:func:`~qexrank.analysis.analyze_phrase`, so the union only ever holds
index-compatible tokens. When several sources produce the same token the
entry kept is the one from the higher-precedence source
(keyword > word_embedding > dbpedia > hypernym). No term carries a weight.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .analysis import AnalyzerConfig, analyze_phrase, query_words
from .errors import ExpansionError, KbFetchError
from .ingestion import Scenario
from .resources import EmbeddingStore, HypernymGraph, SubjectSource
from .templates import TemplateLoader

logger = logging.getLogger("qexrank")

DEFAULT_K_NEIGHBORS = 2
DEFAULT_HYPERNYM_THRESHOLD = 0.75


class ExpansionSource(str, Enum):
    KEYWORD = "keyword"
    WORD_EMBEDDING = "word_embedding"
    DBPEDIA = "dbpedia"
    HYPERNYM = "hypernym"

    @property
    def short(self) -> str:
        return _SHORT[self]

    @property
    def precedence(self) -> int:
        return SOURCE_PRECEDENCE.index(self)

    @classmethod
    def parse(cls, value: Union[str, "ExpansionSource"]) -> "ExpansionSource":
        if isinstance(value, ExpansionSource):
            return value
        text = str(value).strip()
        for source in cls:
            if text.lower() == source.value or text.upper() == source.short:
                return source
        raise ExpansionError(
            f"Unknown expansion source {value!r}; use KW, WE, DB, HN or their long names"
        )


SOURCE_PRECEDENCE: Tuple[ExpansionSource, ...] = (
    ExpansionSource.KEYWORD,
    ExpansionSource.WORD_EMBEDDING,
    ExpansionSource.DBPEDIA,
    ExpansionSource.HYPERNYM,
)

_SHORT = {
    ExpansionSource.KEYWORD: "KW",
    ExpansionSource.WORD_EMBEDDING: "WE",
    ExpansionSource.DBPEDIA: "DB",
    ExpansionSource.HYPERNYM: "HN",
}

EXPANSION_SOURCES = SOURCE_PRECEDENCE[1:]


def parse_sources(spec: Union[str, Iterable[str]]) -> FrozenSet[ExpansionSource]:
    """Parse "KW+WE", "kw,we" or an iterable of names."""
    if isinstance(spec, str):
        parts = [p for p in spec.replace(",", "+").split("+") if p.strip()]
    else:
        parts = list(spec)
    return frozenset(ExpansionSource.parse(p) for p in parts)


@dataclass(frozen=True)
class ExpansionTerm:
    """One token of an expanded query and where it came from.

    ``confidence`` is the hypernym-graph confidence for hypernym terms and
    the cosine similarity for embedding terms; it is informational only.
    """

    term: str
    source: ExpansionSource
    origin_query_term: str
    raw_value: str
    confidence: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "term": self.term,
            "source": self.source.value,
            "origin": self.origin_query_term,
            "raw_value": self.raw_value,
        }
        if self.confidence is not None:
            out["confidence"] = self.confidence
        return out


@dataclass(frozen=True)
class ExpandedQuery:
    query_id: str
    scenario: Scenario
    terms: Tuple[ExpansionTerm, ...]
    enabled_sources: FrozenSet[ExpansionSource]
    keyword_tokens: FrozenSet[str] = frozenset()
    contributions: Mapping[ExpansionSource, FrozenSet[str]] = field(default_factory=dict)

    @property
    def tokens(self) -> FrozenSet[str]:
        return frozenset(t.term for t in self.terms)

    def from_source(self, source: ExpansionSource) -> List[ExpansionTerm]:
        return [t for t in self.terms if t.source is source]

    def added_by(self, source: ExpansionSource) -> FrozenSet[str]:
        """Tokens ``source`` produced that the keyword query does not have."""
        return self.contributions.get(source, frozenset()) - self.keyword_tokens

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "scenario": self.scenario.value,
            "enabled_sources": sorted(s.value for s in self.enabled_sources),
            "terms": [t.to_dict() for t in self.terms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


@dataclass(frozen=True)
class ExpansionResources:
    """What :func:`combine` needs. Sources whose resource is ``None`` cannot be enabled."""

    analyzer: AnalyzerConfig
    embeddings: Optional[EmbeddingStore] = None
    hypernyms: Optional[HypernymGraph] = None
    kb: Optional[SubjectSource] = None
    k_neighbors: int = DEFAULT_K_NEIGHBORS
    hypernym_threshold: float = DEFAULT_HYPERNYM_THRESHOLD
    max_subjects: Optional[int] = None

    def available(self) -> FrozenSet[ExpansionSource]:
        present = {ExpansionSource.KEYWORD}
        if self.embeddings is not None:
            present.add(ExpansionSource.WORD_EMBEDDING)
        if self.kb is not None:
            present.add(ExpansionSource.DBPEDIA)
        if self.hypernyms is not None:
            present.add(ExpansionSource.HYPERNYM)
        return frozenset(present)


def _dedup(terms: Iterable[ExpansionTerm]) -> List[ExpansionTerm]:
    kept: Dict[str, ExpansionTerm] = {}
    for term in terms:
        kept.setdefault(term.term, term)
    return list(kept.values())


def _phrase_terms(
    value: str,
    origin: str,
    source: ExpansionSource,
    analyzer: AnalyzerConfig,
    confidence: Optional[float] = None,
) -> List[ExpansionTerm]:
    return [
        ExpansionTerm(term=tok, source=source, origin_query_term=origin, raw_value=value,
                      confidence=confidence)
        for tok in analyze_phrase(value, analyzer)
    ]


# ── Expanders ──────────────────────────────────────────────────────────


def keyword_terms(text: str, analyzer: AnalyzerConfig) -> List[ExpansionTerm]:
    """The baseline keyword query, tagged with each token's source word."""
    out: List[ExpansionTerm] = []
    for word in query_words(text, analyzer):
        out.extend(_phrase_terms(word, word, ExpansionSource.KEYWORD, analyzer))
    return _dedup(out)


def expand_word_embedding(
    query_terms: Sequence[str],
    store: Optional[EmbeddingStore],
    k: int = DEFAULT_K_NEIGHBORS,
    analyzer: Optional[AnalyzerConfig] = None,
) -> List[ExpansionTerm]:
    """The ``k`` most similar vocabulary words of each query word.

    Neighbours that are the word itself, another query word, a stopword,
    or that do not analyze to exactly one token are skipped, and the next
    neighbour takes their place.
    """
    if store is None or len(store) == 0:
        raise ExpansionError("Word-embedding expansion needs a loaded, non-empty store")
    if k < 1:
        raise ExpansionError(f"k_neighbors must be >= 1, got {k}")
    analyzer = analyzer or AnalyzerConfig()

    originals = frozenset(w.lower() for w in query_terms)
    exclude = originals | analyzer.stopwords

    def single_token(word: str) -> bool:
        return len(analyze_phrase(word, analyzer)) == 1

    out: List[ExpansionTerm] = []
    for word in query_terms:
        word = word.lower()
        for neighbour, cosine in store.nearest(word, k, exclude=exclude, accept=single_token):
            out.extend(_phrase_terms(neighbour, word, ExpansionSource.WORD_EMBEDDING, analyzer,
                                     confidence=cosine))
    return _dedup(out)


def expand_dbpedia(
    query_terms: Sequence[str],
    kb: Optional[SubjectSource],
    analyzer: Optional[AnalyzerConfig] = None,
    max_subjects: Optional[int] = None,
) -> List[ExpansionTerm]:
    """Tokens of every subject label of each word's KB concept.

    A lookup that fails is logged and contributes nothing; it never
    aborts the query.
    """
    if kb is None:
        raise ExpansionError("DBpedia expansion needs a KB cache or client")
    if max_subjects is not None and max_subjects < 1:
        raise ExpansionError(f"max_subjects must be >= 1, got {max_subjects}")
    analyzer = analyzer or AnalyzerConfig()

    out: List[ExpansionTerm] = []
    for word in query_terms:
        word = word.lower()
        try:
            subjects = kb.subjects_for(word)
        except KbFetchError as exc:
            logger.warning("KB lookup for %r failed: %s", word, exc)
            continue
        if not subjects:
            continue
        if max_subjects is not None:
            subjects = list(subjects)[:max_subjects]
        for label in subjects:
            out.extend(_phrase_terms(label, word, ExpansionSource.DBPEDIA, analyzer))
    return _dedup(out)


def expand_hypernym(
    query_terms: Sequence[str],
    graph: Optional[HypernymGraph],
    threshold: float = DEFAULT_HYPERNYM_THRESHOLD,
    analyzer: Optional[AnalyzerConfig] = None,
) -> List[ExpansionTerm]:
    """Tokens of the hyponym labels under each word with confidence >= threshold."""
    if graph is None:
        raise ExpansionError("Hypernym expansion needs a loaded hypernym graph")
    if not 0.0 <= threshold <= 1.0:
        raise ExpansionError(f"hypernym threshold must be in [0, 1], got {threshold}")
    analyzer = analyzer or AnalyzerConfig()

    out: List[ExpansionTerm] = []
    for word in query_terms:
        word = word.lower()
        for edge in graph.hyponyms(word, threshold):
            out.extend(_phrase_terms(edge.label, word, ExpansionSource.HYPERNYM, analyzer,
                                     confidence=edge.confidence))
    return _dedup(out)


# ── Union ──────────────────────────────────────────────────────────────


def combine(
    query_id: str,
    scenario: Union[str, Scenario],
    original_text: str,
    enabled: Iterable[Union[str, ExpansionSource]],
    resources: ExpansionResources,
) -> ExpandedQuery:
    """Expand one query with the enabled sources and take the union."""
    sources = frozenset(ExpansionSource.parse(s) for s in enabled)
    if not sources:
        raise ExpansionError("At least one expansion source must be enabled")
    missing = sources - resources.available()
    if missing:
        names = ", ".join(sorted(s.value for s in missing))
        raise ExpansionError(f"No resource loaded for enabled source(s): {names}")

    analyzer = resources.analyzer
    words = query_words(original_text, analyzer)
    keyword = keyword_terms(original_text, analyzer)

    produced: Dict[ExpansionSource, List[ExpansionTerm]] = {}
    if ExpansionSource.KEYWORD in sources:
        produced[ExpansionSource.KEYWORD] = keyword
    if ExpansionSource.WORD_EMBEDDING in sources:
        produced[ExpansionSource.WORD_EMBEDDING] = expand_word_embedding(
            words, resources.embeddings, resources.k_neighbors, analyzer)
    if ExpansionSource.DBPEDIA in sources:
        produced[ExpansionSource.DBPEDIA] = expand_dbpedia(
            words, resources.kb, analyzer, resources.max_subjects)
    if ExpansionSource.HYPERNYM in sources:
        produced[ExpansionSource.HYPERNYM] = expand_hypernym(
            words, resources.hypernyms, resources.hypernym_threshold, analyzer)

    merged: Dict[str, ExpansionTerm] = {}
    for source in SOURCE_PRECEDENCE:
        for term in produced.get(source, ()):
            merged.setdefault(term.term, term)

    return ExpandedQuery(
        query_id=query_id,
        scenario=Scenario.parse(scenario),
        terms=tuple(sorted(merged.values(), key=lambda t: t.term)),
        enabled_sources=sources,
        keyword_tokens=frozenset(t.term for t in keyword),
        contributions={s: frozenset(t.term for t in terms) for s, terms in produced.items()},
    )


# ── Statistics ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ExpansionStats:
    """Average query size and per-source word additions over a query set."""

    n_queries: int
    keyword_mean: float
    added: Mapping[ExpansionSource, float]
    union_added: float

    def to_dict(self) -> dict:
        return {
            "n_queries": self.n_queries,
            "keyword_mean": self.keyword_mean,
            "added": {s.value: v for s, v in self.added.items()},
            "union_added": self.union_added,
        }


def expansion_stats(queries: Sequence[ExpandedQuery]) -> ExpansionStats:
    """Mean keyword length and mean number of new tokens each source adds.

    A source counts only tokens not already in the keyword query. The
    union figure counts new tokens across all expansion sources together.
    """
    if not queries:
        raise ExpansionError("expansion_stats needs at least one query")
    n = len(queries)
    added = {
        source: sum(len(q.added_by(source)) for q in queries) / n
        for source in EXPANSION_SOURCES
    }
    union_total = 0
    for q in queries:
        new: set = set()
        for source in EXPANSION_SOURCES:
            new |= q.added_by(source)
        union_total += len(new)
    return ExpansionStats(
        n_queries=n,
        keyword_mean=sum(len(q.keyword_tokens) for q in queries) / n,
        added=added,
        union_added=union_total / n,
    )


def render_expansion(query: ExpandedQuery) -> str:
    """Plain-text dump: keyword tokens, then what each expansion source added."""
    sections = []
    for source in EXPANSION_SOURCES:
        if source not in query.enabled_sources:
            continue
        sections.append({
            "source": source.value,
            "terms": [
                {
                    "term": t.term,
                    "origin": t.origin_query_term,
                    "raw_value": t.raw_value,
                    "confidence": t.confidence,
                }
                for t in query.from_source(source)
            ],
        })
    keyword_on = ExpansionSource.KEYWORD in query.enabled_sources
    return TemplateLoader.render("expansion.txt.j2", {
        "query_id": query.query_id,
        "scenario": query.scenario.value,
        "sources": [s.short for s in SOURCE_PRECEDENCE if s in query.enabled_sources],
        "keyword": sorted(query.keyword_tokens) if keyword_on else None,
        "sections": sections,
        "total": len(query.terms),
    })
