"""
Inverted index and BM25 scoring.

The index covers the whole document collection; re-ranking scores only a
query's candidate set but always with collection-wide statistics (df,
n_docs, avg|dl|). An index never changes after :func:`build_index`
returns, so scoring is safe from any number of threads.

Scoring follows the usual BM25 with the non-negative idf variant::

    idf(t)   = ln(1 + (N - df + 0.5) / (df + 0.5))
    score    = sum_t idf(t) * f(t,D)(k1+1) / (f(t,D) + k1(1 - b + b|D|/avgdl))

Query terms are a set: repeating a term does not change its weight.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .analysis import TokenStream
from .errors import IndexBuildError, QexrankError, UnknownDocumentError
from .utils import PathManager

logger = logging.getLogger("qexrank")

INDEX_FORMAT = "qexrank-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class Document:
    """An existing question, one of the candidates of ``query_id``."""

    doc_id: str
    query_id: str
    raw_text: str
    terms: TokenStream

    @property
    def length(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if not (self.k1 >= 0 and math.isfinite(self.k1)):
            raise QexrankError(f"BM25 k1 must be a finite value >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise QexrankError(f"BM25 b must be in [0, 1], got {self.b}")

    def as_dict(self) -> dict:
        return {"k1": self.k1, "b": self.b}


@dataclass(frozen=True)
class RankedEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: Tuple[RankedEntry, ...]

    def doc_ids(self) -> List[str]:
        return [e.doc_id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class InvertedIndex:
    """Postings plus the statistics BM25 needs.

    ``postings[t]`` lists ``(doc_id, tf)`` in document insertion order.
    ``owners`` remembers each document's query_id so persisted indexes can
    be re-validated against a dataset.
    """

    postings: Mapping[str, Tuple[Tuple[str, int], ...]]
    doc_freq: Mapping[str, int]
    doc_lengths: Mapping[str, int]
    owners: Mapping[str, str]
    n_docs: int
    avg_doc_length: float
    _tf: Dict[str, Dict[str, int]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self._tf:
            lookup: Dict[str, Dict[str, int]] = {}
            for term, plist in self.postings.items():
                lookup[term] = dict(plist)
            object.__setattr__(self, "_tf", lookup)

    @property
    def vocabulary_size(self) -> int:
        return len(self.postings)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self.doc_lengths

    def term_frequency(self, term: str, doc_id: str) -> int:
        return self._tf.get(term, {}).get(doc_id, 0)

    def idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def summary(self) -> dict:
        return {
            "n_docs": self.n_docs,
            "avg_doc_length": self.avg_doc_length,
            "vocabulary_size": self.vocabulary_size,
        }


def _assemble(entries: Iterable[Tuple[str, str, Mapping[str, int], int]]) -> InvertedIndex:
    """Build an index from ``(doc_id, query_id, term_counts, length)`` rows."""
    postings: Dict[str, List[Tuple[str, int]]] = {}
    doc_lengths: Dict[str, int] = {}
    owners: Dict[str, str] = {}

    for doc_id, query_id, counts, length in entries:
        if doc_id in doc_lengths:
            raise IndexBuildError(f"Duplicate document id: {doc_id!r}")
        doc_lengths[doc_id] = length
        owners[doc_id] = query_id
        for term in sorted(counts):
            postings.setdefault(term, []).append((doc_id, counts[term]))

    n_docs = len(doc_lengths)
    avg = sum(doc_lengths.values()) / n_docs if n_docs else 0.0
    frozen = {term: tuple(plist) for term, plist in postings.items()}
    return InvertedIndex(
        postings=frozen,
        doc_freq={term: len(plist) for term, plist in frozen.items()},
        doc_lengths=doc_lengths,
        owners=owners,
        n_docs=n_docs,
        avg_doc_length=avg,
    )


def build_index(docs: Sequence[Document]) -> InvertedIndex:
    """Index analyzed documents. An empty list gives a valid, unsearchable index."""
    index = _assemble(
        (doc.doc_id, doc.query_id, Counter(doc.terms), doc.length) for doc in docs
    )
    logger.info(
        "Indexed %d documents (avg length %.2f, %d terms)",
        index.n_docs, index.avg_doc_length, index.vocabulary_size,
    )
    return index


# ── Scoring ─────────────────────────────────────────────────────────────


def _require_searchable(index: InvertedIndex) -> None:
    if index.n_docs == 0:
        raise QexrankError("Index is empty; nothing can be scored")


def _score(index: InvertedIndex, terms: Sequence[str], doc_id: str, params: Bm25Params) -> float:
    # A collection of empty documents has avgdl 0; every tf is 0 there anyway.
    ratio = index.doc_lengths[doc_id] / index.avg_doc_length if index.avg_doc_length > 0 else 1.0
    length_norm = params.k1 * (1.0 - params.b + params.b * ratio)
    total = 0.0
    for term in terms:
        tf = index.term_frequency(term, doc_id)
        if tf == 0:
            continue
        total += index.idf(term) * (tf * (params.k1 + 1.0)) / (tf + length_norm)
    return total


def _distinct(query_terms: Iterable[str]) -> List[str]:
    # Sorted so the float sum is order-independent of how the query was built.
    return sorted(set(query_terms))


def bm25_score(
    index: InvertedIndex,
    query_terms: Iterable[str],
    doc_id: str,
    params: Bm25Params = Bm25Params(),
) -> float:
    _require_searchable(index)
    if doc_id not in index:
        raise UnknownDocumentError(doc_id)
    return _score(index, _distinct(query_terms), doc_id, params)


def rank_documents(
    index: InvertedIndex,
    query_id: str,
    query_terms: Iterable[str],
    candidate_ids: Sequence[str],
    params: Bm25Params = Bm25Params(),
) -> RankedList:
    """Score exactly ``candidate_ids`` and order them.

    Order is score descending, then doc_id ascending, so an empty query
    degrades to plain doc_id order.
    """
    _require_searchable(index)
    seen = set()
    for doc_id in candidate_ids:
        if doc_id not in index:
            raise UnknownDocumentError(doc_id)
        if doc_id in seen:
            raise QexrankError(f"Candidate {doc_id!r} listed twice for query {query_id!r}")
        seen.add(doc_id)

    terms = _distinct(query_terms)
    scored = [(doc_id, _score(index, terms, doc_id, params)) for doc_id in candidate_ids]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return RankedList(
        query_id=query_id,
        entries=tuple(
            RankedEntry(doc_id=doc_id, score=score, rank=rank)
            for rank, (doc_id, score) in enumerate(scored, start=1)
        ),
    )


def rerank_candidates(
    index: InvertedIndex,
    query,
    candidate_ids: Sequence[str],
    params: Bm25Params = Bm25Params(),
) -> RankedList:
    """Re-rank a query's candidates with its expanded term set.

    ``query`` is an :class:`~qexrank.expanders.ExpandedQuery`.
    """
    return rank_documents(index, query.query_id, query.tokens, candidate_ids, params)


# ── Persistence ─────────────────────────────────────────────────────────


def save_index(index: InvertedIndex, path: Path, analyzer: Optional[dict] = None) -> Path:
    """Write the index as versioned JSON lines, atomically.

    Line 1 is a header; each following line is one document with its term
    counts. Loading replays the documents in the same order, so
    avg|dl| and every score come back bit-identical.
    """
    per_doc: Dict[str, Dict[str, int]] = {doc_id: {} for doc_id in index.doc_lengths}
    for term, plist in index.postings.items():
        for doc_id, tf in plist:
            per_doc[doc_id][term] = tf

    header = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "n_docs": index.n_docs,
        "analyzer": analyzer or {},
    }
    lines = [json.dumps(header, sort_keys=True)]
    for doc_id, length in index.doc_lengths.items():
        lines.append(json.dumps(
            {
                "doc_id": doc_id,
                "query_id": index.owners[doc_id],
                "length": length,
                "tf": dict(sorted(per_doc[doc_id].items())),
            },
            sort_keys=True,
            ensure_ascii=False,
        ))
    PathManager.atomic_write(Path(path), "\n".join(lines) + "\n")
    return Path(path)


def read_index_header(path: Path) -> dict:
    try:
        with Path(path).open(encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise IndexBuildError(f"Cannot read index {path}: {exc}") from exc
    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise IndexBuildError(f"{path}:1: index header is not JSON ({exc.msg})") from exc
    if not isinstance(header, dict) or header.get("format") != INDEX_FORMAT:
        raise IndexBuildError(f"{path}: not a qexrank index file")
    if header.get("version") != INDEX_VERSION:
        raise IndexBuildError(
            f"{path}: index version {header.get('version')} is not supported "
            f"(expected {INDEX_VERSION}); rebuild it with `qexrank index`"
        )
    return header


def load_index(path: Path) -> InvertedIndex:
    header = read_index_header(path)
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        next(fh)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                counts = {str(t): int(c) for t, c in rec["tf"].items()}
                rows.append((str(rec["doc_id"]), str(rec["query_id"]), counts, int(rec["length"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise IndexBuildError(f"{path}:{lineno}: malformed index record ({exc})") from exc
            if sum(counts.values()) != rows[-1][3]:
                raise IndexBuildError(f"{path}:{lineno}: term counts do not add up to length")

    index = _assemble(rows)
    if index.n_docs != header.get("n_docs"):
        raise IndexBuildError(
            f"{path}: header says {header.get('n_docs')} documents, found {index.n_docs}"
        )
    return index
