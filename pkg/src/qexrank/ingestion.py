"""
Loading and validating everything qexrank reads from disk.

Every loader either returns a value that satisfies its type's invariants
or raises :class:`~qexrank.errors.IngestionError` naming the file and the
line (or record) at fault.

Canonical dataset format (one JSON object per line, one line per query)::

    {"query_id": "Q268", "scenario": "EN", "text": "...",
     "candidates": [{"doc_id": "Q268_R4", "text": "...", "relevance": "PerfectMatch"}, ...]}

``text`` may be replaced by ``subject`` + ``body`` on both queries and
candidates; the two are joined with one space.
"""
from __future__ import annotations

import json
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .analysis import AnalyzerConfig, analyze
from .errors import IngestionError
from .index import Document
from .resources import (
    EmbeddingStore,
    HypernymGraph,
    HyponymEdge,
    KbEntry,
    KbSubjectCache,
)
from .utils import PathManager

logger = logging.getLogger("qexrank")

DEFAULT_CANDIDATES = 10


class Scenario(str, Enum):
    EN = "EN"
    MT = "MT"

    @classmethod
    def parse(cls, value: Union[str, "Scenario"]) -> "Scenario":
        if isinstance(value, Scenario):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise IngestionError(f"Unknown scenario {value!r}; expected EN or MT") from None


class Relevance(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"

    @classmethod
    def parse(cls, label: object) -> "Relevance":
        """Map shared-task labels onto binary relevance.

        PerfectMatch and Relevant count as relevant, Irrelevant does not.
        """
        normalized = str(label).strip().lower()
        if normalized in ("perfectmatch", "relevant"):
            return cls.RELEVANT
        if normalized == "irrelevant":
            return cls.IRRELEVANT
        raise ValueError(f"unknown relevance label {label!r}")


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    scenario: Scenario
    text: str
    candidates: Tuple[str, ...]
    qrels: Mapping[str, Relevance]

    @property
    def relevant_ids(self) -> frozenset:
        return frozenset(d for d, rel in self.qrels.items() if rel is Relevance.RELEVANT)


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    scenario: Scenario
    queries: Tuple[QueryRecord, ...]
    documents: Tuple[Document, ...]
    _by_query: Dict[str, QueryRecord] = field(default_factory=dict, repr=False, compare=False)
    _by_doc: Dict[str, Document] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_query", {q.query_id: q for q in self.queries})
        object.__setattr__(self, "_by_doc", {d.doc_id: d for d in self.documents})

    @property
    def query_ids(self) -> List[str]:
        return [q.query_id for q in self.queries]

    def query(self, query_id: str) -> QueryRecord:
        try:
            return self._by_query[query_id]
        except KeyError:
            raise IngestionError(
                f"Unknown query id {query_id!r} in {self.name}/{self.scenario.value} split"
            ) from None

    def has_query(self, query_id: str) -> bool:
        return query_id in self._by_query

    def document(self, doc_id: str) -> Document:
        return self._by_doc[doc_id]


def join_text(subject: object, body: object) -> str:
    parts = [str(p).strip() for p in (subject, body) if p]
    return " ".join(p for p in parts if p)


def _record_text(rec: Mapping) -> Optional[str]:
    if "text" in rec and rec["text"] is not None:
        return str(rec["text"])
    if "subject" in rec or "body" in rec:
        return join_text(rec.get("subject"), rec.get("body"))
    return None


def _iter_json_lines(path: Path) -> Iterator[Tuple[int, dict]]:
    try:
        fh = Path(path).open(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open file: {exc}", path=path) from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"invalid JSON ({exc.msg})", path=path, line=lineno) from exc
            if not isinstance(rec, dict):
                raise IngestionError("record is not a JSON object", path=path, line=lineno)
            yield lineno, rec


# ── Dataset ────────────────────────────────────────────────────────────


def _has_whitespace(value: str) -> bool:
    return any(ch.isspace() for ch in value)


def load_dataset(
    path: Path,
    scenario: Optional[Union[str, Scenario]] = None,
    split: str = "test",
    analyzer: Optional[AnalyzerConfig] = None,
    expected_candidates: Optional[int] = DEFAULT_CANDIDATES,
) -> DatasetSplit:
    """Load one split of the re-ranking dataset.

    ``scenario`` fills in records that carry none and must agree with
    records that do. ``expected_candidates=None`` disables the
    candidate-count check.
    """
    analyzer = analyzer or AnalyzerConfig()
    wanted = Scenario.parse(scenario) if scenario is not None else None

    queries: List[QueryRecord] = []
    documents: List[Document] = []
    seen_queries: Dict[str, int] = {}
    seen_docs: Dict[str, str] = {}
    split_scenario = wanted

    for lineno, rec in _iter_json_lines(path):
        qid = rec.get("query_id")
        if not qid:
            raise IngestionError("missing query_id", path=path, line=lineno)
        qid = str(qid)
        if _has_whitespace(qid):
            raise IngestionError(f"query_id {qid!r} contains whitespace", path=path, line=lineno)
        if qid in seen_queries:
            raise IngestionError(
                f"duplicate query_id (first seen on line {seen_queries[qid]})",
                path=path, line=lineno, record=qid,
            )
        seen_queries[qid] = lineno

        raw_scenario = rec.get("scenario")
        try:
            rec_scenario = Scenario.parse(raw_scenario) if raw_scenario else wanted
        except IngestionError as exc:
            raise IngestionError(str(exc), path=path, line=lineno, record=qid) from None
        if rec_scenario is None:
            raise IngestionError("record has no scenario and none was given", path=path,
                                 line=lineno, record=qid)
        if split_scenario is None:
            split_scenario = rec_scenario
        if rec_scenario is not split_scenario:
            raise IngestionError(
                f"scenario {rec_scenario.value} does not match split scenario "
                f"{split_scenario.value}",
                path=path, line=lineno, record=qid,
            )

        text = _record_text(rec)
        if text is None:
            raise IngestionError("query has no text", path=path, line=lineno, record=qid)

        raw_candidates = rec.get("candidates")
        if not isinstance(raw_candidates, list):
            raise IngestionError("candidates must be a list", path=path, line=lineno, record=qid)
        if expected_candidates is not None and len(raw_candidates) != expected_candidates:
            raise IngestionError(
                f"expected {expected_candidates} candidates, found {len(raw_candidates)}",
                path=path, line=lineno, record=qid,
            )

        candidate_ids: List[str] = []
        qrels: Dict[str, Relevance] = {}
        for cand in raw_candidates:
            if not isinstance(cand, dict) or not cand.get("doc_id"):
                raise IngestionError("candidate without doc_id", path=path, line=lineno, record=qid)
            doc_id = str(cand["doc_id"])
            if _has_whitespace(doc_id):
                raise IngestionError(f"doc_id {doc_id!r} contains whitespace", path=path,
                                     line=lineno, record=qid)
            if doc_id in qrels:
                raise IngestionError(f"candidate {doc_id!r} listed twice", path=path,
                                     line=lineno, record=qid)
            if doc_id in seen_docs:
                raise IngestionError(
                    f"document {doc_id!r} already belongs to query {seen_docs[doc_id]!r}",
                    path=path, line=lineno, record=qid,
                )
            doc_text = _record_text(cand)
            if doc_text is None:
                raise IngestionError(f"dangling doc_id {doc_id!r}: no document text",
                                     path=path, line=lineno, record=qid)
            try:
                qrels[doc_id] = Relevance.parse(cand.get("relevance"))
            except ValueError as exc:
                raise IngestionError(f"{exc} for {doc_id!r}", path=path, line=lineno,
                                     record=qid) from None
            candidate_ids.append(doc_id)
            seen_docs[doc_id] = qid
            documents.append(Document(
                doc_id=doc_id, query_id=qid, raw_text=doc_text,
                terms=analyze(doc_text, analyzer),
            ))

        queries.append(QueryRecord(
            query_id=qid,
            scenario=rec_scenario,
            text=text,
            candidates=tuple(candidate_ids),
            qrels=qrels,
        ))

    if split_scenario is None:
        split_scenario = Scenario.EN
    logger.info("Loaded %s split from %s: %d queries, %d documents",
                split, path, len(queries), len(documents))
    return DatasetSplit(
        name=split,
        scenario=split_scenario,
        queries=tuple(queries),
        documents=tuple(documents),
    )


def check_alignment(en: DatasetSplit, mt: DatasetSplit) -> None:
    """EN and MT versions of a split may differ only in query text."""
    if set(en.query_ids) != set(mt.query_ids):
        missing = sorted(set(en.query_ids) ^ set(mt.query_ids))
        raise IngestionError(
            f"EN/MT {en.name} splits disagree on query ids: {', '.join(missing[:5])}"
        )
    for q_en in en.queries:
        q_mt = mt.query(q_en.query_id)
        if q_en.candidates != q_mt.candidates or dict(q_en.qrels) != dict(q_mt.qrels):
            raise IngestionError(
                f"EN/MT {en.name} splits disagree on candidates or labels",
                record=q_en.query_id,
            )
    mt_docs = {d.doc_id: d.raw_text for d in mt.documents}
    for doc in en.documents:
        if mt_docs.get(doc.doc_id) != doc.raw_text:
            raise IngestionError(
                f"EN/MT {en.name} splits disagree on document text", record=doc.doc_id
            )


def merge_documents(splits: Sequence[DatasetSplit]) -> List[Document]:
    """Union of documents across splits; shared doc_ids must be identical."""
    merged: Dict[str, Document] = {}
    for split in splits:
        for doc in split.documents:
            prior = merged.get(doc.doc_id)
            if prior is None:
                merged[doc.doc_id] = doc
            elif prior.raw_text != doc.raw_text or prior.query_id != doc.query_id:
                raise IngestionError(
                    f"document appears in several splits with different content "
                    f"({split.name}/{split.scenario.value})",
                    record=doc.doc_id,
                )
    return list(merged.values())


def convert_semeval_xml(
    xml_path: Path,
    out_path: Path,
    scenario: Union[str, Scenario] = Scenario.EN,
    mt_texts: Optional[Mapping[str, str]] = None,
) -> int:
    """Convert a shared-task question-similarity XML file to canonical JSONL.

    ``mt_texts`` (query_id -> translated text) swaps in machine-translated
    query text to produce the MT scenario. Returns the number of queries.
    """
    scenario = Scenario.parse(scenario)
    try:
        root = ET.parse(str(xml_path)).getroot()
    except (ET.ParseError, OSError) as exc:
        raise IngestionError(f"cannot parse XML: {exc}", path=xml_path) from exc

    order: List[str] = []
    texts: Dict[str, str] = {}
    candidates: Dict[str, List[Tuple[int, int, dict]]] = {}
    position = 0
    for org in root.iter("OrgQuestion"):
        qid = org.get("ORGQ_ID")
        if not qid:
            raise IngestionError("OrgQuestion without ORGQ_ID", path=xml_path)
        if qid not in texts:
            order.append(qid)
            texts[qid] = join_text(org.findtext("OrgQSubject"), org.findtext("OrgQBody"))
            candidates[qid] = []
        for rel in org.iter("RelQuestion"):
            doc_id = rel.get("RELQ_ID")
            label = rel.get("RELQ_RELEVANCE2ORGQ")
            if not doc_id or label is None:
                raise IngestionError("RelQuestion without id or relevance", path=xml_path,
                                     record=qid)
            if any(c[2]["doc_id"] == doc_id for c in candidates[qid]):
                continue
            rank = int(rel.get("RELQ_RANKING_ORDER") or 0)
            position += 1
            candidates[qid].append((rank, position, {
                "doc_id": doc_id,
                "text": join_text(rel.findtext("RelQSubject"), rel.findtext("RelQBody")),
                "relevance": Relevance.parse(label).value,
            }))

    lines = []
    for qid in order:
        text = texts[qid]
        if mt_texts is not None:
            if qid not in mt_texts:
                raise IngestionError("no MT text for query", record=qid)
            text = mt_texts[qid]
        cands = [c[2] for c in sorted(candidates[qid], key=lambda c: (c[0], c[1]))]
        lines.append(json.dumps(
            {"query_id": qid, "scenario": scenario.value, "text": text, "candidates": cands},
            ensure_ascii=False,
        ))
    PathManager.atomic_write_lines(Path(out_path), lines)
    return len(order)


def load_mt_texts(path: Path) -> Dict[str, str]:
    """Read ``query_id<TAB>text`` lines."""
    texts: Dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            qid, sep, text = line.partition("\t")
            if not sep:
                raise IngestionError("expected query_id<TAB>text", path=path, line=lineno)
            texts[qid.strip()] = text.strip()
    return texts


# ── Embeddings ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class EmbeddingLoadStats:
    lines: int
    loaded: int
    malformed: int
    duplicates: int


def load_embeddings(path: Path) -> EmbeddingStore:
    """Load ``word v1 ... vd`` text vectors (GloVe layout).

    The first valid line fixes the dimension; a later line of another
    width is a hard error. Lines that are not parseable are counted and
    skipped; repeated words keep their first vector.
    """
    words: List[str] = []
    rows: List[np.ndarray] = []
    seen: set = set()
    dim: Optional[int] = None
    malformed = duplicates = total = 0

    try:
        fh = Path(path).open(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open embeddings: {exc}", path=path) from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            total += 1
            if len(parts) < 2 or not parts[0]:
                malformed += 1
                logger.debug("%s:%d: malformed embedding line", path, lineno)
                continue
            try:
                vector = np.asarray(parts[1:], dtype=np.float64)
            except ValueError:
                malformed += 1
                logger.debug("%s:%d: non-numeric embedding values", path, lineno)
                continue
            if not np.all(np.isfinite(vector)):
                malformed += 1
                continue
            if dim is None:
                dim = vector.shape[0]
            elif vector.shape[0] != dim:
                raise IngestionError(
                    f"vector has {vector.shape[0]} dimensions, expected {dim}",
                    path=path, line=lineno,
                )
            word = parts[0].lower()
            if word in seen:
                duplicates += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(vector)

    if not rows:
        raise IngestionError("no valid embedding lines", path=path)
    if malformed:
        logger.warning("%s: skipped %d malformed embedding line(s)", path, malformed)

    store = EmbeddingStore(words, np.vstack(rows))
    store.load_stats = EmbeddingLoadStats(
        lines=total, loaded=len(words), malformed=malformed, duplicates=duplicates,
    )
    logger.info("Loaded %d vectors (d=%d) from %s", len(words), store.d, path)
    return store


# ── Hypernym graph ─────────────────────────────────────────────────────


def _parse_confidence(value: str) -> Optional[float]:
    try:
        conf = float(value)
    except ValueError:
        return None
    return conf if math.isfinite(conf) else None


def load_hypernym_graph(path: Path) -> HypernymGraph:
    """Load ``hyponym_label<TAB>hypernym_word<TAB>confidence`` rows.

    A first line whose confidence column reads ``confidence`` is a header. Confidences outside [0, 1] are rejected (and reported with
    their line numbers); repeated (hyponym, hypernym) pairs keep the
    highest confidence.
    """
    best: Dict[str, Dict[str, HyponymEdge]] = {}
    rejected: List[int] = []

    try:
        fh = Path(path).open(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open hypernym graph: {exc}", path=path) from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise IngestionError(f"expected 3 tab-separated columns, found {len(cols)}",
                                     path=path, line=lineno)
            label, hypernym, raw_conf = (c.strip() for c in cols)
            conf = _parse_confidence(raw_conf)
            if conf is None:
                if lineno == 1 and raw_conf.lower() == "confidence":
                    continue
                raise IngestionError(f"unparseable confidence {raw_conf!r}", path=path,
                                     line=lineno)
            if not 0.0 <= conf <= 1.0:
                rejected.append(lineno)
                continue
            if not label or not hypernym:
                raise IngestionError("empty hyponym or hypernym", path=path, line=lineno)

            per_word = best.setdefault(hypernym.lower(), {})
            key = label.lower()
            prior = per_word.get(key)
            if prior is None or conf > prior.confidence:
                per_word[key] = HyponymEdge(label=prior.label if prior else label,
                                            confidence=conf)

    if rejected:
        shown = ", ".join(str(n) for n in rejected[:10])
        logger.warning("%s: rejected %d row(s) with confidence outside [0, 1] (lines %s%s)",
                       path, len(rejected), shown, "..." if len(rejected) > 10 else "")

    edges = {
        word: tuple(sorted(per_word.values(), key=lambda e: e.label.lower()))
        for word, per_word in sorted(best.items())
    }
    return HypernymGraph(edges=edges)


# ── KB subject cache ───────────────────────────────────────────────────


def load_kb_cache(path: Path, missing_ok: bool = True) -> KbSubjectCache:
    """Load the line-delimited subject cache. Unknown fields are ignored."""
    path = Path(path)
    if not path.exists():
        if missing_ok:
            return KbSubjectCache()
        raise IngestionError("KB cache file not found", path=path)

    entries = []
    for lineno, rec in _iter_json_lines(path):
        key = rec.get("key")
        subjects = rec.get("subjects")
        fetched_at = rec.get("fetched_at")
        if not isinstance(key, str) or not key.strip():
            raise IngestionError("missing or empty key", path=path, line=lineno)
        if not isinstance(subjects, list) or not all(isinstance(s, str) for s in subjects):
            raise IngestionError("subjects must be a list of strings", path=path, line=lineno)
        if not isinstance(fetched_at, str):
            raise IngestionError("missing fetched_at timestamp", path=path, line=lineno)
        try:
            datetime.fromisoformat(fetched_at.replace("Z", "+00:00"))
        except ValueError:
            raise IngestionError(f"fetched_at {fetched_at!r} is not ISO-8601", path=path,
                                 line=lineno) from None
        entries.append(KbEntry(key=key, subjects=tuple(subjects), fetched_at=fetched_at))
    return KbSubjectCache(entries)


def save_kb_cache(cache: KbSubjectCache, path: Path) -> Path:
    lines = [
        json.dumps(entry.to_record(), sort_keys=True, ensure_ascii=False)
        for entry in cache.entries()
    ]
    return PathManager.atomic_write_lines(Path(path), lines)
