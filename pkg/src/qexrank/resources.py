"""
In-memory expansion resources: word vectors, the hypernym graph and the
knowledge-base subject cache.

Embeddings and the hypernym graph are immutable once built. The subject
cache accepts new entries only from the live KB fetcher, which is
serialized (see :mod:`qexrank.kb_client`).
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import (
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Protocol,
    Sequence,
    Tuple,
)

import numpy as np

from .errors import ExpansionError, IngestionError

CATEGORY_PREFIX = "Category:"


# ── Word embeddings ────────────────────────────────────────────────────


class EmbeddingStore:
    """Word vectors with exact cosine nearest-neighbour search.

    Vectors are L2-normalized once at construction, so cosine similarity
    is a dot product. Lookup is exact on the lowercased surface form.
    """

    def __init__(self, words: Sequence[str], vectors: np.ndarray):
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ExpansionError(
                f"Embedding matrix shape {matrix.shape} does not match {len(words)} words"
            )
        if matrix.shape[0] == 0:
            raise ExpansionError("Embedding store is empty")

        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        self._unit = matrix / norms
        self._unit.setflags(write=False)
        self._words: Tuple[str, ...] = tuple(words)
        self._index: Dict[str, int] = {}
        for i, word in enumerate(self._words):
            self._index.setdefault(word, i)
        self.load_stats = None

    @property
    def d(self) -> int:
        return int(self._unit.shape[1])

    @property
    def words(self) -> Tuple[str, ...]:
        return self._words

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: object) -> bool:
        return word in self._index

    def unit_vector(self, word: str) -> np.ndarray:
        return self._unit[self._index[word]]

    def cosine(self, a: str, b: str) -> float:
        return float(self.unit_vector(a) @ self.unit_vector(b))

    def nearest(
        self,
        word: str,
        k: int,
        exclude: FrozenSet[str] = frozenset(),
        accept: Optional[Callable[[str], bool]] = None,
    ) -> List[Tuple[str, float]]:
        """Top-``k`` neighbours of ``word`` by cosine, ties by word ascending.

        ``word`` itself and anything in ``exclude`` are skipped, as is any
        word ``accept`` rejects. Returns fewer than ``k`` pairs only when the
        vocabulary runs out. Out-of-vocabulary ``word`` returns ``[]``.
        """
        if k < 1:
            raise ExpansionError(f"k must be >= 1, got {k}")
        row = self._index.get(word)
        if row is None:
            return []

        sims = self._unit @ self._unit[row]
        n = len(self._words)
        want = k + len(exclude) + 1
        while True:
            m = min(want, n)
            if m < n:
                top = np.argpartition(-sims, m - 1)[:m]
                cutoff = sims[top].min()
                # Every word tied with the cutoff joins, so the tie rule holds.
                candidates = np.flatnonzero(sims >= cutoff).tolist()
            else:
                candidates = list(range(n))
            candidates.sort(key=lambda j: (-sims[j], self._words[j]))

            found: List[Tuple[str, float]] = []
            for j in candidates:
                other = self._words[j]
                if j == row or other == word or other in exclude:
                    continue
                if accept is not None and not accept(other):
                    continue
                found.append((other, float(sims[j])))
                if len(found) == k:
                    return found
            if m >= n:
                return found
            want *= 2


# ── Hypernym graph ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class HyponymEdge:
    label: str
    confidence: float


@dataclass(frozen=True)
class HypernymGraph:
    """hypernym word -> hyponym labels with extraction confidence."""

    edges: Mapping[str, Tuple[HyponymEdge, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for hypernym, edges in self.edges.items():
            labels = set()
            for edge in edges:
                if not 0.0 <= edge.confidence <= 1.0:
                    raise IngestionError(
                        f"confidence {edge.confidence} outside [0, 1] for "
                        f"{edge.label!r} -> {hypernym!r}"
                    )
                key = edge.label.lower()
                if key in labels:
                    raise IngestionError(f"duplicate hyponym {edge.label!r} under {hypernym!r}")
                labels.add(key)

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, word: object) -> bool:
        return word in self.edges

    def hyponyms(self, word: str, threshold: float = 0.0) -> List[HyponymEdge]:
        """Labels under ``word`` with confidence >= ``threshold`` (inclusive)."""
        return [e for e in self.edges.get(word, ()) if e.confidence >= threshold]

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.edges.values())


# ── Knowledge-base subject cache ───────────────────────────────────────


class Provenance(str, Enum):
    LIVE = "live"
    CACHED = "cached"


def clean_subject_label(label: str) -> str:
    label = label.strip()
    if label.startswith(CATEGORY_PREFIX):
        label = label[len(CATEGORY_PREFIX):]
    return label.replace("_", " ").strip()


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


@dataclass(frozen=True)
class KbEntry:
    key: str
    subjects: Tuple[str, ...]
    fetched_at: str
    provenance: Provenance = field(default=Provenance.CACHED, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "key", self.key.strip().lower())
        cleaned = []
        for label in self.subjects:
            label = clean_subject_label(label)
            if label and label not in cleaned:
                cleaned.append(label)
        object.__setattr__(self, "subjects", tuple(cleaned))

    def to_record(self) -> dict:
        return {"key": self.key, "subjects": list(self.subjects), "fetched_at": self.fetched_at}


class SubjectSource(Protocol):
    """Anything that can answer "which subjects does this word's concept have?".

    ``None`` means the word has no resolvable concept.
    """

    def subjects_for(self, term: str) -> Optional[Sequence[str]]:
        ...


class KbSubjectCache:
    """Concept key (lowercased word) -> subject labels.

    Used directly it is an offline :class:`SubjectSource`; the live client
    writes fetched entries through it.
    """

    def __init__(self, entries: Iterable[KbEntry] = ()):
        self._entries: Dict[str, KbEntry] = {}
        self._lock = threading.Lock()
        for entry in entries:
            self._entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: object) -> bool:
        return isinstance(key, str) and key.lower() in self._entries

    def __iter__(self) -> Iterator[KbEntry]:
        return iter(self.entries())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KbSubjectCache):
            return NotImplemented
        return self.entries() == other.entries()

    def entries(self) -> List[KbEntry]:
        return [self._entries[k] for k in sorted(self._entries)]

    def get(self, key: str) -> Optional[KbEntry]:
        return self._entries.get(key.lower())

    def put(self, entry: KbEntry) -> None:
        with self._lock:
            self._entries[entry.key] = entry

    def subjects_for(self, term: str) -> Optional[Sequence[str]]:
        entry = self.get(term)
        if entry is None or not entry.subjects:
            return None
        return entry.subjects
