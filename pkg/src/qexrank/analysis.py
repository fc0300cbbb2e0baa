"""
English text analysis.

One pipeline serves documents at index time and queries plus expansion
phrases at search time:

    lowercase -> split on punctuation/whitespace -> drop stopwords -> stem

The pipeline is a pure function of (config, text). ``AnalyzerConfig`` is
frozen and the stemmers keep no per-call state, so analysis can run from
any number of threads.
"""
from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Tuple

from nltk.stem import PorterStemmer

from .errors import AnalysisError

logger = logging.getLogger("qexrank")

# Runs of letters/digits. Everything else (Unicode punctuation, "...."
# ellipses, underscores, symbols, whitespace) separates tokens.
_WORD_RE = re.compile(r"[^\W_]+")


class Stemmer(str, Enum):
    NONE = "none"
    ENGLISH_LIGHT = "english-light"
    PORTER = "porter"

    @classmethod
    def parse(cls, value: str) -> "Stemmer":
        try:
            return cls(value.strip().lower())
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise AnalysisError(f"Unknown stemmer '{value}'. Choose one of: {choices}") from None


def load_stopwords(path: Optional[Path] = None) -> Tuple[str, ...]:
    """Read a stopword file; ``None`` loads the list shipped with qexrank.

    One word per line, UTF-8, ``#`` comments and blank lines ignored.
    Order is preserved and duplicates are dropped.
    """
    if path is None:
        text = resources.files("qexrank").joinpath("_data/stopwords.txt").read_text(
            encoding="utf-8"
        )
        source = "<bundled>"
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise AnalysisError(f"Cannot read stopword file {path}: {exc}") from exc
        source = str(path)

    words: list[str] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word = line.lower()
        if any(ch.isspace() for ch in word):
            raise AnalysisError(f"{source}:{lineno}: stopword {line!r} contains whitespace")
        if word not in seen:
            seen.add(word)
            words.append(word)
    logger.debug("Loaded %d stopwords from %s", len(words), source)
    return tuple(words)


@dataclass(frozen=True)
class AnalyzerConfig:
    stopword_list: Tuple[str, ...] = field(default_factory=load_stopwords)
    stemmer: Stemmer = Stemmer.ENGLISH_LIGHT
    strip_punctuation: bool = True

    def __post_init__(self):
        normalized = tuple(w.lower() for w in self.stopword_list)
        if normalized != tuple(self.stopword_list):
            object.__setattr__(self, "stopword_list", normalized)
        for word in self.stopword_list:
            if not word or any(ch.isspace() for ch in word):
                raise AnalysisError(f"Invalid stopword {word!r}")
        object.__setattr__(self, "_stopword_set", frozenset(self.stopword_list))

    @property
    def stopwords(self) -> frozenset:
        return self._stopword_set  # type: ignore[attr-defined]

    def describe(self) -> dict:
        """Small JSON-able fingerprint, stored in persisted indexes."""
        return {
            "stemmer": self.stemmer.value,
            "strip_punctuation": self.strip_punctuation,
            "stopwords": len(self.stopwords),
            "stopwords_sha256": hashlib.sha256(
                "\n".join(sorted(self.stopwords)).encode("utf-8")
            ).hexdigest(),
        }


@dataclass(frozen=True)
class TokenStream:
    tokens: Tuple[str, ...] = ()

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def joined(self) -> str:
        return " ".join(self.tokens)


# ── Stemmers ────────────────────────────────────────────────────────────


def light_stem(word: str) -> str:
    """Minimal English plural stemmer.

    Only strips plural "s" endings: "activities" -> "activity",
    "trips" -> "trip", "expenses" -> "expense". Words ending in "ss" or
    "us", and "-aes"/"-ees"/"-oes" forms, are left alone.
    """
    n = len(word)
    if n < 3 or word[-1] != "s":
        return word
    prev = word[-2]
    if prev in "us":
        return word
    if prev == "e":
        if n > 3 and word[-3] == "i" and word[-4] not in "ae":
            return word[:-3] + "y"
        if word[-3] in "iaoe":
            return word
    return word[:-1]


_porter = PorterStemmer()


@lru_cache(maxsize=65536)
def porter_stem(word: str) -> str:
    return _porter.stem(word)


def _stem_function(stemmer: Stemmer) -> Callable[[str], str]:
    if stemmer is Stemmer.PORTER:
        return porter_stem
    if stemmer is Stemmer.ENGLISH_LIGHT:
        return light_stem
    return lambda word: word


# ── Pipeline ────────────────────────────────────────────────────────────


def split_words(text: str, config: AnalyzerConfig) -> list[str]:
    """Lowercase and split, no stopword filtering or stemming."""
    lowered = text.lower()
    if config.strip_punctuation:
        return _WORD_RE.findall(lowered)
    return lowered.split()


def query_words(text: str, config: AnalyzerConfig) -> list[str]:
    """Surface words fed to the expanders.

    Punctuation and stopwords are removed but nothing is stemmed, since
    embedding vocabularies and KB titles are keyed by surface forms.
    Repeated words keep their first position only.
    """
    stop = config.stopwords
    seen: set[str] = set()
    words = []
    for word in split_words(text, config):
        if word in stop or word in seen:
            continue
        seen.add(word)
        words.append(word)
    return words


def stem_words(words: Iterable[str], config: AnalyzerConfig) -> list[str]:
    stem = _stem_function(config.stemmer)
    stop = config.stopwords
    out = []
    for word in words:
        if word in stop:
            continue
        term = stem(word)
        # Stemming can land on a stopword ("ins" -> "in").
        if term and term not in stop:
            out.append(term)
    return out


def analyze(text: str, config: AnalyzerConfig) -> TokenStream:
    """Analyze raw text into index-compatible terms, preserving word order."""
    if not text:
        return TokenStream()
    return TokenStream(tuple(stem_words(split_words(text, config), config)))


def analyze_phrase(phrase: str, config: AnalyzerConfig) -> TokenStream:
    """Analyze an expansion value ("Tourist activities") exactly like a query.

    Expanders go through here so no unanalyzed phrase can reach the index.
    """
    return analyze(phrase, config)
