"""
Knowledge-base subject lookup.

Two layers:

- :class:`DbpediaClient` asks a SPARQL endpoint for the ``dct:subject``
  values of the concept a word names. One request at a time, with a
  configurable minimum gap between requests.
- :class:`CachedKbClient` is what expansion talks to. It answers from the
  local cache first, falls through to the live client only when online,
  writes every live answer back to the cache file, and turns network
  failures into entries of a :class:`FetchReport` instead of exceptions.
"""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence
from urllib.parse import quote, unquote

import certifi
import httpx

from .errors import ConfigError, KbFetchError, OfflineError
from .ingestion import save_kb_cache
from .resources import KbEntry, KbSubjectCache, Provenance, clean_subject_label, utc_timestamp

logger = logging.getLogger("qexrank")

DEFAULT_ENDPOINT = "https://dbpedia.org/sparql"
DEFAULT_RESOURCE_BASE = "http://dbpedia.org/resource/"
DEFAULT_QUERY_TEMPLATE = (
    "SELECT DISTINCT ?subject WHERE { <{resource}> "
    "<http://purl.org/dc/terms/subject> ?subject }"
)


class FetchOutcome(str, Enum):
    OK = "ok"
    MISS = "miss"
    ERROR = "error"
    CACHED = "cached"
    SKIPPED = "skipped"


@dataclass
class FetchReport:
    """Per-term outcome of KB lookups made during one run."""

    outcomes: Dict[str, FetchOutcome] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)
    network_calls: int = 0

    def record(self, term: str, outcome: FetchOutcome, error: str = "") -> None:
        self.outcomes[term] = outcome
        if error:
            self.errors[term] = error

    def count(self, outcome: FetchOutcome) -> int:
        return sum(1 for o in self.outcomes.values() if o is outcome)

    @property
    def failed(self) -> List[str]:
        return sorted(t for t, o in self.outcomes.items() if o is FetchOutcome.ERROR)

    def rows(self) -> List[List[str]]:
        return [
            [term, self.outcomes[term].value, self.errors.get(term, "")]
            for term in sorted(self.outcomes)
        ]


def resource_iri(term: str, base: str = DEFAULT_RESOURCE_BASE) -> str:
    """DBpedia resource names start upper-case and use underscores for spaces."""
    name = term.strip().replace(" ", "_")
    name = name[:1].upper() + name[1:]
    return base + quote(name, safe="_()'-.,")


def subject_label_from_iri(iri: str) -> str:
    tail = iri.rstrip("/").rsplit("/", 1)[-1]
    return clean_subject_label(unquote(tail))


class DbpediaClient:
    """Live ``dct:subject`` lookups over SPARQL-over-HTTP.

    At most one request is in flight; consecutive requests are at least
    ``min_delay`` seconds apart.
    """

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        query_template: str = DEFAULT_QUERY_TEMPLATE,
        token: Optional[str] = None,
        min_delay: float = 1.0,
        timeout: float = 30.0,
        transport: Optional[httpx.BaseTransport] = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if "{resource}" not in query_template:
            raise ConfigError("KB query template must contain a {resource} placeholder")
        self.endpoint = endpoint
        self.query_template = query_template
        self.min_delay = max(0.0, min_delay)
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._last_request: Optional[float] = None

        headers = {"Accept": "application/sparql-results+json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(
            headers=headers,
            timeout=timeout,
            verify=certifi.where(),
            transport=transport,
        )

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "DbpediaClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _wait_turn(self) -> None:
        if self._last_request is None:
            return
        remaining = self.min_delay - (self._clock() - self._last_request)
        if remaining > 0:
            self._sleep(remaining)

    def fetch_subjects(self, term: str) -> List[str]:
        """Subject labels of ``term``'s concept; ``[]`` when there is none.

        Raises :class:`KbFetchError` on transport, HTTP or payload errors.
        """
        query = self.query_template.replace("{resource}", resource_iri(term))
        with self._lock:
            self._wait_turn()
            try:
                response = self._http.get(
                    self.endpoint,
                    params={"query": query, "format": "application/sparql-results+json"},
                )
                response.raise_for_status()
                payload = response.json()
            except httpx.HTTPError as exc:
                raise KbFetchError(f"KB request for {term!r} failed: {exc}") from exc
            except ValueError as exc:
                raise KbFetchError(f"KB response for {term!r} is not JSON: {exc}") from exc
            finally:
                self._last_request = self._clock()

        try:
            bindings = payload["results"]["bindings"]
            values = [b["subject"]["value"] for b in bindings if "subject" in b]
        except (KeyError, TypeError) as exc:
            raise KbFetchError(f"Unexpected KB payload for {term!r}: missing {exc}") from exc

        labels: List[str] = []
        for value in values:
            label = subject_label_from_iri(value)
            if label and label not in labels:
                labels.append(label)
        logger.debug("KB %r -> %d subjects", term, len(labels))
        return labels


class CachedKbClient:
    """Cache-first subject source with live write-through.

    ``offline=True`` (or no live client) never touches the network: cache
    misses are plain misses. Live answers, including "no subjects", are
    stored and the cache file is rewritten atomically after each one.
    """

    def __init__(
        self,
        cache: KbSubjectCache,
        client: Optional[DbpediaClient] = None,
        cache_path: Optional[Path] = None,
        offline: bool = True,
        report: Optional[FetchReport] = None,
    ):
        self.cache = cache
        self.client = client
        self.cache_path = cache_path
        self.offline = offline or client is None
        self.report = report if report is not None else FetchReport()
        self._lock = threading.Lock()

    def _persist(self) -> None:
        if self.cache_path is not None:
            save_kb_cache(self.cache, self.cache_path)

    def fetch(self, term: str, refresh: bool = False) -> Optional[Sequence[str]]:
        """Resolve one term, going live when allowed and needed."""
        with self._lock:
            return self._fetch(term, refresh)

    def _fetch(self, term: str, refresh: bool) -> Optional[Sequence[str]]:
        key = term.lower()
        entry = self.cache.get(key)
        if entry is not None and not refresh:
            self.report.record(key, FetchOutcome.CACHED)
            return entry.subjects or None

        if self.offline:
            if refresh:
                raise OfflineError("Cannot refresh KB entries while offline")
            self.report.record(key, FetchOutcome.SKIPPED)
            return None

        self.report.network_calls += 1
        try:
            labels = self.client.fetch_subjects(key)  # type: ignore[union-attr]
        except KbFetchError as exc:
            logger.warning(str(exc))
            self.report.record(key, FetchOutcome.ERROR, str(exc))
            return None

        self.cache.put(KbEntry(
            key=key, subjects=tuple(labels), fetched_at=utc_timestamp(),
            provenance=Provenance.LIVE,
        ))
        self._persist()
        self.report.record(key, FetchOutcome.OK if labels else FetchOutcome.MISS)
        return labels or None

    def subjects_for(self, term: str) -> Optional[Sequence[str]]:
        return self.fetch(term)
