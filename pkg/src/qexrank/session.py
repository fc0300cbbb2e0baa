"""
Lazily loaded run state shared by the commands.

A :class:`Session` turns a :class:`~qexrank.config.RunConfig` into the
objects the pipeline works on (analyzer, dataset splits, index, expansion
resources) and loads each at most once.
"""
from __future__ import annotations

import logging
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from .analysis import AnalyzerConfig
from .config import RunConfig, split_paths
from .errors import ConfigError
from .expanders import ExpansionResources, ExpansionSource
from .index import InvertedIndex, build_index, load_index, read_index_header
from .ingestion import (
    DatasetSplit,
    Scenario,
    check_alignment,
    load_dataset,
    load_embeddings,
    load_hypernym_graph,
    load_kb_cache,
    merge_documents,
)
from .kb_client import CachedKbClient, DbpediaClient, FetchReport
from .resources import EmbeddingStore, HypernymGraph

logger = logging.getLogger("qexrank")

SPLIT_NAMES = ("dev", "test")


class Session:
    def __init__(self, config: RunConfig):
        self.config = config
        self._splits: Dict[Tuple[str, Scenario], DatasetSplit] = {}
        self._kb: Optional[CachedKbClient] = None
        self._http: Optional[DbpediaClient] = None
        self.fetch_report = FetchReport()

    # ── Analysis and data ─────────────────────────────────────────────

    @cached_property
    def analyzer(self) -> AnalyzerConfig:
        return self.config.analyzer.build(self.config.paths.stopwords)

    def configured_splits(self, which: Iterable[str] = SPLIT_NAMES) -> List[Tuple[str, Scenario, Path]]:
        wanted = set(which)
        return [
            (name, Scenario(scenario), path)
            for name, scenario, path in split_paths(self.config)
            if name in wanted and path is not None
        ]

    def split(self, name: str, scenario: Scenario) -> DatasetSplit:
        key = (name, scenario)
        if key not in self._splits:
            path = dict(((n, Scenario(s)), p) for n, s, p in split_paths(self.config)).get(key)
            if path is None:
                raise ConfigError(f"No {scenario.value} {name} dataset configured")
            if not Path(path).exists():
                raise ConfigError(f"{scenario.value} {name} dataset not found: {path}")
            self._splits[key] = load_dataset(Path(path), scenario, split=name,
                                             analyzer=self.analyzer)
        return self._splits[key]

    def splits(self, which: Iterable[str] = SPLIT_NAMES) -> List[DatasetSplit]:
        """Every configured split among ``which``, dev before test, EN before MT.

        When both scenarios of a split are loaded they must agree on
        everything but query text.
        """
        loaded = [self.split(name, scenario) for name, scenario, _ in self.configured_splits(which)]
        by_key = {(s.name, s.scenario): s for s in loaded}
        for name in SPLIT_NAMES:
            en, mt = by_key.get((name, Scenario.EN)), by_key.get((name, Scenario.MT))
            if en is not None and mt is not None:
                check_alignment(en, mt)
        return loaded

    # ── Index ─────────────────────────────────────────────────────────

    def build_index(self) -> InvertedIndex:
        splits = self.splits()
        if not splits:
            raise ConfigError("No dataset configured; pass --dataset-en=PATH (and/or --dev-en, --dataset-mt, --dev-mt)")
        docs = merge_documents(splits)
        if not docs:
            raise ConfigError("The configured datasets contain no documents to index")
        return build_index(docs)

    @cached_property
    def index(self) -> InvertedIndex:
        """The persisted index, checked against the current analyzer and data."""
        path = Path(self.config.paths.index)
        if not path.exists():
            raise ConfigError(f"Index not found at {path}; run `qexrank index` first")
        header = read_index_header(path)
        expected = self.analyzer.describe()
        if header.get("analyzer") != expected:
            raise ConfigError(
                f"Index {path} was built with analyzer {header.get('analyzer')}, "
                f"current settings are {expected}; rebuild it with `qexrank index`"
            )
        return load_index(path)

    def check_index_covers(self, splits: Iterable[DatasetSplit]) -> None:
        for split in splits:
            missing = [d.doc_id for d in split.documents if d.doc_id not in self.index]
            if missing:
                raise ConfigError(
                    f"Index does not contain {len(missing)} document(s) of the "
                    f"{split.scenario.value} {split.name} split (e.g. {missing[0]!r}); "
                    f"rebuild it with `qexrank index`"
                )

    # ── Expansion resources ───────────────────────────────────────────

    @cached_property
    def embeddings(self) -> EmbeddingStore:
        self.config.require("embeddings")
        return load_embeddings(Path(self.config.paths.embeddings))  # type: ignore[arg-type]

    @cached_property
    def hypernyms(self) -> HypernymGraph:
        self.config.require("hypernyms")
        return load_hypernym_graph(Path(self.config.paths.hypernyms))  # type: ignore[arg-type]

    @property
    def kb_cache_path(self) -> Optional[Path]:
        path = self.config.paths.kb_cache
        return Path(path) if path is not None else None

    def kb(self) -> CachedKbClient:
        """Cache-first KB source; goes live only when not offline."""
        if self._kb is None:
            cache_path = self.kb_cache_path
            if cache_path is None:
                raise ConfigError("DBpedia expansion needs a KB cache file; pass --kb-cache=PATH")
            cache = load_kb_cache(cache_path)
            if not self.config.offline:
                kb = self.config.kb
                self._http = DbpediaClient(
                    endpoint=kb.endpoint,
                    query_template=kb.query_template,
                    token=kb.token,
                    min_delay=kb.min_delay,
                    timeout=kb.timeout,
                )
            self._kb = CachedKbClient(
                cache=cache,
                client=self._http,
                cache_path=cache_path,
                offline=self.config.offline,
                report=self.fetch_report,
            )
        return self._kb

    def resources(self, sources: Iterable[ExpansionSource]) -> ExpansionResources:
        """Resources for exactly the sources that will be enabled."""
        needed: FrozenSet[ExpansionSource] = frozenset(sources)
        settings = self.config.expansion
        return ExpansionResources(
            analyzer=self.analyzer,
            embeddings=self.embeddings if ExpansionSource.WORD_EMBEDDING in needed else None,
            hypernyms=self.hypernyms if ExpansionSource.HYPERNYM in needed else None,
            kb=self.kb() if ExpansionSource.DBPEDIA in needed else None,
            k_neighbors=settings.k_neighbors,
            hypernym_threshold=settings.hypernym_threshold,
            max_subjects=settings.max_subjects,
        )

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
