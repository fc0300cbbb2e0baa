"""
Run configuration.

Values are resolved in this order, later sources winning:

1. built-in defaults,
2. an INI file (``--config PATH``, or ``qexrank.ini`` in the working
   directory when it exists),
3. ``QEXRANK_KB_ENDPOINT`` for the knowledge-base endpoint,
4. command-line flags.

Example ``qexrank.ini``::

    [paths]
    dataset_en = data/test_en.jsonl
    dev_en     = data/dev_en.jsonl
    embeddings = data/glove.6B.100d.txt
    kb_cache   = data/kb_cache.jsonl

    [bm25]
    k1 = 1.2
    b  = 0.75

    [expansion]
    k_neighbors = 2
    hypernym_threshold = 0.75

Relative paths in the file are resolved against the file's directory.
"""
from __future__ import annotations

import configparser
import logging
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .analysis import AnalyzerConfig, Stemmer, load_stopwords
from .errors import ConfigError, QexrankError
from .index import Bm25Params
from .kb_client import DEFAULT_ENDPOINT, DEFAULT_QUERY_TEMPLATE

logger = logging.getLogger("qexrank")

CONFIG_FILE = Path("qexrank.ini")
KB_ENDPOINT_ENV = "QEXRANK_KB_ENDPOINT"


@dataclass(frozen=True)
class Paths:
    dataset_en: Optional[Path] = None
    dataset_mt: Optional[Path] = None
    dev_en: Optional[Path] = None
    dev_mt: Optional[Path] = None
    embeddings: Optional[Path] = None
    hypernyms: Optional[Path] = None
    kb_cache: Optional[Path] = None
    stopwords: Optional[Path] = None
    index: Path = Path("qexrank-index.jsonl")
    output_dir: Path = Path("runs")


@dataclass(frozen=True)
class ExpansionSettings:
    k_neighbors: int = 2
    hypernym_threshold: float = 0.75
    max_subjects: Optional[int] = None

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if not 0.0 <= self.hypernym_threshold <= 1.0:
            raise ConfigError(
                f"hypernym_threshold must be in [0, 1], got {self.hypernym_threshold}"
            )
        if self.max_subjects is not None and self.max_subjects < 1:
            raise ConfigError(f"max_subjects must be >= 1 or unset, got {self.max_subjects}")


@dataclass(frozen=True)
class AnalyzerSettings:
    stemmer: Stemmer = Stemmer.ENGLISH_LIGHT
    strip_punctuation: bool = True

    def build(self, stopwords: Optional[Path] = None) -> AnalyzerConfig:
        return AnalyzerConfig(
            stopword_list=load_stopwords(stopwords),
            stemmer=self.stemmer,
            strip_punctuation=self.strip_punctuation,
        )


@dataclass(frozen=True)
class KbSettings:
    endpoint: str = DEFAULT_ENDPOINT
    query_template: str = DEFAULT_QUERY_TEMPLATE
    token: Optional[str] = field(default=None, repr=False)
    min_delay: float = 1.0
    timeout: float = 30.0

    def __post_init__(self):
        if "{resource}" not in self.query_template:
            raise ConfigError("kb.query_template must contain a {resource} placeholder")
        if self.min_delay < 0 or self.timeout <= 0:
            raise ConfigError("kb.min_delay must be >= 0 and kb.timeout > 0")


@dataclass(frozen=True)
class RunConfig:
    paths: Paths = Paths()
    bm25: Bm25Params = Bm25Params()
    expansion: ExpansionSettings = ExpansionSettings()
    analyzer: AnalyzerSettings = AnalyzerSettings()
    kb: KbSettings = KbSettings()
    offline: bool = False
    workers: int = 1
    source: Optional[Path] = None

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def require(self, *names: str) -> None:
        """Each named path must be configured and exist on disk."""
        for name in names:
            value = getattr(self.paths, name)
            if value is None:
                flag = name.replace("_", "-")
                raise ConfigError(
                    f"No {name} path configured; pass --{flag}=PATH or set it under [paths]"
                )
            if not Path(value).exists():
                raise ConfigError(f"{name} path does not exist: {value}")

    def describe(self) -> dict:
        """Loggable summary. The KB token is never included."""
        return {
            "paths": {f.name: str(getattr(self.paths, f.name)) for f in fields(self.paths)
                      if getattr(self.paths, f.name) is not None},
            "bm25": self.bm25.as_dict(),
            "expansion": {
                "k_neighbors": self.expansion.k_neighbors,
                "hypernym_threshold": self.expansion.hypernym_threshold,
                "max_subjects": self.expansion.max_subjects,
            },
            "analyzer": {
                "stemmer": self.analyzer.stemmer.value,
                "strip_punctuation": self.analyzer.strip_punctuation,
            },
            "kb": {"endpoint": self.kb.endpoint, "min_delay": self.kb.min_delay,
                   "token": "set" if self.kb.token else "unset"},
            "offline": self.offline,
            "workers": self.workers,
        }


# ── Loading ────────────────────────────────────────────────────────────

# section -> accepted keys
_KEYS: Dict[str, Tuple[str, ...]] = {
    "paths": tuple(f.name for f in fields(Paths)),
    "bm25": ("k1", "b"),
    "expansion": ("k_neighbors", "hypernym_threshold", "max_subjects"),
    "analyzer": ("stemmer", "strip_punctuation"),
    "kb": ("endpoint", "query_template", "token", "min_delay", "timeout"),
    "run": ("offline", "workers"),
}

# command-line option -> (section, key)
FLAG_KEYS: Dict[str, Tuple[str, str]] = {
    "dataset-en": ("paths", "dataset_en"),
    "dataset-mt": ("paths", "dataset_mt"),
    "dev-en": ("paths", "dev_en"),
    "dev-mt": ("paths", "dev_mt"),
    "embeddings": ("paths", "embeddings"),
    "hypernyms": ("paths", "hypernyms"),
    "kb-cache": ("paths", "kb_cache"),
    "stopwords": ("paths", "stopwords"),
    "index": ("paths", "index"),
    "output-dir": ("paths", "output_dir"),
    "k1": ("bm25", "k1"),
    "b": ("bm25", "b"),
    "k-neighbors": ("expansion", "k_neighbors"),
    "threshold": ("expansion", "hypernym_threshold"),
    "max-subjects": ("expansion", "max_subjects"),
    "stemmer": ("analyzer", "stemmer"),
    "kb-endpoint": ("kb", "endpoint"),
    "kb-min-delay": ("kb", "min_delay"),
    "workers": ("run", "workers"),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _read_ini(path: Path) -> Dict[Tuple[str, str], str]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"Malformed config file {path}: {exc}") from exc

    base = path.parent
    values: Dict[Tuple[str, str], str] = {}
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _KEYS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            if section == "paths" and value and not Path(value).is_absolute():
                value = str(base / value)
            values[(section, key)] = value
    return values


def _as_bool(raw: str, name: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ConfigError(f"{name} must be a boolean, got {raw!r}")


def _as_number(raw: str, name: str, kind=float):
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {raw!r}")
    return value


def _build(values: Mapping[Tuple[str, str], str], source: Optional[Path]) -> RunConfig:
    def get(section: str, key: str) -> Optional[str]:
        raw = values.get((section, key))
        return raw.strip() if raw is not None and raw.strip() != "" else None

    path_values = {}
    for f in fields(Paths):
        raw = get("paths", f.name)
        if raw is not None:
            path_values[f.name] = Path(raw)
    paths = Paths(**path_values)

    defaults = Bm25Params()
    try:
        bm25 = Bm25Params(
            k1=_as_number(get("bm25", "k1") or str(defaults.k1), "bm25.k1"),
            b=_as_number(get("bm25", "b") or str(defaults.b), "bm25.b"),
        )
    except ConfigError:
        raise
    except QexrankError as exc:
        raise ConfigError(str(exc)) from None

    max_subjects = get("expansion", "max_subjects")
    expansion = ExpansionSettings(
        k_neighbors=_as_number(get("expansion", "k_neighbors") or "2",
                               "expansion.k_neighbors", int),
        hypernym_threshold=_as_number(get("expansion", "hypernym_threshold") or "0.75",
                                      "expansion.hypernym_threshold"),
        max_subjects=(None if max_subjects in (None, "none", "unlimited")
                      else _as_number(max_subjects, "expansion.max_subjects", int)),
    )

    stemmer_raw = get("analyzer", "stemmer")
    strip_raw = get("analyzer", "strip_punctuation")
    try:
        analyzer = AnalyzerSettings(
            stemmer=Stemmer.parse(stemmer_raw) if stemmer_raw else Stemmer.ENGLISH_LIGHT,
            strip_punctuation=(_as_bool(strip_raw, "analyzer.strip_punctuation")
                               if strip_raw is not None else True),
        )
    except ConfigError:
        raise
    except QexrankError as exc:
        raise ConfigError(str(exc)) from None

    kb = KbSettings(
        endpoint=get("kb", "endpoint") or DEFAULT_ENDPOINT,
        query_template=get("kb", "query_template") or DEFAULT_QUERY_TEMPLATE,
        token=get("kb", "token"),
        min_delay=_as_number(get("kb", "min_delay") or "1.0", "kb.min_delay"),
        timeout=_as_number(get("kb", "timeout") or "30", "kb.timeout"),
    )

    offline_raw = get("run", "offline")
    return RunConfig(
        paths=paths,
        bm25=bm25,
        expansion=expansion,
        analyzer=analyzer,
        kb=kb,
        offline=_as_bool(offline_raw, "run.offline") if offline_raw is not None else False,
        workers=_as_number(get("run", "workers") or "1", "run.workers", int),
        source=source,
    )


def load_config(
    config_path: Optional[Path] = None,
    flags: Optional[Mapping[str, str]] = None,
    offline: bool = False,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Resolve a :class:`RunConfig` from file, environment and flags.

    ``flags`` maps option names (``"k1"``, ``"dataset-en"``, ...) to raw
    strings; ``offline=True`` forces offline mode whatever the file says.
    """
    environ = os.environ if environ is None else environ
    values: Dict[Tuple[str, str], str] = {}

    source: Optional[Path] = None
    if config_path is not None:
        source = Path(config_path)
        if not source.exists():
            raise ConfigError(f"Config file not found: {source}")
    elif CONFIG_FILE.exists():
        source = CONFIG_FILE
    if source is not None:
        values.update(_read_ini(source))
        logger.info("Read configuration from %s", source)

    endpoint = environ.get(KB_ENDPOINT_ENV)
    if endpoint:
        values[("kb", "endpoint")] = endpoint

    for name, raw in (flags or {}).items():
        if name not in FLAG_KEYS:
            raise ConfigError(f"Unknown option --{name}")
        values[FLAG_KEYS[name]] = raw
    if offline:
        values[("run", "offline")] = "true"

    config = _build(values, source)
    logger.debug("Resolved configuration: %s", config.describe())
    return config


def split_paths(config: RunConfig) -> Sequence[Tuple[str, str, Optional[Path]]]:
    """(split name, scenario, path) for each dataset slot, dev before test."""
    p = config.paths
    return (
        ("dev", "EN", p.dev_en),
        ("dev", "MT", p.dev_mt),
        ("test", "EN", p.dataset_en),
        ("test", "MT", p.dataset_mt),
    )
