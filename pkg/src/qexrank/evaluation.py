"""
Average precision, MAP and the system grid.

A *system* is a set of enabled expansion sources run on one scenario. The
canonical grid has nine systems per scenario (four single sources, three
keyword + X pairs, the three expansion sources together, and all four),
numbered 1-9 for English queries and 12-20 for machine-translated ones.

Machine-readable reports keep MAP in [0, 1] at full precision; the
rendered table shows it x100 with two decimals.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import EvaluationError
from .expanders import ExpandedQuery, ExpansionResources, ExpansionSource, combine, parse_sources
from .index import Bm25Params, InvertedIndex, RankedList, rerank_candidates
from .ingestion import DatasetSplit, QueryRecord, Relevance, Scenario
from .templates import TemplateLoader
from .utils import PathManager

logger = logging.getLogger("qexrank")

KW = ExpansionSource.KEYWORD
WE = ExpansionSource.WORD_EMBEDDING
DB = ExpansionSource.DBPEDIA
HN = ExpansionSource.HYPERNYM

# Position i is row i+1 for EN and row i+12 for MT.
_GRID_COMBINATIONS: Tuple[Tuple[ExpansionSource, ...], ...] = (
    (KW,),
    (WE,),
    (DB,),
    (HN,),
    (KW, WE),
    (KW, DB),
    (KW, HN),
    (WE, DB, HN),
    (KW, WE, DB, HN),
)
_FIRST_ROW = {Scenario.EN: 1, Scenario.MT: 12}
_SINGLE_TITLES = {
    KW: "Keyword(KW) (Baseline)",
    WE: "Word Embedding(WE)",
    DB: "DBpedia(DB)",
    HN: "Hypernym(HN)",
}


def system_id(sources: Iterable[ExpansionSource]) -> str:
    """Short label such as ``KW+WE``, sources in precedence order."""
    chosen = set(sources)
    return "+".join(s.short for s in ExpansionSource if s in chosen)


@dataclass(frozen=True)
class SystemSpec:
    id: str
    scenario: Scenario
    enabled_sources: FrozenSet[ExpansionSource]
    row: Optional[int] = None
    title: str = ""

    def __post_init__(self):
        if not self.enabled_sources:
            raise EvaluationError(f"System {self.id!r} enables no sources")

    @property
    def tag(self) -> str:
        """Run-file system column, unique across scenarios."""
        return f"{self.id}-{self.scenario.value}"

    @property
    def is_baseline(self) -> bool:
        return self.enabled_sources == frozenset({KW})

    @property
    def label(self) -> str:
        prefix = f"{self.row}. " if self.row is not None else ""
        return prefix + (self.title or self.id)

    @classmethod
    def parse(cls, text: str, scenario: Union[str, Scenario]) -> "SystemSpec":
        """Build a system from a label like ``KW+WE``, reusing the grid row when it has one."""
        sources = parse_sources(text)
        if not sources:
            raise EvaluationError(f"Empty system label {text!r}")
        scenario = Scenario.parse(scenario)
        for spec in canonical_grid((scenario,)):
            if spec.enabled_sources == sources:
                return spec
        return cls(id=system_id(sources), scenario=scenario, enabled_sources=sources)


def _grid_title(sources: Tuple[ExpansionSource, ...], first_row: int) -> str:
    if len(sources) == 1:
        return _SINGLE_TITLES[sources[0]]
    refs = " + ".join(str(first_row + s.precedence) for s in sources)
    if len(sources) == len(ExpansionSource):
        return f"{refs} (Best)"
    return f"{refs} ({system_id(sources)})"


def canonical_grid(scenarios: Sequence[Scenario] = (Scenario.EN, Scenario.MT)) -> List[SystemSpec]:
    """The nine systems per scenario, in table order."""
    systems = []
    for scenario in scenarios:
        first = _FIRST_ROW[scenario]
        for offset, sources in enumerate(_GRID_COMBINATIONS):
            systems.append(SystemSpec(
                id=system_id(sources),
                scenario=scenario,
                enabled_sources=frozenset(sources),
                row=first + offset,
                title=_grid_title(sources, first),
            ))
    return systems


# ── Average precision ──────────────────────────────────────────────────


def _is_relevant(label: object) -> bool:
    if isinstance(label, Relevance):
        return label is Relevance.RELEVANT
    if isinstance(label, str):
        return Relevance.parse(label) is Relevance.RELEVANT
    return bool(label)


def average_precision(ranking: RankedList, qrels: Mapping[str, object]) -> float:
    """AP over a ranked candidate list.

    R is the number of relevant documents among the labelled candidates.
    A query with R = 0 scores 0.
    """
    relevant = {doc_id for doc_id, label in qrels.items() if _is_relevant(label)}
    for doc_id in ranking.doc_ids():
        if doc_id not in qrels:
            raise EvaluationError(
                f"Document {doc_id!r} in the ranking of {ranking.query_id!r} has no label"
            )
    if not relevant:
        return 0.0

    hits = 0
    total = 0.0
    for rank, doc_id in enumerate(ranking.doc_ids(), start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


# ── Reports ────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class EvalReport:
    """One system evaluated on one split.

    ``delta_vs_baseline`` is this MAP minus the same-scenario keyword
    baseline's MAP on the same split.
    """

    system: SystemSpec
    split: str
    per_query_ap: Mapping[str, float]
    map_score: float
    delta_vs_baseline: float = 0.0
    params: Bm25Params = Bm25Params()
    rankings: Tuple[RankedList, ...] = field(default=(), repr=False, compare=False)
    expanded: Tuple[ExpandedQuery, ...] = field(default=(), repr=False, compare=False)

    @property
    def zero_ap_queries(self) -> List[str]:
        return [qid for qid, ap in self.per_query_ap.items() if ap == 0.0]

    def to_record(self) -> dict:
        return {
            "system": self.system.id,
            "scenario": self.system.scenario.value,
            "row": self.system.row,
            "enabled_sources": sorted(s.value for s in self.system.enabled_sources),
            "split": self.split,
            "params": self.params.as_dict(),
            "map": self.map_score,
            "delta_vs_baseline": self.delta_vs_baseline,
            "n_queries": len(self.per_query_ap),
            "per_query_ap": dict(self.per_query_ap),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def evaluate_query(
    query: QueryRecord,
    system: SystemSpec,
    index: InvertedIndex,
    params: Bm25Params,
    resources: ExpansionResources,
) -> Tuple[ExpandedQuery, RankedList, float]:
    expanded = combine(query.query_id, query.scenario, query.text, system.enabled_sources,
                       resources)
    ranking = rerank_candidates(index, expanded, query.candidates, params)
    return expanded, ranking, average_precision(ranking, query.qrels)


def evaluate_system(
    system: SystemSpec,
    split: DatasetSplit,
    index: InvertedIndex,
    params: Bm25Params,
    resources: ExpansionResources,
    workers: int = 1,
    baseline_map: Optional[float] = None,
) -> EvalReport:
    """Expand, re-rank and score every query of ``split`` with one system."""
    if system.scenario is not split.scenario:
        raise EvaluationError(
            f"System {system.tag} cannot run on the {split.scenario.value} {split.name} split"
        )
    if not split.queries:
        raise EvaluationError(f"The {split.name}/{split.scenario.value} split has no queries")

    queries = sorted(split.queries, key=lambda q: q.query_id)

    def run(query: QueryRecord) -> Tuple[ExpandedQuery, RankedList, float]:
        return evaluate_query(query, system, index, params, resources)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, queries))
    else:
        results = [run(q) for q in queries]

    per_query = {q.query_id: ap for q, (_, _, ap) in zip(queries, results)}
    map_score = _mean(list(per_query.values()))
    logger.info("%s on %s: MAP %.4f over %d queries", system.tag, split.name, map_score,
                len(per_query))
    return EvalReport(
        system=system,
        split=split.name,
        per_query_ap=per_query,
        map_score=map_score,
        delta_vs_baseline=0.0 if baseline_map is None else map_score - baseline_map,
        params=params,
        rankings=tuple(r for _, r, _ in results),
        expanded=tuple(e for e, _, _ in results),
    )


def run_grid(
    splits: Sequence[DatasetSplit],
    index: InvertedIndex,
    resources: ExpansionResources,
    params: Bm25Params = Bm25Params(),
    systems: Optional[Sequence[SystemSpec]] = None,
    workers: int = 1,
    on_report: Optional[Callable[[EvalReport], None]] = None,
) -> List[EvalReport]:
    """Run every system on every split of its scenario.

    Deltas are taken against the keyword system of the same scenario on
    the same split; when that system is not selected it is still run,
    but its report is not returned. Systems whose scenario has no split
    are dropped with a warning.
    """
    if not splits:
        raise EvaluationError("No dataset splits to evaluate")
    systems = list(systems) if systems is not None else canonical_grid()
    available = {s.scenario for s in splits}

    kept = [s for s in systems if s.scenario in available]
    for scenario in sorted({s.scenario for s in systems} - available, key=lambda s: s.value):
        logger.warning("No %s split loaded; skipping the %s systems", scenario.value,
                       scenario.value)
    if not kept:
        raise EvaluationError("None of the selected systems has a split to run on")

    reports: List[EvalReport] = []
    for split in splits:
        chosen = [s for s in kept if s.scenario is split.scenario]
        if not chosen:
            continue
        baseline_spec = next((s for s in chosen if s.is_baseline), None)
        if baseline_spec is None:
            baseline_spec = SystemSpec.parse("KW", split.scenario)
            baseline = evaluate_system(baseline_spec, split, index, params, resources, workers)
        else:
            baseline = evaluate_system(baseline_spec, split, index, params, resources, workers,
                                       baseline_map=None)
            chosen = [s for s in chosen if s is not baseline_spec]
            reports.append(baseline)
            if on_report:
                on_report(baseline)

        for system in chosen:
            report = evaluate_system(system, split, index, params, resources, workers,
                                     baseline_map=baseline.map_score)
            reports.append(report)
            if on_report:
                on_report(report)

    split_order = {s.name: i for i, s in enumerate(splits)}
    reports.sort(key=lambda r: (split_order[r.split], _row_key(r.system)))
    return reports


def _row_key(system: SystemSpec) -> Tuple[int, int, str]:
    return (
        0 if system.scenario is Scenario.EN else 1,
        system.row if system.row is not None else 10_000,
        system.id,
    )


# ── Artifacts ──────────────────────────────────────────────────────────


def _require_column(value: str, what: str) -> str:
    if not value or any(ch.isspace() for ch in value):
        raise EvaluationError(f"Invalid {what} {value!r}: run file columns hold no whitespace")
    return value


def run_file_lines(rankings: Iterable[RankedList], tag: str) -> List[str]:
    lines = []
    for ranking in sorted(rankings, key=lambda r: r.query_id):
        _require_column(ranking.query_id, "query id")
        for entry in ranking.entries:
            _require_column(entry.doc_id, "doc id")
            lines.append(
                f"{ranking.query_id} Q0 {entry.doc_id} {entry.rank} {entry.score:.6f} {tag}"
            )
    return lines


def emit_run_file(rankings: Iterable[RankedList], system_tag: str, path: Path) -> Path:
    """Write rankings in the 6-column run format, ordered by query then rank."""
    _require_column(system_tag, "run tag")
    return PathManager.atomic_write_lines(Path(path), run_file_lines(rankings, system_tag))


def write_qrels(queries: Iterable[QueryRecord], path: Path) -> Path:
    """``query_id 0 doc_id rel`` lines, relevant = 1."""
    lines = []
    for query in sorted(queries, key=lambda q: q.query_id):
        for doc_id in query.candidates:
            rel = 1 if query.qrels[doc_id] is Relevance.RELEVANT else 0
            lines.append(f"{query.query_id} 0 {doc_id} {rel}")
    return PathManager.atomic_write_lines(Path(path), lines)


def write_reports(reports: Iterable[EvalReport], path: Path) -> Path:
    return PathManager.atomic_write_lines(Path(path), [r.to_json() for r in reports])


def read_reports(path: Path) -> List[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise EvaluationError(f"Cannot read reports {path}: {exc}") from exc
    return [json.loads(line) for line in text.splitlines() if line.strip()]


# ── Rendering ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ReferenceRow:
    """A published comparison system; its numbers are quoted, never computed."""

    row: int
    title: str
    scenario: Scenario
    dev: float
    test: float


REFERENCE_ROWS: Tuple[ReferenceRow, ...] = (
    ReferenceRow(10, "UH-PRHLT (SemEval 2016)", Scenario.EN, 75.90, 76.70),
    ReferenceRow(11, "SVM + TK", Scenario.EN, 73.02, 77.41),
    ReferenceRow(21, "SVM + TK", Scenario.MT, 72.94, 76.67),
)


def format_map(value: Optional[float]) -> str:
    return "-" if value is None else f"{value * 100:.2f}"


def format_delta(value: Optional[float], baseline: bool = False) -> str:
    """``+08.43`` / ``-07.57``; the baseline row always reads ``00.00``."""
    if value is None:
        return "-"
    points = round(value * 100, 2)
    if baseline or points == 0:
        return "00.00"
    sign = "+" if points > 0 else "-"
    return f"{sign}{abs(points):05.2f}"


def table_rows(
    reports: Sequence[EvalReport],
    dev_split: str = "dev",
    test_split: str = "test",
    with_reference: bool = False,
) -> List[dict]:
    """One row per system, Dev and Test MAP side by side, Δ from the test split."""
    by_system: Dict[Tuple[str, Scenario], Dict[str, EvalReport]] = {}
    specs: Dict[Tuple[str, Scenario], SystemSpec] = {}
    for report in reports:
        key = (report.system.id, report.system.scenario)
        specs[key] = report.system
        by_system.setdefault(key, {})[report.split] = report

    rows = []
    for key in sorted(specs, key=lambda k: _row_key(specs[k])):
        spec = specs[key]
        dev = by_system[key].get(dev_split)
        test = by_system[key].get(test_split)
        delta_source = test or dev
        rows.append({
            "order": spec.row if spec.row is not None else 10_000,
            "system": spec.label,
            "qr": spec.scenario.value,
            "dev": format_map(dev.map_score if dev else None),
            "test": format_map(test.map_score if test else None),
            "delta": format_delta(
                delta_source.delta_vs_baseline if delta_source else None,
                baseline=spec.is_baseline,
            ),
        })

    if with_reference:
        shown = {specs[k].scenario for k in specs}
        for ref in REFERENCE_ROWS:
            if ref.scenario in shown:
                rows.append({
                    "order": ref.row,
                    "system": f"{ref.row}. {ref.title}",
                    "qr": ref.scenario.value,
                    "dev": f"{ref.dev:.2f}",
                    "test": f"{ref.test:.2f}",
                    "delta": "-",
                })
        rows.sort(key=lambda r: r["order"])
    return rows


def render_table(
    reports: Sequence[EvalReport],
    dev_split: str = "dev",
    test_split: str = "test",
    with_reference: bool = False,
) -> str:
    rows = table_rows(reports, dev_split, test_split, with_reference)
    width = max([len("System")] + [len(r["system"]) for r in rows])
    return TemplateLoader.render("table.txt.j2", {
        "rows": rows,
        "width": width,
        "dev_split": dev_split,
        "test_split": test_split,
    })


def render_per_query(reports: Sequence[EvalReport], split: str) -> str:
    """AP x100 of each query under each system, plus each system's AP = 0 count."""
    chosen = sorted((r for r in reports if r.split == split), key=lambda r: _row_key(r.system))
    if not chosen:
        raise EvaluationError(f"No reports for split {split!r}")
    columns = [r.system.tag for r in chosen]
    query_ids = sorted({qid for r in chosen for qid in r.per_query_ap})
    rows = [
        {
            "query_id": qid,
            "values": [format_map(r.per_query_ap.get(qid)) for r in chosen],
        }
        for qid in query_ids
    ]
    return TemplateLoader.render("per_query.txt.j2", {
        "split": split,
        "columns": columns,
        "rows": rows,
        "zero_counts": [len(r.zero_ap_queries) for r in chosen],
        "qid_width": max([len("query_id")] + [len(q) for q in query_ids]),
        "col_width": max([7] + [len(c) for c in columns]),
    })
