"""
Indexing, re-ranking, evaluation and tuning commands.
"""
import logging
from pathlib import Path
from typing import List

from ..console import Output
from ..errors import ConfigError
from ..evaluation import (
    SystemSpec,
    average_precision,
    canonical_grid,
    emit_run_file,
    render_per_query,
    render_table,
    run_grid,
    system_id,
    write_qrels,
    write_reports,
)
from ..expanders import combine, parse_sources
from ..index import rerank_candidates, save_index
from ..ingestion import Scenario
from ..tuning import ParamGrid, grid_rows, parse_grid, tune_params, write_tuning_report
from ..utils import PathManager, split_csv
from .base import ALL_CONFIG_FLAGS, Command, register

logger = logging.getLogger('qexrank')

DATASET_FLAGS = ("dataset-en", "dataset-mt", "dev-en", "dev-mt")
ANALYZER_FLAGS = ("stopwords", "stemmer")
RESOURCE_FLAGS = (
    "embeddings", "hypernyms", "kb-cache", "k-neighbors", "threshold",
    "max-subjects", "kb-endpoint", "kb-min-delay",
)


def split_selection(value: str) -> tuple:
    if value == "all":
        return ("dev", "test")
    if value in ("dev", "test"):
        return (value,)
    raise ConfigError(f"--split must be dev, test or all, got {value!r}")


def warn_kb_failures(command: Command) -> None:
    """Soft KB failures are reported but never change the exit code."""
    report = command.session.fetch_report
    if report.failed and not command.as_json:
        Output.warn(
            f"{len(report.failed)} KB lookup(s) failed and expanded to nothing: "
            + ", ".join(report.failed)
        )


@register
class IndexCommand(Command):
    signature = "index {--json}"
    description = "Build the BM25 index over every configured dataset split"
    config_flags = DATASET_FLAGS + ANALYZER_FLAGS + ("index",)
    help = """
Examples:
  qexrank index --dataset-en=data/test.en.jsonl --dev-en=data/dev.en.jsonl
  qexrank index --config=experiments/en.ini --stemmer=porter
  qexrank index --json

Every candidate document of every configured split is indexed once. The
index file is replaced atomically; its header records the analyzer so
later commands refuse an index built with different settings.
"""

    def handle(self):
        session = self.session
        path = Path(session.config.paths.index)

        with Output.spinner("Indexing documents"):
            index = session.build_index()
            save_index(index, path, analyzer=session.analyzer.describe())

        summary = index.summary()
        if self.as_json:
            Output.json({"index": str(path), **summary})
            return

        Output.success(f"{index.n_docs} documents indexed")
        Output.table(
            ["Documents", "Avg. length", "Vocabulary"],
            [[str(index.n_docs), f"{index.avg_doc_length:.2f}", str(index.vocabulary_size)]],
        )
        Output.file_written(str(path), "index")


@register
class SearchCommand(Command):
    signature = (
        "search {query_id?} {--text=} {--candidates=} {--sources=KW} "
        "{--scenario=EN} {--split=test} {--run-file=} {--json}"
    )
    description = "Re-rank one query's candidates and print the ranking"
    config_flags = DATASET_FLAGS + ANALYZER_FLAGS + RESOURCE_FLAGS + ("index", "k1", "b")
    help = """
Examples:
  qexrank search Q268 --sources=KW+WE
  qexrank search --text="best hotels in doha" --candidates=Q268_R1,Q268_R4
  qexrank search Q268 --run-file=runs/q268.txt --json

With a query_id the query text and candidates come from the dataset and
the average precision of the ranking is shown. With --text the
candidates must be listed explicitly.
"""

    def handle(self):
        session = self.session
        sources = parse_sources(self.option("sources", "KW"))
        scenario = Scenario.parse(self.option("scenario", "EN"))
        query_id = self.argument(0)
        text = self.option("text")

        qrels = None
        if query_id is not None:
            query = session.split(self.option("split", "test"), scenario).query(query_id)
            text = query.text
            candidates = list(query.candidates)
            qrels = query.qrels
            if self.option("candidates"):
                candidates = split_csv(self.option("candidates"))
        elif text is not None:
            query_id = "text"
            candidates = split_csv(self.option("candidates") or "")
            if not candidates:
                raise ConfigError("--text needs --candidates=DOC_ID,DOC_ID,...")
        else:
            raise ConfigError("Give a query_id or --text=... to search")

        index = session.index
        expanded = combine(query_id, scenario, text, sources, session.resources(sources))
        ranking = rerank_candidates(index, expanded, candidates, session.config.bm25)
        ap = average_precision(ranking, qrels) if qrels is not None else None
        tag = f"{system_id(sources)}-{scenario.value}"

        run_file = self.option("run-file")
        if run_file:
            emit_run_file([ranking], tag, Path(run_file))

        if self.as_json:
            Output.json({
                "query_id": ranking.query_id,
                "system": tag,
                "params": session.config.bm25.as_dict(),
                "average_precision": ap,
                "ranking": [
                    {"rank": e.rank, "doc_id": e.doc_id, "score": e.score}
                    for e in ranking.entries
                ],
            })
            return

        headers = ["Rank", "Document", "Score"]
        rows: List[List[str]] = []
        for entry in ranking.entries:
            row = [str(entry.rank), entry.doc_id, f"{entry.score:.6f}"]
            if qrels is not None:
                row.append(str(qrels[entry.doc_id].value))
            rows.append(row)
        if qrels is not None:
            headers.append("Label")
        Output.table(headers, rows, f"{ranking.query_id} ({tag})")
        if ap is not None:
            Output.info(f"Average precision: {ap * 100:.2f}")
        if run_file:
            Output.file_written(run_file, "run file")
        warn_kb_failures(self)


@register
class EvalCommand(Command):
    signature = "eval {--systems=} {--split=all} {--grid} {--with-reference} {--json}"
    description = "Evaluate expansion systems and write run files, reports and the MAP table"
    config_flags = ALL_CONFIG_FLAGS
    help = """
Examples:
  qexrank eval --grid                          # all 18 systems, dev and test
  qexrank eval --systems=KW,KW+WE --split=dev
  qexrank eval --systems=KW+WE+DB+HN-MT        # one scenario only
  qexrank eval --grid --with-reference --offline

A system label without a -EN/-MT suffix runs in every scenario that has
a split loaded. Artifacts go to the output directory: one run file per
system and split, qrels.txt, reports_<split>.jsonl, table.txt and
per_query.txt.
"""

    def handle(self):
        session = self.session
        config = session.config
        systems = self._systems()

        splits = session.splits(split_selection(self.option("split", "all")))
        if not splits:
            raise ConfigError("No dataset split configured to evaluate")
        session.check_index_covers(splits)

        index = session.index
        resources = session.resources(
            frozenset().union(*(s.enabled_sources for s in systems))
        )
        scenarios = {s.scenario for s in splits}
        total = sum(
            1 for split in splits for s in systems if s.scenario is split.scenario
        )

        with Output.progress("Evaluating systems", total=max(total, 1)) as advance:
            reports = run_grid(splits, index, resources, params=config.bm25, systems=systems,
                               workers=config.workers, on_report=lambda _: advance())

        out_dir = PathManager.ensure_dir(Path(config.paths.output_dir))
        written: List[Path] = []
        for report in reports:
            written.append(emit_run_file(
                report.rankings, report.system.tag,
                out_dir / f"run_{report.split}_{report.system.tag}.txt",
            ))
        queries = {q.query_id: q for split in splits for q in split.queries}
        written.append(write_qrels(queries.values(), out_dir / "qrels.txt"))

        split_names = [name for name in ("dev", "test") if any(s.name == name for s in splits)]
        for name in split_names:
            written.append(write_reports(
                [r for r in reports if r.split == name], out_dir / f"reports_{name}.jsonl"
            ))
        table = render_table(reports, with_reference=self.flag("with-reference"))
        written.append(PathManager.atomic_write(out_dir / "table.txt", table))
        per_query = "\n".join(render_per_query(reports, name) for name in split_names)
        written.append(PathManager.atomic_write(out_dir / "per_query.txt", per_query))

        report = session.fetch_report
        if self.as_json:
            Output.json({
                "reports": [r.to_record() for r in reports],
                "kb_failures": report.failed,
                "artifacts": [str(p) for p in written],
            })
            return

        missing = sorted({s.scenario.value for s in systems} - {s.value for s in scenarios})
        for name in missing:
            Output.warn(f"No {name} split loaded; its systems were skipped")
        Output.raw(table)
        Output.new_line()
        for path in written:
            Output.file_written(str(path))
        Output.success(f"Evaluated {len(reports)} system runs")
        warn_kb_failures(self)

    def _systems(self) -> List[SystemSpec]:
        labels = self.option("systems")
        if self.flag("grid") and labels:
            raise ConfigError("Use either --grid or --systems, not both")
        if not labels:
            return canonical_grid()
        systems: List[SystemSpec] = []
        for label in split_csv(labels):
            base, _, suffix = label.rpartition("-")
            if base and suffix.upper() in ("EN", "MT"):
                systems.append(SystemSpec.parse(base, suffix.upper()))
            else:
                systems.extend(SystemSpec.parse(label, s) for s in Scenario)
        if not systems:
            raise ConfigError("--systems is empty")
        return list(dict.fromkeys(systems))


@register
class TuneCommand(Command):
    signature = "tune {--grid=} {--split=dev} {--scenario=EN} {--sources=KW} {--json}"
    description = "Grid-search BM25 k1 and b on a development split"
    config_flags = DATASET_FLAGS + ANALYZER_FLAGS + RESOURCE_FLAGS + (
        "index", "output-dir", "workers",
    )
    help = """
Examples:
  qexrank tune
  qexrank tune --grid="k1=0.4,0.8,1.2 b=0.5,0.75"
  qexrank tune --sources=KW+WE --scenario=MT

The grid defaults to k1 in 0.4..2.0 and b in 0..1. Ties go to the
smaller k1, then the smaller b. Results are written to tuning.jsonl in
the output directory; pass the winning pair to eval with --k1= and --b=.
"""

    def handle(self):
        session = self.session
        config = session.config
        grid = parse_grid(self.option("grid")) if self.option("grid") else ParamGrid()
        scenario = Scenario.parse(self.option("scenario", "EN"))
        sources = parse_sources(self.option("sources", "KW"))
        system = SystemSpec.parse(system_id(sources), scenario)

        split = session.split(self.option("split", "dev"), scenario)
        session.check_index_covers([split])
        index = session.index
        resources = session.resources(sources)

        with Output.progress("Tuning BM25", total=len(grid)) as advance:
            result = tune_params(index, split, resources, grid, system, config.workers,
                                 on_point=lambda *_: advance())

        out_dir = PathManager.ensure_dir(Path(config.paths.output_dir))
        path = write_tuning_report(result, out_dir / "tuning.jsonl")

        if self.as_json:
            Output.json({
                "best": result.best.as_dict(),
                "best_map": result.best_map,
                "system": system.tag,
                "split": result.split,
                "grid": result.records(),
            })
            return

        Output.table(["k1", "b", "MAP", "Best"], grid_rows(result),
                     f"{system.tag} on {result.split}")
        Output.success(
            f"Best: k1={result.best.k1:g} b={result.best.b:g} (MAP {result.best_map * 100:.2f})"
        )
        Output.file_written(str(path), "tuning grid")
        warn_kb_failures(self)

