"""
Expansion inspection and knowledge-base cache commands.
"""
from typing import List

from ..analysis import query_words
from ..console import Output
from ..errors import ConfigError, OfflineError
from ..expanders import (
    EXPANSION_SOURCES,
    combine,
    expansion_stats,
    parse_sources,
    render_expansion,
)
from ..ingestion import Scenario
from ..kb_client import FetchOutcome
from .base import Command, register
from .pipeline import ANALYZER_FLAGS, DATASET_FLAGS, RESOURCE_FLAGS, warn_kb_failures

ALL_SOURCES = "KW+WE+DB+HN"


@register
class ExpandCommand(Command):
    signature = (
        "expand {query_id?} {--text=} {--sources=KW+WE+DB+HN} "
        "{--scenario=EN} {--split=test} {--json}"
    )
    description = "Show how a query is expanded, term by term"
    config_flags = DATASET_FLAGS + ANALYZER_FLAGS + RESOURCE_FLAGS
    help = """
Examples:
  qexrank expand Q268
  qexrank expand --text="Which is the best travel agency in Doha?"
  qexrank expand Q268 --sources=KW+HN --threshold=0.6
  qexrank expand Q268 --scenario=MT --offline --json

Each added term is shown with the query word it came from, the raw
neighbour, subject label or hyponym it was analyzed out of, and the
cosine or graph confidence where the source has one.
"""

    def handle(self):
        session = self.session
        sources = parse_sources(self.option("sources", ALL_SOURCES))
        scenario = Scenario.parse(self.option("scenario", "EN"))
        query_id = self.argument(0)
        text = self.option("text")

        if query_id is not None:
            text = session.split(self.option("split", "test"), scenario).query(query_id).text
        elif text is None:
            raise ConfigError("Give a query_id or --text=... to expand")
        else:
            query_id = "text"

        expanded = combine(query_id, scenario, text, sources, session.resources(sources))

        if self.as_json:
            payload = expanded.to_dict()
            payload["kb_failures"] = session.fetch_report.failed
            Output.json(payload)
            return

        Output.raw(render_expansion(expanded))
        warn_kb_failures(self)


@register
class StatsCommand(Command):
    signature = "stats {--sources=KW+WE+DB+HN} {--split=test} {--json}"
    description = "Average number of words each expansion source adds per query"
    config_flags = DATASET_FLAGS + ANALYZER_FLAGS + RESOURCE_FLAGS
    help = """
Examples:
  qexrank stats
  qexrank stats --split=dev --sources=KW+WE
  qexrank stats --offline --json

Counts are per scenario. A source only counts the words the keyword
query does not already have; "union" counts new words across all the
enabled expansion sources together.
"""

    def handle(self):
        session = self.session
        sources = parse_sources(self.option("sources", ALL_SOURCES))
        split_name = self.option("split", "test")
        resources = session.resources(sources)

        configured = [sc for name, sc, _ in session.configured_splits((split_name,))]
        if not configured:
            raise ConfigError(f"No {split_name} dataset configured")

        results = {}
        for scenario in configured:
            split = session.split(split_name, scenario)
            expanded = [
                combine(q.query_id, scenario, q.text, sources, resources)
                for q in sorted(split.queries, key=lambda q: q.query_id)
            ]
            results[scenario] = expansion_stats(expanded)

        if self.as_json:
            Output.json({sc.value: stats.to_dict() for sc, stats in results.items()})
            return

        enabled = [s for s in EXPANSION_SOURCES if s in sources]
        headers = ["Scenario", "Queries", "KW words"] + [f"+{s.short}" for s in enabled]
        headers.append("+union")
        rows = []
        for scenario, stats in results.items():
            row = [scenario.value, str(stats.n_queries), f"{stats.keyword_mean:.2f}"]
            row += [f"{stats.added[s]:.2f}" for s in enabled]
            row.append(f"{stats.union_added:.2f}")
            rows.append(row)
        Output.table(headers, rows, f"Expansion size ({split_name})")
        warn_kb_failures(self)


@register
class FetchKbCommand(Command):
    signature = "fetch-kb {terms*} {--from-dataset=} {--scenario=} {--refresh} {--json}"
    description = "Populate the DBpedia subject cache from the live endpoint"
    config_flags = DATASET_FLAGS + ANALYZER_FLAGS + ("kb-cache", "kb-endpoint", "kb-min-delay")
    help = """
Examples:
  qexrank fetch-kb travel agency doha --kb-cache=kb.jsonl
  qexrank fetch-kb --from-dataset=test               # every query word of the split
  qexrank fetch-kb --from-dataset=dev --scenario=MT --refresh

Cached terms are not fetched again unless --refresh is given. Requests
are spaced by kb.min_delay seconds. The endpoint can be overridden with
QEXRANK_KB_ENDPOINT.
"""

    def handle(self):
        session = self.session
        config = session.config
        if config.offline:
            raise OfflineError("fetch-kb queries the live endpoint and cannot run with --offline")
        if config.paths.kb_cache is None:
            raise ConfigError("No KB cache configured; pass --kb-cache=PATH")

        terms = self._terms()
        if not terms:
            raise ConfigError("Give terms to fetch or --from-dataset=dev|test")

        kb = session.kb()
        refresh = self.flag("refresh")
        with Output.progress("Fetching KB subjects", total=len(terms)) as advance:
            for term in terms:
                kb.fetch(term, refresh=refresh)
                advance()

        report = session.fetch_report
        counts = {o.value: report.count(o) for o in FetchOutcome}
        if self.as_json:
            Output.json({
                "terms": [
                    {"term": term, "outcome": outcome, "error": error}
                    for term, outcome, error in report.rows()
                ],
                "counts": counts,
                "network_calls": report.network_calls,
                "cache": str(session.kb_cache_path),
            })
            return

        Output.table(["Term", "Outcome", "Error"], report.rows(), "KB fetch report")
        Output.info(
            ", ".join(f"{name}: {n}" for name, n in counts.items() if n)
            + f" ({report.network_calls} network call(s))"
        )
        Output.file_written(str(session.kb_cache_path), "KB cache")
        if report.failed:
            Output.warn(f"{len(report.failed)} term(s) failed; run again to retry them")

    def _terms(self) -> List[str]:
        terms = [t.lower() for t in self.positionals()]
        split_name = self.option("from-dataset")
        if split_name:
            session = self.session
            wanted = self.option("scenario")
            scenarios = [Scenario.parse(wanted)] if wanted else [
                sc for _, sc, _ in session.configured_splits((split_name,))
            ]
            if not scenarios:
                raise ConfigError(f"No {split_name} dataset configured")
            for scenario in scenarios:
                split = session.split(split_name, scenario)
                for query in sorted(split.queries, key=lambda q: q.query_id):
                    terms.extend(query_words(query.text, session.analyzer))
        return list(dict.fromkeys(terms))

