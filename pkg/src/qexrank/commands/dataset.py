"""
Dataset preparation commands.
"""
from pathlib import Path

from ..console import Output
from ..errors import ConfigError
from ..ingestion import Scenario, convert_semeval_xml, load_mt_texts
from .base import Command, register


@register
class DatasetConvertCommand(Command):
    signature = "dataset:convert {xml} {out} {--scenario=EN} {--mt-texts=} {--json}"
    description = "Convert shared-task question-similarity XML to qexrank JSONL"
    help = """
Examples:
  qexrank dataset:convert SemEval2016-Task3-test.xml data/test.en.jsonl
  qexrank dataset:convert SemEval2016-Task3-test.xml data/test.mt.jsonl \\
      --scenario=MT --mt-texts=translations/test.tsv

--mt-texts is a tab-separated file of query_id and translated text; it
replaces the original question text to build the MT scenario. Candidate
texts, order and relevance labels are kept as they are.
"""

    def handle(self):
        xml_path = self.argument(0)
        out_path = self.argument(1)
        if not xml_path or not out_path:
            raise ConfigError("Usage: qexrank dataset:convert <xml> <out>")
        if not Path(xml_path).exists():
            raise ConfigError(f"XML file not found: {xml_path}")

        scenario = Scenario.parse(self.option("scenario", "EN"))
        mt_file = self.option("mt-texts")
        if scenario is Scenario.MT and not mt_file:
            Output.warn("MT scenario without --mt-texts keeps the original query text")
        mt_texts = load_mt_texts(Path(mt_file)) if mt_file else None

        with Output.spinner("Converting"):
            n_queries = convert_semeval_xml(Path(xml_path), Path(out_path), scenario, mt_texts)

        if self.as_json:
            Output.json({"queries": n_queries, "scenario": scenario.value, "out": out_path})
            return
        Output.success(f"Converted {n_queries} queries ({scenario.value})")
        Output.file_written(out_path)
