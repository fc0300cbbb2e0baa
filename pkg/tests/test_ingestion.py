"""
Tests for dataset and resource ingestion.
"""
import json

import pytest

from qexrank.errors import IngestionError
from qexrank.ingestion import (
    Relevance,
    Scenario,
    check_alignment,
    convert_semeval_xml,
    load_dataset,
    load_embeddings,
    load_hypernym_graph,
    load_kb_cache,
    load_mt_texts,
    merge_documents,
    save_kb_cache,
)
from qexrank.resources import KbEntry, KbSubjectCache

from conftest import TRAVEL_SUBJECTS, toy_records, write_jsonl


def record(qid="Q1", n=10, **overrides):
    rec = {
        "query_id": qid,
        "text": "travel in june",
        "candidates": [
            {"doc_id": f"{qid}_R{i}", "text": f"doc {i}", "relevance": "Irrelevant"}
            for i in range(n)
        ],
    }
    rec.update(overrides)
    return rec


class TestLoadDataset:
    def test_toy_split(self, tmp_path):
        path = write_jsonl(tmp_path / "test.jsonl", toy_records("test", "EN"))
        split = load_dataset(path, "EN", split="test")
        assert split.query_ids == ["Q1", "Q2"]
        assert len(split.documents) == 20
        q1 = split.query("Q1")
        assert q1.relevant_ids == {"Q1_R1"}
        assert q1.qrels["Q1_R1"] is Relevance.RELEVANT

    def test_subject_and_body_are_joined(self, tmp_path):
        rec = record()
        del rec["text"]
        rec.update(subject="Travel", body="in june")
        split = load_dataset(write_jsonl(tmp_path / "d.jsonl", [rec]), "EN")
        assert split.query("Q1").text == "Travel in june"

    def test_candidate_count(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [record(n=9)])
        with pytest.raises(IngestionError, match="expected 10 candidates"):
            load_dataset(path, "EN")
        assert len(load_dataset(path, "EN", expected_candidates=None).documents) == 9

    def test_error_names_file_and_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(record("Q1")) + "\n{not json\n", encoding="utf-8")
        with pytest.raises(IngestionError, match=r"d\.jsonl:2"):
            load_dataset(path, "EN")

    def test_duplicate_query(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [record("Q1"), record("Q1")])
        with pytest.raises(IngestionError, match="duplicate query_id"):
            load_dataset(path, "EN")

    def test_query_id_with_whitespace(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [record("Q1"), record("Q 2")])
        with pytest.raises(IngestionError, match=r"d\.jsonl:2: query_id 'Q 2' contains"):
            load_dataset(path, "EN")

    def test_doc_id_with_whitespace(self, tmp_path):
        rec = record()
        rec["candidates"][4]["doc_id"] = "Q1 R4"
        with pytest.raises(IngestionError, match="doc_id 'Q1 R4' contains whitespace"):
            load_dataset(write_jsonl(tmp_path / "d.jsonl", [rec]), "EN")

    def test_dangling_doc_id(self, tmp_path):
        rec = record()
        del rec["candidates"][3]["text"]
        with pytest.raises(IngestionError, match="dangling doc_id 'Q1_R3'"):
            load_dataset(write_jsonl(tmp_path / "d.jsonl", [rec]), "EN")

    def test_unknown_relevance(self, tmp_path):
        rec = record()
        rec["candidates"][0]["relevance"] = "Maybe"
        with pytest.raises(IngestionError, match="Maybe"):
            load_dataset(write_jsonl(tmp_path / "d.jsonl", [rec]), "EN")

    def test_scenario_mismatch(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [record(scenario="MT")])
        with pytest.raises(IngestionError, match="does not match"):
            load_dataset(path, "EN")

    def test_shared_document_across_queries(self, tmp_path):
        a = record("Q1")
        b = record("Q2")
        b["candidates"][0]["doc_id"] = "Q1_R0"
        with pytest.raises(IngestionError, match="already belongs"):
            load_dataset(write_jsonl(tmp_path / "d.jsonl", [a, b]), "EN")

    @pytest.mark.parametrize("label, expected", [
        ("PerfectMatch", Relevance.RELEVANT),
        ("Relevant", Relevance.RELEVANT),
        ("Irrelevant", Relevance.IRRELEVANT),
    ])
    def test_relevance_labels(self, label, expected):
        assert Relevance.parse(label) is expected


class TestAlignment:
    def test_en_and_mt_agree(self, tmp_path):
        en = load_dataset(write_jsonl(tmp_path / "en.jsonl", toy_records("test", "EN")), "EN")
        mt = load_dataset(write_jsonl(tmp_path / "mt.jsonl", toy_records("test", "MT")), "MT")
        check_alignment(en, mt)
        assert len(merge_documents([en, mt])) == 20

    def test_label_disagreement(self, tmp_path):
        records = toy_records("test", "MT")
        records[0]["candidates"][0]["relevance"] = "Irrelevant"
        en = load_dataset(write_jsonl(tmp_path / "en.jsonl", toy_records("test", "EN")), "EN")
        mt = load_dataset(write_jsonl(tmp_path / "mt.jsonl", records), "MT")
        with pytest.raises(IngestionError, match="disagree"):
            check_alignment(en, mt)


XML = """<?xml version="1.0" encoding="UTF-8"?>
<root>
  <OrgQuestion ORGQ_ID="Q268">
    <OrgQSubject>Travel</OrgQSubject>
    <OrgQBody>Im likely to travel in june</OrgQBody>
    <Thread THREAD_SEQUENCE="Q268_R1">
      <RelQuestion RELQ_ID="Q268_R1" RELQ_RANKING_ORDER="1" RELQ_RELEVANCE2ORGQ="PerfectMatch">
        <RelQSubject>Trips</RelQSubject>
        <RelQBody>good places to visit</RelQBody>
      </RelQuestion>
    </Thread>
  </OrgQuestion>
  <OrgQuestion ORGQ_ID="Q268">
    <OrgQSubject>Travel</OrgQSubject>
    <OrgQBody>Im likely to travel in june</OrgQBody>
    <Thread THREAD_SEQUENCE="Q268_R2">
      <RelQuestion RELQ_ID="Q268_R2" RELQ_RANKING_ORDER="2" RELQ_RELEVANCE2ORGQ="Irrelevant">
        <RelQSubject>Visa</RelQSubject>
        <RelQBody>visa transfer</RelQBody>
      </RelQuestion>
    </Thread>
  </OrgQuestion>
</root>
"""


class TestConvertXml:
    def test_convert(self, tmp_path):
        xml = tmp_path / "task.xml"
        xml.write_text(XML, encoding="utf-8")
        out = tmp_path / "out.jsonl"
        assert convert_semeval_xml(xml, out, "EN") == 1
        split = load_dataset(out, "EN", expected_candidates=None)
        query = split.query("Q268")
        assert query.text == "Travel Im likely to travel in june"
        assert query.candidates == ("Q268_R1", "Q268_R2")
        assert query.relevant_ids == {"Q268_R1"}
        assert split.document("Q268_R1").raw_text == "Trips good places to visit"

    def test_mt_texts_replace_query(self, tmp_path):
        xml = tmp_path / "task.xml"
        xml.write_text(XML, encoding="utf-8")
        tsv = tmp_path / "mt.tsv"
        tsv.write_text("Q268\tI am likely travel in june\n", encoding="utf-8")
        out = tmp_path / "out.jsonl"
        convert_semeval_xml(xml, out, Scenario.MT, load_mt_texts(tsv))
        split = load_dataset(out, "MT", expected_candidates=None)
        assert split.query("Q268").text == "I am likely travel in june"

    def test_broken_xml(self, tmp_path):
        xml = tmp_path / "task.xml"
        xml.write_text("<root>", encoding="utf-8")
        with pytest.raises(IngestionError, match="task.xml"):
            convert_semeval_xml(xml, tmp_path / "out.jsonl")


class TestEmbeddings:
    def test_malformed_lines_are_skipped(self, tmp_path):
        path = tmp_path / "vec.txt"
        path.write_text("travel 1 0\ntrips 0.9 0.4\nbroken x y\nlonely\nTravel 0 1\n",
                        encoding="utf-8")
        store = load_embeddings(path)
        assert store.words == ("travel", "trips")
        assert store.load_stats.malformed == 2
        assert store.load_stats.duplicates == 1

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "vec.txt"
        path.write_text("travel 1 0\ntrips 0.9 0.4 0.1\n", encoding="utf-8")
        with pytest.raises(IngestionError, match="vec.txt:2"):
            load_embeddings(path)

    def test_empty(self, tmp_path):
        path = tmp_path / "vec.txt"
        path.write_text("\n", encoding="utf-8")
        with pytest.raises(IngestionError):
            load_embeddings(path)


class TestHypernymGraph:
    def test_load_with_header(self, tmp_path):
        path = tmp_path / "graph.tsv"
        path.write_text(
            "hyponym\thypernym\tconfidence\n"
            "operating expense\ttravel\t0.82\n"
            "operating expense\ttravel\t0.60\n"
            "weekend\tjune\t1.5\n",
            encoding="utf-8",
        )
        graph = load_hypernym_graph(path)
        edges = graph.hyponyms("travel")
        assert [(e.label, e.confidence) for e in edges] == [("operating expense", 0.82)]
        assert "june" not in graph

    @pytest.mark.parametrize("first_line", [
        "operating expense\ttravel\t0,82",
        "hyponym\thypernym\tscore",
    ])
    def test_unparseable_first_line(self, tmp_path, first_line):
        path = tmp_path / "graph.tsv"
        path.write_text(first_line + "\nrelated expense\ttravel\t0.9\n", encoding="utf-8")
        with pytest.raises(IngestionError, match=r"graph\.tsv:1: unparseable confidence"):
            load_hypernym_graph(path)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "graph.tsv"
        path.write_text("operating expense\ttravel\n", encoding="utf-8")
        with pytest.raises(IngestionError, match="graph.tsv:1"):
            load_hypernym_graph(path)


class TestKbCache:
    def test_round_trip(self, tmp_path):
        cache = KbSubjectCache([
            KbEntry(key="Travel", subjects=TRAVEL_SUBJECTS, fetched_at="2024-01-01T00:00:00+00:00"),
            KbEntry(key="june", subjects=(), fetched_at="2024-01-01T00:00:00+00:00"),
        ])
        path = save_kb_cache(cache, tmp_path / "kb.jsonl")
        loaded = load_kb_cache(path)
        assert loaded == cache
        assert list(loaded.subjects_for("travel")) == list(TRAVEL_SUBJECTS)
        assert loaded.subjects_for("june") is None

    def test_category_prefix_is_cleaned(self):
        entry = KbEntry(key="travel", subjects=("Category:Tourist_activities",),
                        fetched_at="2024-01-01T00:00:00+00:00")
        assert entry.subjects == ("Tourist activities",)

    def test_missing_file(self, tmp_path):
        assert len(load_kb_cache(tmp_path / "none.jsonl")) == 0
        with pytest.raises(IngestionError):
            load_kb_cache(tmp_path / "none.jsonl", missing_ok=False)

    def test_bad_timestamp(self, tmp_path):
        path = write_jsonl(tmp_path / "kb.jsonl", [
            {"key": "travel", "subjects": [], "fetched_at": "yesterday"},
        ])
        with pytest.raises(IngestionError, match="ISO-8601"):
            load_kb_cache(path)
