"""
Tests for BM25 parameter tuning.
"""
import json

import pytest

from qexrank.errors import ConfigError, EvaluationError
from qexrank.evaluation import SystemSpec, evaluate_system
from qexrank.expanders import ExpansionResources
from qexrank.index import Bm25Params, build_index
from qexrank.ingestion import load_dataset
from qexrank.tuning import (
    DEFAULT_B_GRID,
    ParamGrid,
    grid_rows,
    parse_grid,
    tune_params,
    write_tuning_report,
)

from conftest import toy_records, write_jsonl


@pytest.fixture
def dev(workspace, analyzer):
    split = load_dataset(workspace["dev_en"], "EN", "dev", analyzer)
    return split, build_index(split.documents), ExpansionResources(analyzer=analyzer)


class TestParseGrid:
    def test_both_keys(self):
        grid = parse_grid("k1=1.2,0.8 b=0.75")
        assert grid.k1_values == (0.8, 1.2)
        assert grid.b_values == (0.75,)
        assert len(grid) == 2

    def test_omitted_key_keeps_defaults(self):
        assert parse_grid("k1=1.0").b_values == DEFAULT_B_GRID

    @pytest.mark.parametrize("text", ["", "k1=", "k1=a,b", "k=1", "k1=1 k1=2", "b=1.5", "k1=-1"])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)

    def test_points_order(self):
        grid = ParamGrid(k1_values=(1.2, 0.4), b_values=(1.0, 0.0))
        assert [(p.k1, p.b) for p in grid.points()] == [(0.4, 0.0), (0.4, 1.0), (1.2, 0.0), (1.2, 1.0)]


class TestTuneParams:
    def test_singleton_grid(self, dev):
        split, index, resources = dev
        result = tune_params(index, split, resources, ParamGrid((1.2,), (0.75,)))
        expected = evaluate_system(SystemSpec.parse("KW", "EN"), split, index,
                                   Bm25Params(1.2, 0.75), resources)
        assert result.best == Bm25Params(1.2, 0.75)
        assert result.best_map == expected.map_score

    def test_matches_exhaustive_search(self, dev):
        split, index, resources = dev
        grid = ParamGrid((0.5, 1.5), (0.0, 1.0))
        seen = []
        result = tune_params(index, split, resources, grid,
                             on_point=lambda p, score: seen.append((p, score)))
        assert len(seen) == 4
        best_score = max(score for _, score in seen)
        assert result.best_map == best_score
        assert result.best == min(
            (p for p, score in seen if score == best_score), key=lambda p: (p.k1, p.b)
        )

    def test_all_relevant_split(self, tmp_path, analyzer):
        records = toy_records("dev", "EN")
        for rec in records:
            for cand in rec["candidates"]:
                cand["relevance"] = "Relevant"
        split = load_dataset(write_jsonl(tmp_path / "dev.jsonl", records), "EN", "dev", analyzer)
        index = build_index(split.documents)
        result = tune_params(index, split, ExpansionResources(analyzer=analyzer),
                             ParamGrid((2.0, 0.4, 1.2), (1.0, 0.0)))
        assert result.best_map == 1.0
        assert result.best == Bm25Params(0.4, 0.0)

    def test_empty_split(self, tmp_path, analyzer):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        split = load_dataset(path, "EN", "dev", analyzer)
        with pytest.raises(EvaluationError):
            tune_params(build_index([]), split, ExpansionResources(analyzer=analyzer))


class TestTuningReport:
    def test_records_and_rows(self, dev, tmp_path):
        split, index, resources = dev
        result = tune_params(index, split, resources, ParamGrid((0.4, 1.2), (0.75,)))
        path = write_tuning_report(result, tmp_path / "tuning.jsonl")
        records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
        assert [(r["k1"], r["b"]) for r in records] == [(0.4, 0.75), (1.2, 0.75)]
        assert sum(r["best"] for r in records) == 1
        assert {r["system"] for r in records} == {"KW-EN"}
        rows = grid_rows(result)
        assert [row[:2] for row in rows] == [["0.4", "0.75"], ["1.2", "0.75"]]
        assert [row[3] for row in rows].count("*") == 1
