"""
Tests for utility classes.
"""
import pytest
from jinja2 import TemplateNotFound
from unittest.mock import patch

from qexrank.errors import QexrankError
from qexrank.templates import TemplateLoader
from qexrank.utils import PathManager, split_csv


class TestPathManager:
    def test_atomic_write_creates_parents(self, tmp_path):
        path = PathManager.atomic_write(tmp_path / "a" / "b" / "out.txt", "hello")
        assert path.read_text(encoding="utf-8") == "hello"

    def test_atomic_write_replaces(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("old", encoding="utf-8")
        PathManager.atomic_write(path, "new")
        assert path.read_text(encoding="utf-8") == "new"
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]

    def test_failed_rename_keeps_old_file(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("old", encoding="utf-8")
        with patch("qexrank.utils.os.replace", side_effect=OSError("disk full")):
            with pytest.raises(QexrankError, match="disk full"):
                PathManager.atomic_write(path, "new")
        assert path.read_text(encoding="utf-8") == "old"
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]

    def test_lines(self, tmp_path):
        path = PathManager.atomic_write_lines(tmp_path / "out.txt", ["a", "b"])
        assert path.read_bytes() == b"a\nb\n"

    def test_ensure_dir(self, tmp_path):
        target = PathManager.ensure_dir(tmp_path / "x" / "y")
        assert target.is_dir()
        assert PathManager.ensure_dir(target) == target


class TestSplitCsv:
    @pytest.mark.parametrize("value, expected", [
        ("a,b", ["a", "b"]),
        (" a , ,b ,", ["a", "b"]),
        ("", []),
    ])
    def test_split(self, value, expected):
        assert split_csv(value) == expected


class TestTemplates:
    def test_bundled_templates_render(self):
        text = TemplateLoader.render("expansion.txt.j2", {
            "query_id": "Q1", "scenario": "EN", "sources": ["KW"], "keyword": ["travel"],
            "sections": [], "total": 1,
        })
        assert text.splitlines() == ["Query Q1 (EN), sources: KW", "keyword: travel", "total terms: 1"]

    def test_unknown_template(self):
        with pytest.raises(TemplateNotFound):
            TemplateLoader.render("missing.j2", {})
