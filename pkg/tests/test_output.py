"""Tests for rendering result tables."""

import json

import pytest

from nested_datalog.model import NULL, Constant
from nested_datalog.output import ResultTable, ResultWriter, use_color

COM = Constant("*.com")


@pytest.fixture
def table():
    return ResultTable(["X", "Y"], [[Constant("5"), NULL], [Constant("1"), COM]])


class TestRender:
    def test_table(self, table):
        text = ResultWriter.render(table, "table", color=False)
        assert text.splitlines() == ["X  Y", "-  -----", "1  *.com", "5  ⊥", "(2 rows)"]

    def test_table_notes_and_single_row(self):
        result = ResultTable(["ok"], [[True]], notes=["fuseki: decorrelate"])
        lines = ResultWriter.render(result, "table", color=False).splitlines()
        assert lines[2] == "yes"
        assert lines[-2:] == ["# fuseki: decorrelate", "(1 row)"]

    def test_json_uses_null(self, table):
        payload = json.loads(ResultWriter.render(table, "json"))
        assert payload == {"columns": ["X", "Y"], "rows": [["1", "*.com"], ["5", None]]}

    def test_tsv(self, table):
        assert ResultWriter.render(table, "tsv") == "X\tY\n1\t*.com\n5\t⊥"

    def test_ordered_rows_keep_their_order(self):
        result = ResultTable(["rule"], [["b."], ["a."]], ordered=True)
        assert json.loads(ResultWriter.render(result, "json"))["rows"] == [["b."], ["a."]]

    def test_lists_and_empty_lists(self):
        result = ResultTable(["flipped_by"], [[["free_var_policy", "substitution_points"]], [[]]])
        payload = json.loads(ResultWriter.render(result, "json"))
        assert [] in [row[0] for row in payload["rows"]]
        text = ResultWriter.render(result, "table", color=False)
        assert "free_var_policy, substitution_points" in text
        assert "-" in text.splitlines()

    def test_unknown_format(self, table):
        with pytest.raises(ValueError):
            ResultWriter.render(table, "xml")

    def test_write(self, table, tmp_path):
        out = tmp_path / "result.json"
        ResultWriter.write(table, str(out), "json")
        assert json.loads(out.read_text(encoding="utf-8"))["columns"] == ["X", "Y"]


class TestColor:
    def test_no_color(self):
        assert not use_color({"NO_COLOR": "1"})
        assert use_color({})

    def test_bold_header(self, table):
        assert ResultWriter.render(table, "table", color=True).startswith("\x1b[1m")
