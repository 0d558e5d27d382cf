"""
Result Writers
==============

Renders a :class:`ResultTable` as an aligned text table, TSV or JSON.
JSON output has the fixed shape ``{"columns": [...], "rows": [[...]]}``
with ``null`` for ⊥; text tables print ``⊥``.
"""

import csv
import io
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

import click

from nested_datalog.model import Constant, Null, Variable, value_sort_key

logger = logging.getLogger(__name__)

FORMATS = ("table", "json", "tsv")


@dataclass
class ResultTable:
    """Columns and rows of one command's result.

    Cells are values (constants or ⊥), booleans, strings or lists of strings.
    Rows are sorted on output unless ``ordered`` is set.
    """

    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    ordered: bool = False

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def sorted_rows(self) -> List[List[Any]]:
        if self.ordered:
            return list(self.rows)
        return sorted(self.rows, key=lambda row: tuple(_cell_key(c) for c in row))


def _cell_key(cell: Any) -> Tuple:
    if isinstance(cell, (Constant, Null, Variable)):
        return value_sort_key(cell)
    if isinstance(cell, bool):
        return (3, str(int(cell)))
    if isinstance(cell, (list, tuple)):
        return (4, ",".join(str(c) for c in cell))
    return (5, str(cell))


def _text_cell(cell: Any) -> str:
    if isinstance(cell, Null):
        return "⊥"
    if isinstance(cell, Constant):
        return cell.symbol
    if isinstance(cell, bool):
        return "yes" if cell else "no"
    if isinstance(cell, (list, tuple)):
        return ", ".join(str(c) for c in cell) or "-"
    return str(cell)


def _json_cell(cell: Any) -> Any:
    if isinstance(cell, Null):
        return None
    if isinstance(cell, Constant):
        return cell.symbol
    if isinstance(cell, (bool, int)):
        return cell
    if isinstance(cell, (list, tuple)):
        return [_json_cell(c) for c in cell]
    return str(cell)


def use_color(env: Optional[dict] = None) -> bool:
    """Header styling is on unless ``NO_COLOR`` is set."""
    env = os.environ if env is None else env
    return "NO_COLOR" not in env


class ResultWriter:
    """
    Renders result tables.

    Example::

        text = ResultWriter.render(table, "json")
    """

    @staticmethod
    def to_json(result: ResultTable) -> str:
        payload = {
            "columns": list(result.columns),
            "rows": [[_json_cell(c) for c in row] for row in result.sorted_rows()],
        }
        return json.dumps(payload, ensure_ascii=False)

    @staticmethod
    def to_tsv(result: ResultTable) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.sorted_rows():
            writer.writerow([_text_cell(c) for c in row])
        return buffer.getvalue().rstrip("\n")

    @staticmethod
    def to_table(result: ResultTable, color: bool = False) -> str:
        cells = [[_text_cell(c) for c in row] for row in result.sorted_rows()]
        widths = [len(c) for c in result.columns]
        for row in cells:
            widths = [max(w, len(c)) for w, c in zip(widths, row)]
        header = "  ".join(c.ljust(w) for c, w in zip(result.columns, widths)).rstrip()
        if color:
            header = click.style(header, bold=True)
        lines = [header, "  ".join("-" * w for w in widths)]
        lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells)
        lines.extend(f"# {note}" for note in result.notes)
        lines.append(f"({len(cells)} row{'s' if len(cells) != 1 else ''})")
        return "\n".join(lines)

    @classmethod
    def render(cls, result: ResultTable, fmt: str = "table", color: Optional[bool] = None) -> str:
        """
        Render ``result`` in one of :data:`FORMATS`.

        Parameters
        ----------
        result : ResultTable
        fmt : str
        color : bool, optional
            Bold table headers; defaults to :func:`use_color`.
        """
        if fmt == "json":
            return cls.to_json(result)
        if fmt == "tsv":
            return cls.to_tsv(result)
        if fmt != "table":
            raise ValueError(f"unknown output format {fmt!r}")
        return cls.to_table(result, use_color() if color is None else color)

    @classmethod
    def write(cls, result: ResultTable, output_path: str, fmt: str = "table") -> None:
        """Write the rendered result to a file (no styling)."""
        with open(output_path, "w", encoding="utf-8") as fh:
            fh.write(cls.render(result, fmt, color=False) + "\n")
        logger.info("Result written to %s (%d rows)", output_path, result.row_count)
