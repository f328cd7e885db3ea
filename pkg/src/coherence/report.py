"""Report tables rendered as aligned markdown or as machine-readable text.

Cells are formatted once, as strings, and every renderer emits those same
strings, so the three formats can never disagree on a number.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

FORMATS = ("md", "csv", "json")


def fmt_tokens(value: float, sd: Optional[float] = None) -> str:
    """Thousands of tokens, one decimal: ``1,979.6K tok``."""
    text = f"{value / 1000:,.1f}K tok"
    if sd is not None:
        text += f" ± {sd / 1000:,.1f}K tok"
    return text


def fmt_pct(value: float, sd: Optional[float] = None) -> str:
    text = f"{value * 100:.1f}%"
    if sd is not None:
        text += f" ± {sd * 100:.1f}%"
    return text


def fmt_bound(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    if value < 0:
        return f"0.0% (bound<0: {value * 100:.1f}%)"
    return fmt_pct(value)


def fmt_frac(value: float, places: int = 3) -> str:
    return f"{value:.{places}f} frac"


def fmt_count(value: int, unit: str) -> str:
    return f"{value:,} {unit}"


@dataclass
class ReportTable:
    name: str
    title: str
    columns: list
    rows: list = field(default_factory=list)
    footnotes: list = field(default_factory=list)

    def add_row(self, cells: Sequence[str]) -> None:
        if len(cells) != len(self.columns):
            raise ValueError(f"{self.name}: row has {len(cells)} cells, "
                             f"expected {len(self.columns)}")
        self.rows.append([str(c) for c in cells])

    # -- renderers --------------------------------------------------------

    def to_markdown(self) -> str:
        widths = [len(c) for c in self.columns]
        for row in self.rows:
            widths = [max(w, len(c)) for w, c in zip(widths, row)]

        def line(cells):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

        out = [f"## {self.title}", "", line(self.columns),
               "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        out.extend(line(row) for row in self.rows)
        if self.footnotes:
            out.append("")
            out.extend(f"- {note}" for note in self.footnotes)
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "title": self.title,
            "columns": list(self.columns),
            "rows": [dict(zip(self.columns, row)) for row in self.rows],
            "footnotes": list(self.footnotes),
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"

    def render(self, fmt: str = "md") -> str:
        if fmt == "md":
            return self.to_markdown()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")

    def write(self, directory: Path, formats: Sequence[str] = FORMATS) -> list[Path]:
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for fmt in formats:
            path = directory / f"{self.name}.{fmt}"
            path.write_text(self.render(fmt), encoding="utf-8")
            written.append(path)
        return written


def cells_from_csv(text: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(text)))[1:]


def cells_from_json(text: str) -> list[list[str]]:
    doc = json.loads(text)
    return [[row[c] for c in doc["columns"]] for row in doc["rows"]]


def cells_from_markdown(text: str) -> list[list[str]]:
    rows = [ln for ln in text.splitlines() if ln.startswith("| ")]
    return [[c.strip() for c in ln.strip("|").split(" | ")] for ln in rows[1:]]
