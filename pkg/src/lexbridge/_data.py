"""Access to the TSV tables shipped in ``lexbridge/data``."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_path(name: str) -> Path:
    return Path(str(resources.files("lexbridge") / "data" / name))


def parse_tsv(text: str) -> tuple[list[tuple[str, ...]], set[str]]:
    """Split TSV text into rows and ``#!`` directives.

    Lines starting with ``#`` are comments. Trailing empty columns are kept
    so a rule may map to the empty string.
    """
    rows: list[tuple[str, ...]] = []
    directives: set[str] = set()
    for line in text.splitlines():
        if line.startswith("#!"):
            directives.add(line[2:].strip())
            continue
        if not line.strip() or line.startswith("#"):
            continue
        rows.append(tuple(line.split("\t")))
    return rows, directives


def read_tsv(path: str | Path) -> tuple[list[tuple[str, ...]], set[str]]:
    return parse_tsv(Path(path).read_text(encoding="utf-8"))


def read_pairs(path: str | Path) -> list[tuple[str, str]]:
    rows, _ = read_tsv(path)
    out = []
    for row in rows:
        if len(row) == 1:
            row = (row[0], "")
        out.append((row[0], row[1]))
    return out
