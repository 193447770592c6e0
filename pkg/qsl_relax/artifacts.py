"""Atomic CSV/JSON artifact storage for CLI runs.

Every file is written to a ``.tmp`` sibling and moved into place, so a crashed
run never leaves a half-written artifact and reruns with identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Sequence
from typing import Any

from .dynamics import TimeSeries
from .errors import DataError

SERIES_HEADER = ("t_s", "value")


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def format_value(v: float | int | str | None) -> str:
    """Render one CSV cell; floats use 17 significant digits, None is empty."""
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def format_rows(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render a header and rows as CSV text with ``\\n`` line endings."""
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise DataError(f"row has {len(row)} cells, header has {len(header)}")
        lines.append(",".join(format_value(c) for c in row))
    return "\n".join(lines) + "\n"


def format_series(series: TimeSeries) -> str:
    """Render a series in the ``t_s,value`` schema."""
    return format_rows(
        SERIES_HEADER,
        zip(series.t.tolist(), series.value.tolist(), strict=True),
    )


def dumps(data: Any) -> str:
    """Serialize ``data`` as stable, indented JSON."""
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


class ArtifactWriter:
    """Write run artifacts into one output directory.

    Attributes:
        out_dir: Directory receiving the files.
        written: Paths written so far, in order.
    """

    def __init__(self, out_dir: str = "qsl-out") -> None:
        """Create a writer; the directory is created on first write.

        Args:
            out_dir: Filesystem path of the output directory.
        """
        self.out_dir = out_dir
        self.written: list[str] = []

    def path(self, name: str) -> str:
        """Return the full path of artifact ``name``."""
        return os.path.join(self.out_dir, name)

    def _save(self, name: str, text: str) -> str:
        target = self.path(name)
        atomic_write_text(target, text)
        self.written.append(target)
        return target

    def write_series(self, name: str, series: TimeSeries) -> str:
        """Write a ``t_s,value`` CSV and return its path."""
        return self._save(name, format_series(series))

    def write_rows(
        self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> str:
        """Write a tabular CSV and return its path."""
        return self._save(name, format_rows(header, rows))

    def write_json(self, name: str, data: Any) -> str:
        """Write ``data`` as JSON and return its path."""
        return self._save(name, dumps(data))

    def load_json(self, name: str) -> Any:
        """Read back a JSON artifact.

        Raises:
            DataError: If the file is missing or not valid JSON.
        """
        try:
            with open(self.path(name), encoding="utf-8") as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read artifact {name}: {exc}") from exc
