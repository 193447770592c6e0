#!/usr/bin/env python3
"""Generate pydoc HTML for the qsl_relax package.

Writes one page per module into ./docs plus an index.html listing each module
with the first line of its docstring.
"""

from __future__ import annotations

import html
import importlib
import os
import pkgutil
import pydoc
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
PKG_NAME = "qsl_relax"
PKG_DIR = ROOT / PKG_NAME
DOCS_DIR = ROOT / "docs"


def discover_modules(package_dir: Path, pkg_name: str) -> list[str]:
    """Return the package and its public modules, sorted by name.

    Args:
        package_dir: Filesystem path to the package directory.
        pkg_name: The importable package name (e.g., "qsl_relax").
    """
    names = [pkg_name]
    for info in pkgutil.iter_modules([str(package_dir)], prefix=pkg_name + "."):
        if not info.name.rsplit(".", 1)[-1].startswith("_"):
            names.append(info.name)
    return sorted(names)


def summary_line(module: str) -> str:
    """Return the first docstring line of ``module`` (empty if it has none)."""
    doc = importlib.import_module(module).__doc__ or ""
    return doc.strip().splitlines()[0] if doc.strip() else ""


def render_index(entries: list[tuple[str, str]]) -> str:
    """Render index.html as a two-column table of modules and summaries."""
    rows = "".join(
        f'<tr><td><a href="{m}.html"><code>{html.escape(m)}</code></a></td>'
        f"<td>{html.escape(s)}</td></tr>"
        for m, s in entries
    )
    return f"""<!DOCTYPE html>
<html lang="en">
  <head>
    <meta charset="utf-8" />
    <title>{html.escape(PKG_NAME)} API</title>
    <style>
      body {{ font: 14px/1.45 system-ui, sans-serif; margin: 2rem; }}
      td {{ padding: 0.2rem 1rem 0.2rem 0; vertical-align: top; }}
    </style>
  </head>
  <body>
    <h1>{html.escape(PKG_NAME)} API</h1>
    <table>{rows}</table>
  </body>
</html>
"""


def main() -> int:
    """Write pydoc pages and the index into docs/."""
    sys.path.insert(0, str(ROOT))
    DOCS_DIR.mkdir(parents=True, exist_ok=True)
    modules = discover_modules(PKG_DIR, PKG_NAME)

    cwd = os.getcwd()
    os.chdir(DOCS_DIR)
    try:
        for mod in modules:
            pydoc.writedoc(mod)
    finally:
        os.chdir(cwd)

    entries = [(m, summary_line(m)) for m in modules]
    (DOCS_DIR / "index.html").write_text(render_index(entries), encoding="utf-8")
    print(f"Wrote {len(modules)} module pages to {DOCS_DIR}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
