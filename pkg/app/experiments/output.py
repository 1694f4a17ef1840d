"""
Result Writers

CSV files start with a `# config: {...}` comment line holding the
experiment config as sorted-key JSON (and a `# summary: {...}` line when the
table has summary values), followed by a header row and the data rows. JSON
files hold {"config", "table"}. Floats are written with repr, so the same
results always give the same bytes.
"""

import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from .schemas import ExperimentConfig, OutputFormat, ResultTable


def _dumps(payload: Any, indent: Optional[int] = None) -> str:
    return json.dumps(payload, sort_keys=True, indent=indent, allow_nan=True)


def render_csv(table: ResultTable, config: ExperimentConfig) -> str:
    buffer = io.StringIO()
    buffer.write(f"# config: {_dumps(config.header())}\n")
    if table.summary:
        buffer.write(f"# summary: {_dumps(table.summary)}\n")
    writer = csv.DictWriter(buffer, fieldnames=table.columns, lineterminator="\n")
    writer.writeheader()
    for row in table.rows:
        writer.writerow({column: repr(value) if isinstance(value, float) else value for column, value in row.items()})
    return buffer.getvalue()


def render_json(payload: Dict[str, Any], config: ExperimentConfig) -> str:
    return _dumps({"config": config.header(), **payload}, indent=2) + "\n"


def render_table(table: ResultTable, config: ExperimentConfig) -> str:
    """Serialize a table in the configured format."""
    if config.format == OutputFormat.JSON:
        return render_json({"table": table.model_dump(mode="python")}, config)
    return render_csv(table, config)


def write_output(text: str, path: Optional[str]) -> None:
    """Write to path (parents created) or to stdout when path is None."""
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
