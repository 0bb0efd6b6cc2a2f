"""Result store: canonical JSON and CSV outputs of a run.

Primary outputs are byte-identical across reruns: keys are sorted, floats are
written with ``repr`` and non-finite values become ``null``. Anything that
varies between runs (timestamp, version) goes to ``metadata.json``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Sequence
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from orbits import __version__

logger = logging.getLogger(__name__)


def _clean(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(_clean(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


class ResultStore:
    """Writes the files of one command run into an output directory."""

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = Path(out_dir)
        self.written: list[Path] = []

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        self.written.append(path)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        path = self._path(name)
        path.write_text(canonical_json(data))
        logger.info(f"Wrote {path}")
        return path

    def write_csv(
        self, name: str, rows: Iterable[dict[str, Any]], fieldnames: Sequence[str]
    ) -> Path:
        path = self._path(name)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _csv_value(row.get(k)) for k in fieldnames})
        logger.info(f"Wrote {path}")
        return path

    def write_metadata(self, command: str, config_path: Path | None = None) -> Path:
        return self.write_json(
            "metadata.json",
            {
                "command": command,
                "config": None if config_path is None else str(config_path),
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "version": __version__,
                "outputs": sorted(p.name for p in self.written),
            },
        )


def _csv_value(value: Any) -> Any:
    value = _clean(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value
