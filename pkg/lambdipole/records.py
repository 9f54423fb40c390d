"""
Run records: CSV tables, JSON reports and the per-run manifest.json.

CSV files carry a header row, ',' separator, '.' decimal and LF line endings.
"""

from __future__ import annotations

import json
import platform
import time
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd


def ensure_dir(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    frame.to_csv(path, index=False, sep=",", lineterminator="\n", float_format="%.17g")
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(obj: Dict[str, Any], path: Path) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(obj), f, indent=2)
        f.write("\n")
    return path


def versions() -> Dict[str, str]:
    import scipy
    import tqdm

    from . import __version__

    return {
        "lambdipole": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "tqdm": tqdm.__version__,
    }


class RunRecorder:
    """
    Collects what a command wrote and emits manifest.json at the end.

    Usage:
        rec = RunRecorder(out_dir, "dipole", config_dict)
        rec.add(field.save(out_dir, "stream"))
        rec.finish(status="ok")
    """

    def __init__(self, out_dir: Path, command: str, config: Dict[str, Any]):
        self.out_dir = ensure_dir(Path(out_dir))
        self.command = command
        self.config = config
        self.outputs = []
        self.started = time.time()

    def add(self, path: Path) -> None:
        self.outputs.append(Path(path).name)

    def finish(self, status: str = "ok", extra: Optional[Dict[str, Any]] = None) -> Path:
        manifest = {
            "command": self.command,
            "status": status,
            "config": self.config,
            "versions": versions(),
            "wall_time_s": round(time.time() - self.started, 3),
            "outputs": sorted(self.outputs),
        }
        if extra:
            manifest.update(extra)
        return write_json(manifest, self.out_dir / "manifest.json")
