"""
Single writer for every file a run emits.
"""
import hashlib
import json
import logging
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..discretization.grid import Field
from ..discretization.serialization import boundary_to_csv, field_to_csv, write_binary, write_table

logger = logging.getLogger(__name__)


def _json_default(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactWriter:
    """
    Writes run outputs under one directory and keeps the list of emitted files.

    Writes are serialized by a lock so worker threads can hand results here.
    """

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._files: List[Path] = []

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def register(self, path: Union[str, Path]) -> Path:
        """Record a file written by a module-level exporter."""
        path = Path(path)
        with self._lock:
            if path not in self._files:
                self._files.append(path)
        logger.debug(f"Registered artifact {path}")
        return path

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        target = self.path(name)
        with self._lock:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w") as f:
                json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
        return self.register(target)

    def write_table(self, name: str, columns: Sequence[str], rows: np.ndarray) -> Path:
        with self._lock:
            target = write_table(self.path(name), columns, rows)
        return self.register(target)

    def write_field(self, name: str, field: Field, binary: bool = True) -> List[Path]:
        """CSV dump of a field, plus the PINV1 binary when requested."""
        with self._lock:
            written = [field_to_csv(field, self.path(f"{name}.csv"))]
            if binary:
                written.append(write_binary(field, self.path(f"{name}.pinv")))
        return [self.register(p) for p in written]

    def write_boundary(self, name: str, field: Field, values: np.ndarray) -> Path:
        with self._lock:
            target = boundary_to_csv(field.grid, values, self.path(f"{name}.csv"))
        return self.register(target)

    def files(self, exclude: Optional[Sequence[Path]] = None) -> List[Dict[str, Any]]:
        """Relative path, size and sha256 of every registered file that exists."""
        skip = {Path(p) for p in exclude or ()}
        entries = []
        for path in sorted(self._files):
            if path in skip or not path.exists():
                continue
            entries.append({
                "path": path.relative_to(self.output_dir).as_posix(),
                "bytes": path.stat().st_size,
                "sha256": file_sha256(path),
            })
        return entries
