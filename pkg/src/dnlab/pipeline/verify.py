"""
Golden-file comparison of two run directories.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..discretization.serialization import read_binary, read_table

logger = logging.getLogger(__name__)

# Keys whose values legitimately differ between identical runs.
VOLATILE_KEYS = frozenset({"started_at", "finished_at", "timestamp", "elapsed", "runtime", "sha256", "bytes",
                           "output_dir", "threads", "timings"})
IGNORED_FILES = frozenset({"error.json"})


@dataclass
class FileComparison:
    path: str
    status: str  # "pass", "fail", "missing", "extra"
    detail: str = ""
    location: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"path": self.path, "status": self.status, "detail": self.detail, "location": self.location}


@dataclass
class VerifyReport:
    golden_dir: str
    output_dir: str
    files: List[FileComparison] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(f.status in ("pass", "extra") for f in self.files)

    @property
    def warnings(self) -> List[FileComparison]:
        return [f for f in self.files if f.status == "extra"]

    def to_dict(self) -> Dict[str, Any]:
        counts: Dict[str, int] = {}
        for f in self.files:
            counts[f.status] = counts.get(f.status, 0) + 1
        return {"golden_dir": self.golden_dir, "output_dir": self.output_dir, "passed": self.passed,
                "counts": counts, "files": [f.to_dict() for f in self.files]}


def _relative_files(root: Path) -> Dict[str, Path]:
    return {p.relative_to(root).as_posix(): p for p in sorted(root.rglob("*"))
            if p.is_file() and p.name not in IGNORED_FILES}


def _compare_arrays(a: np.ndarray, b: np.ndarray, rtol: float, atol: float) -> Tuple[bool, str, Optional[Dict]]:
    if a.shape != b.shape:
        return False, f"shape {b.shape} != golden {a.shape}", None
    close = np.isclose(b, a, rtol=rtol, atol=atol, equal_nan=True)
    if close.all():
        return True, "", None
    diff = np.where(close, 0.0, np.abs(np.nan_to_num(b - a, nan=np.inf)))
    index = np.unravel_index(int(np.argmax(diff)), diff.shape)
    location = {"index": [int(i) for i in index], "golden": float(a[index]), "output": float(b[index])}
    return False, f"{int((~close).sum())} values outside tolerance", location


def _compare_json(a: Any, b: Any, rtol: float, atol: float, where: str = "") -> Optional[Tuple[str, str]]:
    """First difference as (location, detail), or None."""
    if isinstance(a, dict) and isinstance(b, dict):
        keys = (set(a) | set(b)) - VOLATILE_KEYS
        for key in sorted(keys):
            if key not in a or key not in b:
                return f"{where}/{key}", "key missing on one side"
            found = _compare_json(a[key], b[key], rtol, atol, f"{where}/{key}")
            if found:
                return found
        return None
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return where, f"length {len(b)} != golden {len(a)}"
        for i, (x, y) in enumerate(zip(a, b)):
            found = _compare_json(x, y, rtol, atol, f"{where}[{i}]")
            if found:
                return found
        return None
    numeric = (int, float)
    if isinstance(a, numeric) and isinstance(b, numeric) and not isinstance(a, bool) and not isinstance(b, bool):
        if np.isclose(b, a, rtol=rtol, atol=atol, equal_nan=True):
            return None
        return where, f"{b!r} != golden {a!r}"
    if a != b:
        return where, f"{b!r} != golden {a!r}"
    return None


def compare_file(golden: Path, output: Path, rtol: float = 1e-9, atol: float = 1e-12) -> FileComparison:
    """Compare one file pair by its extension."""
    name = output.name
    try:
        suffix = golden.suffix
        if suffix == ".csv":
            cols_a, rows_a = read_table(golden)
            cols_b, rows_b = read_table(output)
            if cols_a != cols_b:
                return FileComparison(name, "fail", f"columns {cols_b} != golden {cols_a}")
            ok, detail, location = _compare_arrays(rows_a, rows_b, rtol, atol)
            if location is not None:
                location = {"row": location["index"][0] + 2, "column": cols_a[location["index"][1]],
                            "golden": location["golden"], "output": location["output"]}
            return FileComparison(name, "pass" if ok else "fail", detail, location)
        if suffix == ".pinv":
            ok, detail, location = _compare_arrays(read_binary(golden), read_binary(output), rtol, atol)
            return FileComparison(name, "pass" if ok else "fail", detail, location)
        if suffix == ".json":
            with open(golden) as f:
                a = json.load(f)
            with open(output) as f:
                b = json.load(f)
            found = _compare_json(a, b, rtol, atol)
            if found is None:
                return FileComparison(name, "pass")
            return FileComparison(name, "fail", found[1], {"key": found[0]})
        same = golden.read_bytes() == output.read_bytes()
        return FileComparison(name, "pass" if same else "fail", "" if same else "bytes differ")
    except (OSError, ValueError) as e:
        return FileComparison(name, "fail", f"unreadable: {e}")


def verify(golden_dir: Union[str, Path], output_dir: Union[str, Path], rtol: float = 1e-9,
           atol: float = 1e-12) -> VerifyReport:
    """
    Compare every golden file with its counterpart in output_dir.

    Missing files fail the comparison; extra files in the output only warn.

    Raises:
        FileNotFoundError: either directory does not exist
    """
    golden_dir, output_dir = Path(golden_dir), Path(output_dir)
    for d in (golden_dir, output_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"directory not found: {d}")
    golden = _relative_files(golden_dir)
    output = _relative_files(output_dir)
    report = VerifyReport(str(golden_dir), str(output_dir))
    for rel, path in golden.items():
        if rel not in output:
            report.files.append(FileComparison(rel, "missing", "not produced"))
            continue
        result = compare_file(path, output[rel], rtol, atol)
        result.path = rel
        report.files.append(result)
    for rel in output:
        if rel not in golden:
            logger.warning(f"Extra file in output: {rel}")
            report.files.append(FileComparison(rel, "extra", "not in golden directory"))
    for f in report.files:
        if f.status in ("fail", "missing"):
            logger.error(f"{f.path}: {f.status} {f.detail} {f.location or ''}")
    logger.info(f"Verify {output_dir} against {golden_dir}: {'pass' if report.passed else 'fail'}")
    return report
