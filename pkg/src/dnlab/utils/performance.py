"""
Convergence measurement and timing for numerical studies.
"""
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)


def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Least-squares slope of log(y) against log(x).

    Zero or negative entries are dropped; fewer than two usable points give nan.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def observed_orders(steps: Sequence[float], errors: Sequence[float]) -> List[float]:
    """Pairwise orders log(e_k / e_{k+1}) / log(s_k / s_{k+1}) between consecutive levels."""
    orders = []
    for (s0, e0), (s1, e1) in zip(zip(steps, errors), zip(steps[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and s0 != s1:
            orders.append(float(np.log(e0 / e1) / np.log(s0 / s1)))
        else:
            orders.append(float("nan"))
    return orders


@dataclass
class ConvergenceStudy:
    """A named refinement study: step sizes against error norms."""
    name: str
    steps: List[float] = field(default_factory=list)
    errors: List[float] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def add(self, step: float, error: float) -> None:
        self.steps.append(float(step))
        self.errors.append(float(error))

    @property
    def slope(self) -> float:
        return fit_slope(self.steps, self.errors)

    @property
    def orders(self) -> List[float]:
        return observed_orders(self.steps, self.errors)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["slope"] = self.slope
        data["orders"] = self.orders
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConvergenceStudy":
        data = {k: v for k, v in data.items() if k not in ("slope", "orders")}
        return cls(**data)

    def save(self, directory: Union[str, Path] = "studies") -> str:
        """
        Save the study as <name>.json.

        Args:
            directory: Directory to store the study file

        Returns:
            Path to the saved file, or "" when writing failed
        """
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        target = path / f"{self.name}.json"
        try:
            with open(target, "w") as f:
                json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            logger.info(f"Convergence study saved to {target}")
            return str(target)
        except OSError as e:
            logger.error(f"Failed to save convergence study: {e}")
            return ""

    @classmethod
    def load(cls, path: str) -> "ConvergenceStudy":
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


def compare_studies(study_files: List[str]) -> Dict[str, Any]:
    """
    Compare saved convergence studies.

    Args:
        study_files: Paths to JSON files written by ConvergenceStudy.save

    Returns:
        Summary with per-study slopes and the extremes; unreadable files are skipped
    """
    studies = []
    for file_path in study_files:
        try:
            studies.append(ConvergenceStudy.load(file_path))
        except (OSError, ValueError, TypeError) as e:
            logger.error(f"Failed to load study {file_path}: {e}")
    if not studies:
        return {}
    slopes = [s.slope for s in studies if np.isfinite(s.slope)]
    return {
        "total_studies": len(studies),
        "min_slope": min(slopes, default=float("nan")),
        "max_slope": max(slopes, default=float("nan")),
        "studies": {s.name: s.slope for s in studies},
    }


class PerformanceTimer:
    """
    Simple performance timer for measuring execution times.
    """

    def __init__(self):
        self.start_time: Optional[float] = None
        self.end_time: Optional[float] = None

    def __enter__(self) -> "PerformanceTimer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def start(self):
        """Start the timer."""
        self.start_time = time.perf_counter()
        self.end_time = None

    def stop(self) -> float:
        """
        Stop the timer and return elapsed time in seconds.
        """
        self.end_time = time.perf_counter()
        return self.elapsed_time()

    def elapsed_time(self) -> float:
        if self.start_time is None:
            return 0.0
        end_time = self.end_time or time.perf_counter()
        return end_time - self.start_time
