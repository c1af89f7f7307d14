"""Metrics collection for computations run by the toolkit."""

import json
import time
import logging
from collections import defaultdict
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, List, Optional

logger = logging.getLogger(__name__)


class MetricsCollector:
    """Collects per-operation timings and failure counts."""

    def __init__(self):
        """Initialize the metrics collector."""
        self.operation_times: Dict[str, List[float]] = defaultdict(list)
        self.operation_counts: Dict[str, int] = defaultdict(int)
        self.error_counts: Dict[str, int] = defaultdict(int)
        self.start_time = time.perf_counter()

    def record_operation(self, name: str, seconds: float) -> None:
        """Record one finished operation.

        Args:
            name: Operation name, e.g. "efp_exact"
            seconds: Wall time spent
        """
        self.operation_times[name].append(seconds)
        self.operation_counts[name] += 1
        logger.debug(f"Recorded {name}: {seconds:.3f}s")

    def record_failure(self, error_type: str) -> None:
        self.error_counts[error_type] += 1
        logger.debug(f"Recorded failure: {error_type}")

    @contextmanager
    def timed(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            self.record_operation(name, time.perf_counter() - started)

    @property
    def wall_time(self) -> float:
        return time.perf_counter() - self.start_time

    def get_summary(self) -> Dict[str, Any]:
        """Get a summary of collected metrics.

        Returns:
            Dictionary containing metrics summary
        """
        per_operation = {
            name: {
                "count": self.operation_counts[name],
                "total_seconds": sum(times),
                "mean_seconds": sum(times) / len(times),
            }
            for name, times in self.operation_times.items()
            if times
        }
        return {
            "operations": per_operation,
            "errors": dict(self.error_counts),
            "wall_time_seconds": self.wall_time,
        }

    def export_metrics(self, filepath: Optional[str] = None) -> Dict[str, Any]:
        """Export metrics to a JSON file or return them as a dictionary.

        Args:
            filepath: Optional path to save metrics to JSON file

        Returns:
            Dictionary containing all metrics
        """
        metrics = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "summary": self.get_summary(),
        }

        if filepath:
            try:
                with open(filepath, "w", encoding="utf-8") as f:
                    json.dump(metrics, f, indent=2)
                logger.info(f"Metrics exported to {filepath}")
            except OSError as e:
                logger.error(f"Error exporting metrics: {e}")

        return metrics
