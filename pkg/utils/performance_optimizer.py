"""
Performance tuning for transfer sweeps and parallel workers
"""

import os

import psutil

from config.settings import get_setting
from utils.system_checker import SystemChecker


class PerformanceOptimizer:
    """Choose block sizes and worker counts from the machine and the settings"""

    BYTES_PER_FLOAT = 8
    # Working copies held per block: current vector, next vector, restricted slice
    VECTOR_COPIES = 3
    MIN_BLOCK = 1
    MAX_BLOCK = 1024

    @classmethod
    def worker_count(cls, requested: int = 0) -> int:
        """Resolve the worker budget: explicit request, then setting/env, then CPU count"""
        if requested and requested > 0:
            return requested
        configured = get_setting("threads", 0) or 0
        if configured > 0:
            return configured
        return psutil.cpu_count(logical=True) or os.cpu_count() or 1

    @classmethod
    def block_size(cls, n_states: int, n_vectors: int, workers: int = 1) -> int:
        """How many start vectors one worker propagates at once.

        Args:
            n_states: Dimension of the row-state space
            n_vectors: Total number of start vectors to propagate
            workers: Number of workers sharing the memory budget

        Returns:
            Block width between MIN_BLOCK and MAX_BLOCK
        """
        if n_vectors <= 0:
            return cls.MIN_BLOCK
        budget = SystemChecker.memory_budget_bytes() // max(workers, 1)
        per_vector = max(n_states, 1) * cls.BYTES_PER_FLOAT * cls.VECTOR_COPIES
        width = max(cls.MIN_BLOCK, budget // per_vector)
        return int(min(width, cls.MAX_BLOCK, n_vectors))
