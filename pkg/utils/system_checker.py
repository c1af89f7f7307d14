"""System resource checking utilities."""

import sys
import logging
from importlib import metadata
from typing import Any, Dict

import psutil

from config.settings import get_setting
from utils.error_handler import CapacityError

logger = logging.getLogger(__name__)


class SystemChecker:
    """Checks packages and memory before large allocations."""

    # Required Python packages and their minimum versions
    REQUIRED_PACKAGES = {
        "numpy": "1.24.0",
        "scipy": "1.10.0",
        "sympy": "1.12",
        "networkx": "3.1",
        "click": "8.0.0",
        "psutil": "5.9.0",
    }

    @classmethod
    def get_system_info(cls) -> Dict[str, Any]:
        """Get interpreter, package and resource information for run manifests.

        Returns:
            Dictionary with python version, installed package versions and resources
        """
        version = sys.version_info
        packages = {}
        for package in cls.REQUIRED_PACKAGES:
            try:
                packages[package] = metadata.version(package)
            except metadata.PackageNotFoundError:
                packages[package] = None

        memory = psutil.virtual_memory()
        return {
            "python_version": f"{version.major}.{version.minor}.{version.micro}",
            "packages": packages,
            "cpu_cores": psutil.cpu_count(logical=True),
            "ram_gb": round(memory.total / (1024 ** 3), 1),
            "available_gb": round(memory.available / (1024 ** 3), 1),
        }

    @staticmethod
    def available_memory_bytes() -> int:
        return int(psutil.virtual_memory().available)

    @classmethod
    def memory_budget_bytes(cls) -> int:
        return int(cls.available_memory_bytes() * get_setting("memory_fraction", 0.5))

    @classmethod
    def ensure_memory(cls, required_bytes: int, what: str, module: str = "system") -> None:
        """Raise CapacityError when an allocation would exceed the memory budget."""
        budget = cls.memory_budget_bytes()
        logger.debug(f"{what}: needs {required_bytes / 2**20:.1f} MiB, budget {budget / 2**20:.1f} MiB")
        if required_bytes > budget:
            raise CapacityError(
                module,
                f"{what} needs {required_bytes / 2**30:.2f} GiB but the memory budget is "
                f"{budget / 2**30:.2f} GiB",
            )
