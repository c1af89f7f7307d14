"""
Utility modules for the dimer EFP toolkit
"""

from .system_checker import SystemChecker
from .performance_optimizer import PerformanceOptimizer
from .error_handler import ErrorHandler
from .config_manager import ConfigManager
from .metrics_collector import MetricsCollector
from .output_writer import OutputWriter, RunManifest

__all__ = [
    'SystemChecker',
    'PerformanceOptimizer',
    'ErrorHandler',
    'ConfigManager',
    'MetricsCollector',
    'OutputWriter',
    'RunManifest',
]
