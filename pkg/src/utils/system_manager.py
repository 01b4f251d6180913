"""
System Manager - Thread and memory budget detection
Resolves worker counts and checks that dense operators fit in memory
"""

import os
import platform
from typing import Dict, Optional, Tuple
import logging

import psutil

logger = logging.getLogger(__name__)

THREADS_ENV = 'EXTLAB_THREADS'

# complex128 entries
BYTES_PER_ENTRY = 16

# Working copies held at once by commutator/eigen computations
DENSE_WORKSPACE_FACTOR = 6


class RuntimeManager:
    """Manages hardware detection and execution settings"""

    def __init__(self):
        """Initialize runtime manager and detect hardware"""
        self.device_info = self._detect_device()

    def _detect_device(self) -> Dict:
        """
        Detect CPU count and memory

        Returns:
            dict: Hardware information
        """
        info = {
            'platform': platform.system(),
            'cpu_count': os.cpu_count() or 1,
            'ram_total_gb': 0.0,
            'ram_available_gb': 0.0,
        }

        try:
            mem = psutil.virtual_memory()
            info['ram_total_gb'] = mem.total / (1024**3)
            info['ram_available_gb'] = mem.available / (1024**3)
        except Exception as e:
            logger.warning(f"Memory detection failed, assuming 8 GB: {e}")
            info['ram_total_gb'] = info['ram_available_gb'] = 8.0

        return info

    def resolve_threads(self, requested: Optional[int] = None) -> int:
        """
        Resolve the worker-thread count

        Args:
            requested: value of --threads (None when absent)

        Returns:
            int: --threads, else EXTLAB_THREADS, else the CPU count

        Raises:
            ValueError: If the requested or environment value is not a positive integer
        """
        if requested is not None:
            if requested < 1:
                raise ValueError(f"--threads must be >= 1, got {requested}")
            return requested

        env_value = os.environ.get(THREADS_ENV)
        if env_value:
            try:
                threads = int(env_value)
            except ValueError:
                raise ValueError(f"{THREADS_ENV} must be an integer, got '{env_value}'")
            if threads < 1:
                raise ValueError(f"{THREADS_ENV} must be >= 1, got {threads}")
            return threads

        return self.device_info['cpu_count']

    def estimate_dense_gb(self, size: int) -> float:
        """
        Estimate memory for dense work on a size x size complex matrix

        Args:
            size: matrix dimension

        Returns:
            float: Estimated GB
        """
        return DENSE_WORKSPACE_FACTOR * size * size * BYTES_PER_ENTRY / (1024**3)

    def check_memory_requirement(self, size: int) -> Tuple[bool, str]:
        """
        Check if a dense operator of the given size fits in available memory

        Args:
            size: matrix dimension

        Returns:
            tuple: (is_sufficient, message)
        """
        required = self.estimate_dense_gb(size)
        available = self.device_info['ram_available_gb']

        if required <= available:
            return True, f"Dense {size}x{size} work needs {required:.2f} GB ({available:.1f} GB available)"
        return False, (
            f"Dense {size}x{size} work needs {required:.2f} GB but only {available:.1f} GB is available. "
            f"Reduce the grid size or truncation."
        )

    def get_info_string(self) -> str:
        """
        Get formatted system information string

        Returns:
            str: Formatted system information
        """
        info = self.device_info
        return "\n".join([
            f"Platform: {info['platform']}",
            f"CPU Cores: {info['cpu_count']}",
            f"RAM: {info['ram_available_gb']:.1f} GB available / {info['ram_total_gb']:.1f} GB total",
            f"Threads: {self.resolve_threads()}",
        ])


# Global instance
_runtime_manager = None


def get_runtime_manager() -> RuntimeManager:
    """
    Get global RuntimeManager instance (singleton)

    Returns:
        RuntimeManager: Global runtime manager instance
    """
    global _runtime_manager
    if _runtime_manager is None:
        _runtime_manager = RuntimeManager()
    return _runtime_manager
