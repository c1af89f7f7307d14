import os
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "")
    try:
        return int(raw) if raw else default
    except ValueError:
        return default


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name, "")
    try:
        return float(raw) if raw else default
    except ValueError:
        return default


# Desk-scale capacity caps, all overridable from the CLI
APP_SETTINGS: Dict[str, Any] = {
    "max_states": _env_int("DIMER_EFP_MAX_STATES", 2 ** 20),  # transfer-matrix row states
    "max_configs": _env_int("DIMER_EFP_MAX_CONFIGS", 5_000_000),  # enumerated configurations
    "max_dim": _env_int("DIMER_EFP_MAX_DIM", 4096),  # dense Kasteleyn matrix size
    "max_chain_length": _env_int("DIMER_EFP_MAX_CHAIN", 14),  # Suzuki chain sites
    "dense_eigen_dim": 4096,  # above this the sparse eigensolver is used
    "refstate_samples": 512,  # reference states drawn when the family is too large to list
    "memory_fraction": _env_float("DIMER_EFP_MEMORY_FRACTION", 0.5),
    "threads": _env_int("DIMER_EFP_THREADS", 0),  # 0 means: use the CPU count
    "log_level": os.getenv("DIMER_EFP_LOG_LEVEL", "") or "WARNING",
}

MCMC_SETTINGS: Dict[str, Any] = {
    "sweeps": 10_000,
    "burn_in": 1_000,
    "batches": 20,
    "progress": False,
}


def get_setting(key: str, default: Any = None) -> Any:
    if key in APP_SETTINGS:
        return APP_SETTINGS[key]
    if key in MCMC_SETTINGS:
        return MCMC_SETTINGS[key]
    return default


def update_setting(key: str, value: Any) -> None:
    if key in APP_SETTINGS:
        APP_SETTINGS[key] = value
    elif key in MCMC_SETTINGS:
        MCMC_SETTINGS[key] = value
    else:
        raise KeyError(f"Setting '{key}' not found")
