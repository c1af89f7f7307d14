"""
Configuration management for the dimer EFP toolkit
"""

from typing import Any, Dict, List

from config.settings import APP_SETTINGS, MCMC_SETTINGS, get_setting, update_setting


class ConfigManager:
    """Read, override and validate runtime settings"""

    CAP_KEYS = ("max_states", "max_configs", "max_dim", "max_chain_length")

    @classmethod
    def get_config(cls, key: str, default=None) -> Any:
        """Get configuration value"""
        return get_setting(key, default)

    @classmethod
    def apply_overrides(cls, overrides: Dict[str, Any]) -> None:
        """Apply CLI overrides; None values leave the current setting untouched"""
        for key, value in overrides.items():
            if value is not None:
                update_setting(key, value)

    @classmethod
    def snapshot(cls) -> Dict[str, Any]:
        return {**APP_SETTINGS, **{f"mcmc_{k}": v for k, v in MCMC_SETTINGS.items()}}

    @classmethod
    def validate_config(cls) -> List[str]:
        """Validate current configuration"""
        issues = []

        for key in cls.CAP_KEYS:
            value = cls.get_config(key)
            if not isinstance(value, int) or value <= 0:
                issues.append(f"{key} must be a positive integer (got {value!r})")

        fraction = cls.get_config("memory_fraction")
        if not 0 < fraction <= 1:
            issues.append("memory_fraction must lie in (0, 1]")

        if cls.get_config("threads") < 0:
            issues.append("threads must be non-negative")

        if cls.get_config("max_chain_length", 0) < 4:
            issues.append("max_chain_length should be at least 4")

        return issues
