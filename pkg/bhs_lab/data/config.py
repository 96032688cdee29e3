"""
Configuration Manager - Lab settings and defaults
"""

import os
import json
import logging
from dataclasses import dataclass, field
from typing import List
from pathlib import Path

logger = logging.getLogger(__name__)


def _default_cache_dir() -> str:
    return os.environ.get("BHS_LAB_CACHE") or str(Path.home() / ".bhs_lab" / "cache")


@dataclass
class LabConfig:
    """Lab configuration"""

    # Directories
    cache_dir: str = field(default_factory=_default_cache_dir)
    output_dir: str = field(default_factory=lambda: str(Path.cwd() / "bhs_out"))

    # Verification settings
    max_concurrent_jobs: int = 4
    horizon_slack: int = 200
    placement_seeds: List[int] = field(default_factory=lambda: [1, 2, 3])
    random_seeds: List[int] = field(default_factory=lambda: list(range(1, 21)))
    exhaustive_max_states: int = 20000
    exhaustive_horizon: int = 40

    # Algorithm settings
    uxs_max_n: int = 6
    id_exponent: int = 2

    log_level: str = "INFO"

    # File paths
    _config_dir: str = field(default_factory=lambda: str(Path.home() / ".bhs_lab"))
    _config_file: str = ""

    def __post_init__(self):
        self._config_file = os.path.join(self._config_dir, "config.json")

        os.makedirs(self._config_dir, exist_ok=True)
        os.makedirs(self.cache_dir, exist_ok=True)

    def save(self):
        """Save configuration to file"""
        data = {
            "cache_dir": self.cache_dir,
            "output_dir": self.output_dir,
            "max_concurrent_jobs": self.max_concurrent_jobs,
            "horizon_slack": self.horizon_slack,
            "placement_seeds": self.placement_seeds,
            "random_seeds": self.random_seeds,
            "exhaustive_max_states": self.exhaustive_max_states,
            "exhaustive_horizon": self.exhaustive_horizon,
            "uxs_max_n": self.uxs_max_n,
            "id_exponent": self.id_exponent,
            "log_level": self.log_level,
        }

        with open(self._config_file, "w") as f:
            json.dump(data, f, indent=2)

    @classmethod
    def load(cls, config_dir: str = "") -> "LabConfig":
        """Load configuration from file; a corrupt file leaves the defaults"""
        config = cls(_config_dir=config_dir) if config_dir else cls()

        if os.path.exists(config._config_file):
            try:
                with open(config._config_file, "r") as f:
                    data = json.load(f)

                for key, value in data.items():
                    if hasattr(config, key) and not key.startswith("_"):
                        setattr(config, key, value)

            except (OSError, ValueError) as e:
                logger.error("Error loading config: %s", e)

        if os.environ.get("BHS_LAB_CACHE"):
            config.cache_dir = os.environ["BHS_LAB_CACHE"]
        os.makedirs(config.cache_dir, exist_ok=True)
        return config

    @property
    def database_path(self) -> str:
        """Path to the SQLite database, kept in the cache directory"""
        return os.path.join(self.cache_dir, "bhs_lab.db")
