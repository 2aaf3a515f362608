#!/usr/bin/env python3
"""
Configuration Manager for supcalc
Handles all configuration settings for the verification engine
"""

import os
import json
from fractions import Fraction
from typing import Dict, Any, List

from kernel import parse_scalar

DEFAULT_CONFIG_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.json")


class Config:
    """Configuration manager for supcalc"""

    def __init__(self, config_file=DEFAULT_CONFIG_FILE):
        """Initialize configuration"""
        self.config_file = config_file
        self.config = self.load_config()

    @staticmethod
    def default_config() -> Dict[str, Any]:
        return {
            "polyhedra": {
                "dd_cap": 100000
            },
            "epsilon": {
                "grid": ["1", "1/2", "1/8", "1/64"],
                "floor": "1/1048576",
                "refine_factor": "1/4"
            },
            "lemmas": {
                "lambda_grid": ["0", "1/4", "1/2", "3/4", "1"],
                "lemvo_M": ["0", "1", "5"]
            },
            "optimality": {
                "epsilons": ["1/2", "1/8"],
                "u_radii": ["1/2", "1/100"],
                "rho": "corr"
            },
            "harness": {
                "workers": 1,
                "corpus_dir": "corpus",
                "random_instances": 100,
                "report_file": "supcalc_report.json"
            },
            "logging": {
                "level": "INFO",
                "file": "supcalc.log"
            }
        }

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from file or create default"""
        if os.path.exists(self.config_file):
            try:
                with open(self.config_file, 'r') as f:
                    return json.load(f)
            except Exception as e:
                print(f"⚠️  Error loading config file: {e}")
                print("Using default configuration")

        default_config = self.default_config()
        self.save_config(default_config)
        return default_config

    def save_config(self, config: Dict[str, Any] = None):
        """Save configuration to file"""
        if config is None:
            config = self.config

        try:
            with open(self.config_file, 'w') as f:
                json.dump(config, f, indent=2)
        except Exception as e:
            print(f"❌ Error saving config file: {e}")

    def get(self, key_path: str, default=None):
        """Get configuration value using dot notation (e.g., 'epsilon.grid')"""
        keys = key_path.split('.')
        value = self.config

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any, persist: bool = True):
        """Set configuration value using dot notation; persist=False keeps it in memory only"""
        keys = key_path.split('.')
        config = self.config

        # Navigate to the parent of the target key
        for key in keys[:-1]:
            if key not in config:
                config[key] = {}
            config = config[key]

        config[keys[-1]] = value
        if persist:
            self.save_config()

    def get_scalar(self, key_path: str, default: str = None) -> Fraction:
        """Get a rational setting stored as "p/q" text"""
        value = self.get(key_path, default)
        if isinstance(value, int):
            return Fraction(value)
        return parse_scalar(str(value), key_path)

    def get_scalars(self, key_path: str, default: List[str] = None) -> List[Fraction]:
        """Get a list of rational settings"""
        values = self.get(key_path, default) or []
        return [Fraction(v) if isinstance(v, int) else parse_scalar(str(v), f"{key_path}[{i}]")
                for i, v in enumerate(values)]

    def get_epsilon_grid(self) -> List[Fraction]:
        return self.get_scalars('epsilon.grid', ["1", "1/2", "1/8", "1/64"])

    def get_dd_cap(self) -> int:
        return int(self.get('polyhedra.dd_cap', 100000))

    def get_workers(self) -> int:
        """Worker count: SUPCALC_WORKERS overrides the file value"""
        env_value = os.environ.get('SUPCALC_WORKERS')
        if env_value:
            try:
                return max(1, int(env_value))
            except ValueError:
                print(f"⚠️  Ignoring invalid SUPCALC_WORKERS={env_value!r}")
        return max(1, int(self.get('harness.workers', 1)))

# Global config instance
config = Config()
