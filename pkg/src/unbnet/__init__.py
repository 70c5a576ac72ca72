"""Stochastic-geometry toolkit for ultra-narrowband IoT access."""
from .model import (ConfigError, DerivedParams, Hopping, IncumbentConfig, IncumbentKind,
                    NetworkConfig, Protocol, ProtocolSpec, derive_params, default_scenario, validate)

__all__ = [
    "ConfigError", "DerivedParams", "Hopping", "IncumbentConfig", "IncumbentKind",
    "NetworkConfig", "Protocol", "ProtocolSpec", "derive_params", "default_scenario", "validate",
]
__version__ = "0.1.0"
