"""
GeoFormer

A desk-scale decoder-only transformer for gridded human mobility prediction:
trajectory linearization, training, constrained generation and scoring.
"""

__version__ = "0.1.0"
__author__ = "GeoFormer Team"

# Package-level imports for convenience
from geoformer.core.config import get_config, setup_config
from geoformer.core.logging import setup_logging

__all__ = [
    "__version__",
    "__author__",
    "get_config",
    "setup_config",
    "setup_logging",
]
