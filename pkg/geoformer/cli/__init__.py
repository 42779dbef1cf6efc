"""
Command-line entry point.
"""

from geoformer.cli.main import main

__all__ = ["main"]
