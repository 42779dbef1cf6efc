"""
Exception hierarchy for GeoFormer.

Every error raised by the package derives from GeoFormerError so the CLI can
map runtime failures to a single exit code. Domain-specific subclasses live
next to the code that raises them and extend the classes defined here.
"""

from typing import Iterable, Optional, Tuple


class GeoFormerError(Exception):
    """Base exception for all GeoFormer errors."""
    pass


class ConfigurationError(GeoFormerError):
    """Raised when a configuration value or combination is invalid."""
    pass


class ConfigFileNotFound(ConfigurationError):
    """Raised when an explicitly requested configuration file does not exist."""
    pass


class IngestError(GeoFormerError):
    """Base exception for CSV ingestion failures."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CsvParseError(IngestError):
    """Raised when a CSV row cannot be parsed."""
    pass


class RangeError(IngestError):
    """Raised when a field lies outside its permitted range."""
    pass


class DuplicateRecordError(IngestError):
    """Raised when two rows share the same (uid, day, slot) key."""
    pass


class StatsError(GeoFormerError):
    """Raised when a statistic is undefined for its input."""
    pass


class KeyMismatchError(GeoFormerError):
    """Raised when predictions and ground truth cover different keys."""

    def __init__(
        self,
        missing_in_predictions: Iterable[Tuple[int, int, int]],
        missing_in_truth: Iterable[Tuple[int, int, int]],
    ):
        self.missing_in_predictions = sorted(missing_in_predictions)
        self.missing_in_truth = sorted(missing_in_truth)
        preview_pred = self.missing_in_predictions[:5]
        preview_truth = self.missing_in_truth[:5]
        super().__init__(
            f"{len(self.missing_in_predictions)} keys missing from predictions "
            f"(first: {preview_pred}); {len(self.missing_in_truth)} keys missing "
            f"from truth (first: {preview_truth})"
        )
