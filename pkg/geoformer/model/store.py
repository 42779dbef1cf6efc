"""
Checkpoint stores.

The trainer writes periodic checkpoints through a store so tests can keep
everything in memory while runs persist to a directory. Both stores track
which step is the best one seen so far.
"""

import re
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Optional, Union

from geoformer.core.logging import get_logger
from geoformer.model.checkpoint import (
    Checkpoint,
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)

logger = get_logger(__name__)

BEST_MARKER = "best"
_STEP_FILE = re.compile(r"^ckpt_step(\d+)\.geof$")


class CheckpointStoreError(CheckpointError):
    """Raised when a requested checkpoint is not in the store."""
    pass


class CheckpointStoreInterface(ABC):
    """Abstract interface for checkpoint storage."""

    @abstractmethod
    def save(self, checkpoint: Checkpoint) -> str:
        """
        Persist a checkpoint under its step.

        Returns:
            Identifier that load() accepts
        """
        pass

    @abstractmethod
    def load(self, step: int) -> Checkpoint:
        """
        Load the checkpoint written at a step.

        Raises:
            CheckpointStoreError: If no checkpoint exists for the step
        """
        pass

    @abstractmethod
    def steps(self) -> List[int]:
        """Steps with a stored checkpoint, ascending."""
        pass

    @abstractmethod
    def mark_best(self, step: int) -> None:
        """Record a stored step as the best one."""
        pass

    @abstractmethod
    def best_step(self) -> Optional[int]:
        """Step marked best, or None."""
        pass

    def latest(self) -> Optional[Checkpoint]:
        steps = self.steps()
        return self.load(steps[-1]) if steps else None

    def best(self) -> Optional[Checkpoint]:
        step = self.best_step()
        return self.load(step) if step is not None else None


class InMemoryCheckpointStore(CheckpointStoreInterface):
    """Keeps deep copies of checkpoints in a dict."""

    def __init__(self):
        self._checkpoints: Dict[int, Checkpoint] = {}
        self._best: Optional[int] = None

    def save(self, checkpoint: Checkpoint) -> str:
        self._checkpoints[checkpoint.step] = checkpoint.model_copy(deep=True)
        return f"memory:{checkpoint.step}"

    def load(self, step: int) -> Checkpoint:
        if step not in self._checkpoints:
            raise CheckpointStoreError(f"no checkpoint for step {step}")
        return self._checkpoints[step].model_copy(deep=True)

    def steps(self) -> List[int]:
        return sorted(self._checkpoints)

    def mark_best(self, step: int) -> None:
        if step not in self._checkpoints:
            raise CheckpointStoreError(f"cannot mark missing step {step} as best")
        self._best = step

    def best_step(self) -> Optional[int]:
        return self._best


class DirectoryCheckpointStore(CheckpointStoreInterface):
    """
    Writes `ckpt_step{N}.geof` files; the `best` marker file holds the file
    name of the best checkpoint.
    """

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path_for(self, step: int) -> Path:
        return self.directory / f"ckpt_step{step}.geof"

    def save(self, checkpoint: Checkpoint) -> str:
        path = save_checkpoint(self.path_for(checkpoint.step), checkpoint)
        logger.info(f"Checkpoint written: {path}")
        return str(path)

    def load(self, step: int) -> Checkpoint:
        path = self.path_for(step)
        if not path.exists():
            raise CheckpointStoreError(f"no checkpoint for step {step} in {self.directory}")
        return load_checkpoint(path)

    def steps(self) -> List[int]:
        found = []
        for entry in self.directory.iterdir():
            match = _STEP_FILE.match(entry.name)
            if match:
                found.append(int(match.group(1)))
        return sorted(found)

    def mark_best(self, step: int) -> None:
        path = self.path_for(step)
        if not path.exists():
            raise CheckpointStoreError(f"cannot mark missing step {step} as best")
        (self.directory / BEST_MARKER).write_text(path.name + "\n", encoding="utf-8")

    def best_step(self) -> Optional[int]:
        marker = self.directory / BEST_MARKER
        if not marker.exists():
            return None
        match = _STEP_FILE.match(marker.read_text(encoding="utf-8").strip())
        return int(match.group(1)) if match else None

    def best_path(self) -> Optional[Path]:
        step = self.best_step()
        return self.path_for(step) if step is not None else None
