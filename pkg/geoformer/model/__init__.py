"""
GeoFormer model, optimizer and checkpointing.
"""

from geoformer.model.checkpoint import (
    Checkpoint,
    CheckpointChecksumError,
    CheckpointError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    load_checkpoint,
    save_checkpoint,
)
from geoformer.model.optim import (
    AdamWState,
    NonFiniteError,
    adamw_step,
    clip_gradients,
    global_norm,
    lr_at,
)
from geoformer.model.store import (
    CheckpointStoreError,
    CheckpointStoreInterface,
    DirectoryCheckpointStore,
    InMemoryCheckpointStore,
)
from geoformer.model.transformer import (
    ContextOverflowError,
    GeoFormer,
    InferenceSession,
    InvalidTokenError,
    init_model,
    is_decayed,
    next_token_loss,
    param_specs,
)

__all__ = [
    "AdamWState",
    "Checkpoint",
    "CheckpointChecksumError",
    "CheckpointError",
    "CheckpointStoreError",
    "CheckpointStoreInterface",
    "CheckpointTruncatedError",
    "CheckpointVersionError",
    "ContextOverflowError",
    "DirectoryCheckpointStore",
    "GeoFormer",
    "InMemoryCheckpointStore",
    "InferenceSession",
    "InvalidTokenError",
    "NonFiniteError",
    "adamw_step",
    "clip_gradients",
    "global_norm",
    "init_model",
    "is_decayed",
    "load_checkpoint",
    "lr_at",
    "next_token_loss",
    "param_specs",
    "save_checkpoint",
]
