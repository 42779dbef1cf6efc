"""
Binary checkpoint format.

Layout (all integers little-endian):

    b"GEOF" | u32 format version | u64 total file length
    | u64 header length | header JSON (UTF-8)
    | per tensor: u32 name length, UTF-8 name, u32 ndim, u64 dims..., raw floats
    | u32 CRC32 of every preceding byte

The header carries the model config, step counter, RNG states and trainer
state; tensors are stored in the model's dtype (32-bit floats by default).
Parameters are prefixed "param/", optimizer moments "adam_m/" and "adam_v/".
"""

import json
import struct
import zlib
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from geoformer.autograd.tensor import Tensor
from geoformer.core.errors import GeoFormerError
from geoformer.core.logging import get_logger
from geoformer.core.models.config import ModelConfig, TrainConfig
from geoformer.model.optim import AdamWState
from geoformer.model.transformer import GeoFormer

logger = get_logger(__name__)

MAGIC = b"GEOF"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


class CheckpointError(GeoFormerError):
    """Base exception for checkpoint failures."""
    pass


class CheckpointVersionError(CheckpointError):
    """Raised for a format version this code cannot read."""
    pass


class CheckpointTruncatedError(CheckpointError):
    """Raised when the file is shorter than its declared length."""
    pass


class CheckpointChecksumError(CheckpointError):
    """Raised when the stored CRC32 does not match the content."""
    pass


class Checkpoint(BaseModel):
    """Everything needed to resume training or run inference bit-exactly."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    version: int = FORMAT_VERSION
    config: ModelConfig
    params: Dict[str, np.ndarray]
    adam_m: Dict[str, np.ndarray] = Field(default_factory=dict)
    adam_v: Dict[str, np.ndarray] = Field(default_factory=dict)
    step: int = 0
    rng_state: Dict[str, Any] = Field(default_factory=dict)
    trainer_state: Dict[str, Any] = Field(default_factory=dict)
    train_config: Optional[TrainConfig] = None

    @classmethod
    def capture(
        cls,
        model: GeoFormer,
        optimizer: Optional[AdamWState] = None,
        trainer_state: Optional[Dict[str, Any]] = None,
        train_config: Optional[TrainConfig] = None,
    ) -> "Checkpoint":
        """Snapshot a model (and optionally its optimizer) by copying arrays."""
        return cls(
            config=model.cfg,
            params={name: t.data.copy() for name, t in model.params.items()},
            adam_m={k: v.copy() for k, v in optimizer.m.items()} if optimizer else {},
            adam_v={k: v.copy() for k, v in optimizer.v.items()} if optimizer else {},
            step=optimizer.step if optimizer else 0,
            rng_state=model.rng.bit_generator.state,
            trainer_state=dict(trainer_state or {}),
            train_config=train_config,
        )

    def to_model(self) -> GeoFormer:
        """Rebuild the model, including its dropout RNG state."""
        params = {
            name: Tensor(array.copy(), requires_grad=True, name=name)
            for name, array in self.params.items()
        }
        rng = np.random.default_rng()
        if self.rng_state:
            rng.bit_generator.state = self.rng_state
        else:
            rng = np.random.default_rng([self.config.seed, 1])
        return GeoFormer(self.config, params, rng)

    def optimizer_state(self) -> Optional[AdamWState]:
        if not self.adam_m:
            return None
        return AdamWState(
            {k: v.copy() for k, v in self.adam_m.items()},
            {k: v.copy() for k, v in self.adam_v.items()},
            self.step,
        )


def _encode_tensor(name: str, array: np.ndarray, dtype: np.dtype) -> bytes:
    encoded_name = name.encode("utf-8")
    parts = [struct.pack("<I", len(encoded_name)), encoded_name, struct.pack("<I", array.ndim)]
    parts += [struct.pack("<Q", dim) for dim in array.shape]
    parts.append(np.ascontiguousarray(array, dtype=dtype.newbyteorder("<")).tobytes())
    return b"".join(parts)


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    """
    Serialize a checkpoint.

    Args:
        path: Destination file (parents are created)
        checkpoint: State to write

    Returns:
        The written path
    """
    path = Path(path)
    dtype = np.dtype(checkpoint.config.dtype)
    tensors = [(f"param/{k}", v) for k, v in checkpoint.params.items()]
    tensors += [(f"adam_m/{k}", v) for k, v in checkpoint.adam_m.items()]
    tensors += [(f"adam_v/{k}", v) for k, v in checkpoint.adam_v.items()]

    header = {
        "config": checkpoint.config.model_dump(mode="json"),
        "step": checkpoint.step,
        "rng_state": checkpoint.rng_state,
        "trainer_state": checkpoint.trainer_state,
        "train_config": (
            checkpoint.train_config.model_dump(mode="json") if checkpoint.train_config else None
        ),
        "dtype": dtype.name,
        "n_tensors": len(tensors),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = struct.pack("<Q", len(header_bytes)) + header_bytes
    body += b"".join(_encode_tensor(name, array, dtype) for name, array in tensors)

    total_length = _PREFIX.size + len(body) + 4
    payload = _PREFIX.pack(MAGIC, checkpoint.version, total_length) + body
    payload += struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)
    logger.debug(f"Saved checkpoint at step {checkpoint.step} to {path}")
    return path


class _Reader:
    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.offset = offset

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise CheckpointTruncatedError("unexpected end of checkpoint data")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointTruncatedError: File shorter than declared
        CheckpointVersionError: Unknown format version
        CheckpointChecksumError: CRC32 mismatch
        CheckpointError: Not a checkpoint file
    """
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CheckpointTruncatedError(f"{path}: file too short to be a checkpoint")
    magic, version, total_length = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version} not supported (expected {FORMAT_VERSION})"
        )
    if len(data) < total_length:
        raise CheckpointTruncatedError(
            f"{path}: {len(data)} bytes, header declares {total_length}"
        )
    if len(data) > total_length:
        raise CheckpointError(f"{path}: {len(data) - total_length} trailing bytes")

    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointChecksumError(f"{path}: checksum mismatch")

    reader = _Reader(data[:-4], _PREFIX.size)
    (header_len,) = reader.unpack("<Q")
    header = json.loads(reader.take(header_len).decode("utf-8"))
    dtype = np.dtype(header["dtype"]).newbyteorder("<")

    groups: Dict[str, Dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}}
    for _ in range(header["n_tensors"]):
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<I")
        shape = tuple(reader.unpack("<Q")[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        raw = reader.take(count * dtype.itemsize)
        array = np.frombuffer(raw, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
        group, _, key = name.partition("/")
        groups[group][key] = array

    train_config = header.get("train_config")
    return Checkpoint(
        version=version,
        config=ModelConfig.model_validate(header["config"]),
        params=groups["param"],
        adam_m=groups["adam_m"],
        adam_v=groups["adam_v"],
        step=header["step"],
        rng_state=header["rng_state"],
        trainer_state=header["trainer_state"],
        train_config=TrainConfig.model_validate(train_config) if train_config else None,
    )
