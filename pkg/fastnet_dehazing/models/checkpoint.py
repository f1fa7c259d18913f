"""FDHZ checkpoint format.

Layout (all integers little-endian):

    b"FDHZ" | u32 version | u16 len + architecture tag (utf-8)
    | u32 len + config block (utf-8 JSON: {"model": FastNetConfig, "meta": {...}})
    | u32 tensor count
    | per tensor: u16 len + name | u8 ndim | ndim x u32 dims | float32 payload

Every parameter and running statistic of the model's state dict is stored.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict

from fastnet_dehazing.errors import ArtifactWriteError, CheckpointFormatError, CheckpointMismatchError
from fastnet_dehazing.models.builder import DehazeModel, build_model
from fastnet_dehazing.models.config import ARCHITECTURES, FastNetConfig

MAGIC = b"FDHZ"
FORMAT_VERSION = 1

PathLike = Union[str, Path]


class Checkpoint(BaseModel):
    """Decoded contents of an FDHZ file."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    architecture: str
    config: FastNetConfig
    metadata: Dict[str, Any]
    tensors: Dict[str, np.ndarray]


def encode_checkpoint(model: DehazeModel, metadata: Optional[Dict[str, Any]] = None) -> bytes:
    tag = model.architecture.encode("utf-8")
    block = json.dumps(
        {"model": model.cfg.model_dump(), "meta": metadata or {}}, sort_keys=True
    ).encode("utf-8")
    state = model.state_dict()

    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    parts += [struct.pack("<H", len(tag)), tag]
    parts += [struct.pack("<I", len(block)), block]
    parts.append(struct.pack("<I", len(state)))
    for name, tensor in state.items():
        encoded = name.encode("utf-8")
        dims = tuple(tensor.shape)
        parts += [struct.pack("<H", len(encoded)), encoded, struct.pack("<B", len(dims))]
        parts += [struct.pack(f"<{len(dims)}I", *dims)]
        parts.append(tensor.detach().cpu().numpy().astype("<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(model: DehazeModel, path: PathLike, metadata: Optional[Dict[str, Any]] = None) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode_checkpoint(model, metadata))
    except OSError as e:
        raise ArtifactWriteError(f"Cannot write checkpoint to {path}: {e}") from e


class _Reader:
    def __init__(self, payload: bytes, source: str):
        self.payload = payload
        self.offset = 0
        self.source = source

    def take(self, n: int, what: str) -> bytes:
        end = self.offset + n
        if end > len(self.payload):
            raise CheckpointFormatError(f"{self.source}: truncated while reading {what}")
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(payload: bytes, source: str = "<bytes>") -> Checkpoint:
    reader = _Reader(payload, source)
    if reader.take(4, "magic") != MAGIC:
        raise CheckpointFormatError(f"{source}: not an FDHZ checkpoint (bad magic)")
    (version,) = reader.unpack("<I", "format version")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"{source}: unsupported FDHZ version {version}")

    (tag_len,) = reader.unpack("<H", "architecture tag")
    architecture = reader.take(tag_len, "architecture tag").decode("utf-8")
    if architecture not in ARCHITECTURES:
        raise CheckpointFormatError(f"{source}: unknown architecture tag '{architecture}'")
    (block_len,) = reader.unpack("<I", "config block")
    try:
        block = json.loads(reader.take(block_len, "config block").decode("utf-8"))
        config = FastNetConfig.model_validate(block["model"])
    except (ValueError, KeyError) as e:
        raise CheckpointFormatError(f"{source}: invalid config block ({e})") from e

    (count,) = reader.unpack("<I", "tensor count")
    tensors = {}
    previous = "<header>"
    for index in range(count):
        where = f"tensor #{index} (after '{previous}')"
        (name_len,) = reader.unpack("<H", f"name of {where}")
        name = reader.take(name_len, f"name of {where}").decode("utf-8")
        (ndim,) = reader.unpack("<B", f"rank of tensor '{name}'")
        dims = reader.unpack(f"<{ndim}I", f"dims of tensor '{name}'") if ndim else ()
        numel = int(np.prod(dims)) if dims else 1
        raw = reader.take(4 * numel, f"payload of tensor '{name}'")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
        previous = name

    return Checkpoint(architecture=architecture, config=config, metadata=block.get("meta", {}), tensors=tensors)


def read_checkpoint(path: PathLike) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointFormatError(f"No checkpoint found at {path}")
    return decode_checkpoint(path.read_bytes(), str(path))


def apply_checkpoint(model: DehazeModel, checkpoint: Checkpoint) -> DehazeModel:
    """Copy checkpoint tensors into ``model`` after validating kind, config and shapes."""
    if checkpoint.architecture != model.architecture:
        raise CheckpointMismatchError(
            f"checkpoint holds a {checkpoint.architecture} model, target is {model.architecture}"
        )
    if checkpoint.config != model.cfg:
        raise CheckpointMismatchError(
            f"checkpoint config {checkpoint.config.model_dump()} does not match model config {model.cfg.model_dump()}"
        )

    state = model.state_dict()
    missing = sorted(set(state) - set(checkpoint.tensors))
    unexpected = sorted(set(checkpoint.tensors) - set(state))
    if missing or unexpected:
        raise CheckpointMismatchError(f"tensor names differ: missing {missing}, unexpected {unexpected}")

    with torch.no_grad():
        for name, target in state.items():
            source = checkpoint.tensors[name]
            if tuple(source.shape) != tuple(target.shape):
                raise CheckpointMismatchError(
                    f"tensor '{name}' has shape {tuple(source.shape)} in checkpoint, {tuple(target.shape)} in model"
                )
            target.copy_(torch.from_numpy(source).to(target.dtype))
    return model


def load_checkpoint(model: DehazeModel, path: PathLike) -> DehazeModel:
    return apply_checkpoint(model, read_checkpoint(path))


def model_from_checkpoint(path: PathLike) -> DehazeModel:
    checkpoint = read_checkpoint(path)
    model = build_model(checkpoint.architecture, checkpoint.config)
    return apply_checkpoint(model, checkpoint)


def import_encoder_weights(model: DehazeModel, path: PathLike) -> int:
    """Seed every encoder in ``model`` from the encoder tensors of a checkpoint.

    Tensors are matched by their name below ``encoder.`` and must agree in
    shape; returns the number of tensors copied.
    """
    checkpoint = read_checkpoint(path)
    by_suffix = {}
    for name, array in checkpoint.tensors.items():
        if "encoder." in name:
            by_suffix.setdefault(name.split("encoder.", 1)[1], array)

    copied = 0
    with torch.no_grad():
        for name, target in model.state_dict().items():
            if "encoder." not in name:
                continue
            source = by_suffix.get(name.split("encoder.", 1)[1])
            if source is None or tuple(source.shape) != tuple(target.shape):
                continue
            target.copy_(torch.from_numpy(source).to(target.dtype))
            copied += 1
    return copied
