"""Turning HazeSamples into N x C x H x W batches, with optional paired augmentation."""

from typing import Dict, Optional, Sequence

import numpy as np
import torch

from fastnet_dehazing.data.records import HazeSample
from fastnet_dehazing.errors import MissingTargetError, ShapeMismatchError
from fastnet_dehazing.imaging.augmentation import AugmentSpec, augment_group
from fastnet_dehazing.imaging.image_core import Image
from fastnet_dehazing.physics.scattering import AtmosphericLight, TransmissionMap


def augmentation_seed(seed: int, epoch: int, index: int) -> int:
    """Seed for one sample in one epoch, independent of batch composition."""
    return int(np.random.SeedSequence([seed, epoch, index]).generate_state(1)[0])


def airlight_map(sample: HazeSample) -> np.ndarray:
    A = sample.airlight.data
    if A.ndim == 1:
        return np.broadcast_to(A.reshape(1, 1, -1), sample.clean.shape).copy()
    return A


def augment_sample(sample: HazeSample, crop_size: int, rotations: Sequence[int], seed: int) -> HazeSample:
    """Crop and rotate every raster of a sample with one window and turn."""
    rasters = [sample.hazy, sample.clean]
    if sample.transmission is not None:
        rasters.append(Image(data=sample.transmission.data))
    if sample.airlight is not None:
        rasters.append(Image(data=airlight_map(sample)))

    spec = AugmentSpec(crop_size=crop_size, rotations=list(rotations), seed=seed)
    out = list(augment_group(rasters, spec))
    update = {"hazy": out[0], "clean": out[1]}
    position = 2
    if sample.transmission is not None:
        update["transmission"] = TransmissionMap(data=out[position].data[:, :, 0])
        position += 1
    if sample.airlight is not None:
        update["airlight"] = AtmosphericLight(data=out[position].data)
    return sample.model_copy(update=update)


def _stack(arrays: Sequence[np.ndarray], dtype: torch.dtype) -> torch.Tensor:
    batch = np.stack([a.transpose(2, 0, 1) for a in arrays])
    return torch.from_numpy(np.ascontiguousarray(batch)).to(dtype)


def collate(samples: Sequence[HazeSample], dtype: torch.dtype = torch.float32) -> Dict[str, torch.Tensor]:
    """Batch tensors keyed ``hazy``, ``clean`` and, when every sample has them,
    ``transmission`` (N x 1 x H x W) and ``airlight`` (N x 3 x H x W)."""
    shapes = {s.hazy.shape for s in samples} | {s.clean.shape for s in samples}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"samples in one batch differ in shape: {sorted(shapes)}")

    batch = {
        "hazy": _stack([s.hazy.data for s in samples], dtype),
        "clean": _stack([s.clean.data for s in samples], dtype),
    }
    if all(s.transmission is not None for s in samples):
        batch["transmission"] = _stack([s.transmission.data[:, :, None] for s in samples], dtype)
    if all(s.airlight is not None for s in samples):
        batch["airlight"] = _stack([airlight_map(s) for s in samples], dtype)
    return batch


def require_truths(sample: HazeSample, truths: Sequence[str], where: Optional[str] = None):
    for name in truths:
        if name in ("hazy", "clean"):
            continue
        if getattr(sample, name) is None:
            raise MissingTargetError(f"{where or 'dataset'} sample lacks the '{name}' truth")
