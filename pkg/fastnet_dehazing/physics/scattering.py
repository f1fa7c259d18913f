"""Atmospheric scattering model: haze synthesis, scene recovery and the K-transform.

Image formation is ``I = J * t + A * (1 - t)``. The K-transform folds t and A
into one per-pixel multiplier so that ``J = K * I - K + b``.
"""

from typing import Union

import numpy as np
import torch
from pydantic import Field, field_validator

from fastnet_dehazing.errors import InvalidParameterError, ShapeMismatchError
from fastnet_dehazing.imaging.image_core import ArrayModel, Image

T_MIN_SYNTHESIS = 1e-4
T_MIN_RECOVERY = 0.05
EPS_K = 1e-6

KMap = np.ndarray


class TransmissionMap(ArrayModel):
    """Per-pixel transmission t(x) in (0, 1], shape H x W."""

    data: np.ndarray

    @field_validator("data", mode="before")
    @classmethod
    def _validate_data(cls, value):
        arr = np.ascontiguousarray(np.asarray(value, dtype=np.float64))
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise ValueError(f"transmission map must be H x W, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("transmission map contains non-finite values")
        if arr.min() <= 0.0 or arr.max() > 1.0:
            raise ValueError("transmission values must lie in (0, 1]")
        return arr

    @property
    def shape(self) -> tuple:
        return self.data.shape


class DepthMap(ArrayModel):
    """Per-pixel nonnegative scene depth, shape H x W."""

    data: np.ndarray

    @field_validator("data", mode="before")
    @classmethod
    def _validate_data(cls, value):
        arr = np.ascontiguousarray(np.asarray(value, dtype=np.float64))
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise ValueError(f"depth map must be H x W, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0:
            raise ValueError("depth must be finite and nonnegative")
        return arr

    @property
    def shape(self) -> tuple:
        return self.data.shape


class AtmosphericLight(ArrayModel):
    """Global airlight as a C-vector, or a per-pixel H x W x C map, in [0, 1]."""

    data: np.ndarray

    @field_validator("data", mode="before")
    @classmethod
    def _validate_data(cls, value):
        arr = np.ascontiguousarray(np.atleast_1d(np.asarray(value, dtype=np.float64)))
        if arr.ndim not in (1, 3):
            raise ValueError(f"airlight must be a C-vector or H x W x C map, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("airlight values must lie in [0, 1]")
        return arr

    @classmethod
    def uniform(cls, value: float, channels: int = 3) -> "AtmosphericLight":
        return cls(data=np.full(channels, value, dtype=np.float64))

    @property
    def is_global(self) -> bool:
        return self.data.ndim == 1


class ScatterParams(ArrayModel):
    beta: float = Field(gt=0.0)
    A: AtmosphericLight
    b: float = 0.0


def _airlight_for(A: AtmosphericLight, height: int, width: int, channels: int) -> np.ndarray:
    """Airlight broadcastable against an H x W x C array."""
    if A.is_global:
        if A.data.shape[0] == channels:
            return A.data.reshape(1, 1, channels)
        if A.data.shape[0] == 1:
            return np.full((1, 1, channels), A.data[0])
        raise ShapeMismatchError(f"airlight has {A.data.shape[0]} channels, image has {channels}")
    if A.data.shape != (height, width, channels):
        raise ShapeMismatchError(f"airlight map {A.data.shape} does not match image {(height, width, channels)}")
    return A.data


def _check_map(img_shape: tuple, map_shape: tuple, what: str):
    if img_shape[:2] != map_shape:
        raise ShapeMismatchError(f"{what} of shape {map_shape} does not match image {img_shape[:2]}")


def transmission_from_depth(d: DepthMap, beta: float) -> TransmissionMap:
    """Beer-Lambert transmission ``exp(-beta * d)`` floored at 1e-4."""
    if not beta > 0.0:
        raise InvalidParameterError(f"scattering coefficient must be positive, got {beta}")
    t = np.exp(-beta * d.data)
    return TransmissionMap(data=np.maximum(t, T_MIN_SYNTHESIS))


def synthesize_haze(J: Image, t: TransmissionMap, A: AtmosphericLight) -> Image:
    _check_map(J.shape, t.shape, "transmission map")
    a = _airlight_for(A, J.height, J.width, J.channels)
    tt = t.data[:, :, None]
    hazy = J.data * tt + a * (1.0 - tt)
    return Image(data=np.clip(hazy, 0.0, 1.0))


def recover_array(I: np.ndarray, t: np.ndarray, A: np.ndarray, t_min: float = T_MIN_RECOVERY) -> np.ndarray:
    """Unclamped inversion of the scattering model on raw arrays."""
    if not t_min > 0.0:
        raise InvalidParameterError(f"t_min must be positive, got {t_min}")
    t_safe = np.maximum(t, t_min)
    if t_safe.ndim == 2:
        t_safe = t_safe[:, :, None]
    return (I - A * (1.0 - t_safe)) / t_safe


def recover_scene(I: Image, t: TransmissionMap, A: AtmosphericLight, t_min: float = T_MIN_RECOVERY) -> Image:
    _check_map(I.shape, t.shape, "transmission map")
    a = _airlight_for(A, I.height, I.width, I.channels)
    J = recover_array(I.data, t.data, a, t_min)
    return Image(data=np.clip(J, 0.0, 1.0))


def k_transform(I: Image, t: TransmissionMap, A: AtmosphericLight, b: float = 0.0) -> KMap:
    """Per-pixel K with the pole at I = 1 guarded by replacing I with min(I, 1 - 1e-6)."""
    _check_map(I.shape, t.shape, "transmission map")
    a = _airlight_for(A, I.height, I.width, I.channels)
    guarded = np.minimum(I.data, 1.0 - EPS_K)
    tt = t.data[:, :, None]
    return ((guarded - a) / tt + (a - b)) / (guarded - 1.0)


def apply_k_array(K: KMap, I: np.ndarray, b: float = 0.0) -> np.ndarray:
    """Unclamped ``K * I - K + b``."""
    if K.shape != I.shape:
        raise ShapeMismatchError(f"K map {K.shape} does not match image {I.shape}")
    return K * I - K + b


def apply_k(K: KMap, I: Image, b: float = 0.0) -> Image:
    return Image(data=np.clip(apply_k_array(K, I.data, b), 0.0, 1.0))


def recover_scene_tensor(
    I: torch.Tensor,
    t: torch.Tensor,
    A: Union[torch.Tensor, float],
    t_min: float = T_MIN_RECOVERY,
) -> torch.Tensor:
    """Differentiable batch inversion used inside DualFastNet.

    ``I`` and ``A`` are N x C x H x W (``A`` may broadcast), ``t`` is N x 1 x H x W.
    """
    t_safe = torch.clamp(t, min=t_min)
    J = (I - A * (1.0 - t_safe)) / t_safe
    return torch.clamp(J, 0.0, 1.0)
