"""Model construction, shape-checked forward, padding helpers and parameter accounting."""

from typing import Dict, Optional, Tuple, Union

import torch
import torch.nn.functional as F
from torch import nn

from fastnet_dehazing.errors import InputShapeError, ModelLoadError
from fastnet_dehazing.imaging.image_core import Image, image_to_tensor, tensor_to_image
from fastnet_dehazing.models.blocks import EncoderDecoder
from fastnet_dehazing.models.config import ARCHITECTURES, ENCODER_STRIDE, PRESETS, FastNetConfig
from fastnet_dehazing.models.dual_fastnet import DualFastNet
from fastnet_dehazing.models.fastnet import FastNet
from fastnet_dehazing.nn.layers import init_weights, param_count

DehazeModel = Union[FastNet, DualFastNet]


def _initialised(model: nn.Module, seed: Optional[int]) -> nn.Module:
    if seed is None:
        model.apply(init_weights)
        return model
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model.apply(init_weights)
    return model


def build_fastnet(cfg: FastNetConfig, seed: Optional[int] = None) -> FastNet:
    return _initialised(FastNet(cfg), seed)


def build_dualfastnet(cfg: FastNetConfig, seed: Optional[int] = None) -> DualFastNet:
    return _initialised(DualFastNet(cfg), seed)


def build_model(architecture: str, cfg: FastNetConfig, seed: Optional[int] = None) -> DehazeModel:
    if architecture == "fastnet":
        return build_fastnet(cfg, seed)
    if architecture == "dual_fastnet":
        return build_dualfastnet(cfg, seed)
    raise ModelLoadError(f"Unknown architecture '{architecture}'; expected one of {ARCHITECTURES}")


def build_preset(name: str, seed: Optional[int] = None) -> DehazeModel:
    if name not in PRESETS:
        raise ModelLoadError(f"Unknown model preset '{name}'; expected one of {sorted(PRESETS)}")
    architecture, cfg = PRESETS[name]
    return build_model(architecture, cfg.model_copy(deep=True), seed)


def required_padding(height: int, width: int, multiple: int = ENCODER_STRIDE) -> Tuple[int, int]:
    return (-height) % multiple, (-width) % multiple


def pad_to_multiple(x: torch.Tensor, multiple: int = ENCODER_STRIDE) -> Tuple[torch.Tensor, Tuple[int, int]]:
    """Reflect-pad bottom/right so H and W divide ``multiple``; returns the original size too."""
    height, width = x.shape[-2:]
    pad_h, pad_w = required_padding(height, width, multiple)
    if pad_h == 0 and pad_w == 0:
        return x, (height, width)
    # Reflection needs the pad to be smaller than the dimension
    mode = "reflect" if pad_h < height and pad_w < width else "replicate"
    return F.pad(x, (0, pad_w, 0, pad_h), mode=mode), (height, width)


def crop_to(x: torch.Tensor, size: Tuple[int, int]) -> torch.Tensor:
    return x[..., : size[0], : size[1]]


def forward(model: DehazeModel, hazy: torch.Tensor) -> Dict[str, torch.Tensor]:
    """Run the model on an N x 3 x H x W batch whose H and W divide 32."""
    height, width = hazy.shape[-2:]
    pad_h, pad_w = required_padding(height, width)
    if pad_h or pad_w:
        raise InputShapeError(
            f"input {height}x{width} is not divisible by {ENCODER_STRIDE}; "
            f"pad by {pad_h} rows and {pad_w} columns",
            required_padding=(pad_h, pad_w),
        )
    return model(hazy)


def dehaze_tensor(model: DehazeModel, hazy: torch.Tensor) -> Dict[str, torch.Tensor]:
    """Eval-mode forward on any H x W: pad, run, crop every output back."""
    was_training = model.training
    model.eval()
    try:
        padded, size = pad_to_multiple(hazy)
        with torch.no_grad():
            outputs = forward(model, padded)
    finally:
        model.train(was_training)
    return {name: crop_to(t, size) for name, t in outputs.items()}


def dehaze(model: DehazeModel, hazy: Image) -> Image:
    dtype = next(model.parameters()).dtype
    outputs = dehaze_tensor(model, image_to_tensor(hazy, dtype))
    return tensor_to_image(outputs["refined"])


def encoder_decoder_params(cfg: FastNetConfig) -> int:
    """Parameters of one encoder-decoder trunk for ``cfg``."""
    return param_count(EncoderDecoder(cfg))


def parameter_breakdown(model: DehazeModel) -> Dict[str, int]:
    """Parameter counts per top-level component plus the total."""
    if isinstance(model, DualFastNet):
        parts = {
            "transmission.trunk": model.transmission.trunk,
            "transmission.projection": model.transmission.projection,
            "airlight.trunk": model.airlight.trunk,
            "airlight.projection": model.airlight.projection,
            "refinement": model.refinement,
        }
    else:
        parts = {
            "encoder": model.trunk.encoder,
            "decoder": model.trunk.decoder,
            "head": model.trunk.head,
            "refinement": model.refinement,
        }
    breakdown = {name: param_count(module) for name, module in parts.items()}
    breakdown["total"] = param_count(model)
    return breakdown
