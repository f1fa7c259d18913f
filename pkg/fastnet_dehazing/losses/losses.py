"""Pixel and perceptual losses: MSE, L1, SSIM and frozen-encoder content loss.

The content loss compares feature maps of a frozen copy of the model's own
encoder (stem through stage 2), snapshotted when training with it starts.
This replaces an externally pretrained perceptual network.
"""

import math
from typing import Dict, List, Literal, Optional, Tuple

import torch
from pydantic import BaseModel, Field, field_validator, model_validator
from torch import nn

from fastnet_dehazing.errors import InvalidParameterError, ShapeMismatchError
from fastnet_dehazing.metrics.quality import SsimParams, ssim_tensor

LossKind = Literal["mse", "l1", "ssim", "content"]


class LossSpec(BaseModel):
    kind: LossKind = "mse"
    weight: float = Field(default=1.0, ge=0.0)
    ssim: Optional[SsimParams] = None

    @field_validator("weight")
    @classmethod
    def _finite_weight(cls, weight: float) -> float:
        if not math.isfinite(weight):
            raise ValueError("loss weight must be finite")
        return weight

    @model_validator(mode="after")
    def _default_ssim_params(self) -> "LossSpec":
        if self.kind == "ssim" and self.ssim is None:
            self.ssim = SsimParams()
        return self

    @property
    def label(self) -> str:
        return LOSS_LABELS[self.kind]


LOSS_LABELS: Dict[str, str] = {"mse": "MSE", "l1": "L1", "ssim": "SSIM", "content": "Content Loss"}


class SSIMLoss(nn.Module):
    """1 - SSIM on the channel-mean grayscale images."""

    def __init__(self, params: Optional[SsimParams] = None):
        super().__init__()
        self.params = params or SsimParams()

    def forward(self, pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
        return 1.0 - ssim_tensor(pred, truth, self.params)


class ContentLoss(nn.Module):
    """MSE between feature maps of a frozen extractor."""

    def __init__(self, extractor: nn.Module):
        super().__init__()
        self.extractor = extractor
        self.extractor.requires_grad_(False)
        self.extractor.eval()

    def train(self, mode: bool = True):
        # The extractor stays in eval mode so its BN statistics never move
        super().train(mode)
        self.extractor.eval()
        return self

    def forward(self, pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
        return nn.functional.mse_loss(self.extractor(pred), self.extractor(truth))


def build_loss(spec: LossSpec, feature_extractor: Optional[nn.Module] = None) -> nn.Module:
    """Unweighted criterion module for ``spec``."""
    if spec.kind == "mse":
        return nn.MSELoss()
    if spec.kind == "l1":
        return nn.L1Loss()
    if spec.kind == "ssim":
        return SSIMLoss(spec.ssim)
    if feature_extractor is None:
        raise InvalidParameterError("content loss needs a feature extractor")
    return ContentLoss(feature_extractor)


def check_shapes(pred: torch.Tensor, truth: torch.Tensor):
    if pred.shape != truth.shape:
        raise ShapeMismatchError(f"prediction {tuple(pred.shape)} and truth {tuple(truth.shape)} differ in shape")


def loss_value(
    pred: torch.Tensor,
    truth: torch.Tensor,
    spec: LossSpec,
    feature_extractor: Optional[nn.Module] = None,
) -> torch.Tensor:
    """Weighted, differentiable loss tensor."""
    check_shapes(pred, truth)
    return spec.weight * build_loss(spec, feature_extractor)(pred, truth)


def loss_forward_backward(
    pred: torch.Tensor,
    truth: torch.Tensor,
    spec: LossSpec,
    feature_extractor: Optional[nn.Module] = None,
) -> Tuple[float, torch.Tensor]:
    """Return the scalar loss and its gradient with respect to ``pred``."""
    check_shapes(pred, truth)
    leaf = pred.detach().clone().requires_grad_(True)
    value = loss_value(leaf, truth.detach(), spec, feature_extractor)
    (grad,) = torch.autograd.grad(value, leaf)
    return float(value.detach()), grad


LOSS_COMBINATIONS: List[str] = [
    "L1",
    "L1 → MSE",
    "L1 → SSIM",
    "MSE",
    "MSE → L1",
    "MSE → SSIM",
    "MSE → Content Loss",
]


def loss_from_label(label: str) -> LossSpec:
    """Parse a loss name such as ``MSE`` or ``Content Loss`` (case-insensitive)."""
    wanted = label.strip().lower()
    for kind, name in LOSS_LABELS.items():
        if wanted in (kind, name.lower()):
            return LossSpec(kind=kind)
    raise InvalidParameterError(f"unknown loss '{label}'; expected one of {sorted(LOSS_LABELS.values())}")


def parse_combination(name: str) -> Tuple[LossSpec, Optional[LossSpec]]:
    """Split a ``base → refinement`` name (``->`` also accepted) into loss specs."""
    parts = [p for p in name.replace("->", "→").split("→")]
    if len(parts) > 2 or not all(p.strip() for p in parts):
        raise InvalidParameterError(f"cannot parse loss combination '{name}'")
    base = loss_from_label(parts[0])
    refinement = loss_from_label(parts[1]) if len(parts) == 2 else None
    return base, refinement


def combination_tag(base: LossSpec, refinement: Optional[LossSpec] = None) -> str:
    if refinement is None:
        return base.label
    return f"{base.label} → {refinement.label}"
