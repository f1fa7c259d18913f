"""PSNR and Gaussian-windowed SSIM, plus dataset-level aggregation.

SSIM is computed on the channel-mean grayscale image, aggregated over valid
(unpadded) window positions. The same tensor routine backs the SSIM loss.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from pydantic import BaseModel, Field, field_validator

from fastnet_dehazing.errors import InvalidParameterError, ShapeMismatchError
from fastnet_dehazing.imaging.image_core import Image, image_to_tensor

PSNR_IDENTICAL_TAG = "identical"


class SsimParams(BaseModel):
    window: int = Field(default=11, ge=3)
    sigma: float = Field(default=1.5, gt=0.0)
    k1: float = Field(default=0.01, gt=0.0)
    k2: float = Field(default=0.03, gt=0.0)
    L: float = Field(default=1.0, gt=0.0)

    @field_validator("window")
    @classmethod
    def _odd_window(cls, window: int) -> int:
        if window % 2 == 0:
            raise ValueError("SSIM window must be odd")
        return window


def gaussian_window(params: SsimParams, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """Normalized 2-D Gaussian weights, shaped 1 x 1 x window x window."""
    radius = params.window // 2
    x = torch.arange(-radius, radius + 1, dtype=torch.float64)
    g = torch.exp(-(x ** 2) / (2.0 * params.sigma ** 2))
    g = g / g.sum()
    return torch.outer(g, g).to(dtype).reshape(1, 1, params.window, params.window)


def ssim_map(a: torch.Tensor, b: torch.Tensor, params: SsimParams) -> torch.Tensor:
    """Per-window SSIM for N x C x H x W batches; returns N x 1 x H' x W'."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"SSIM inputs differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.shape[-2] < params.window or a.shape[-1] < params.window:
        raise InvalidParameterError(
            f"images of size {a.shape[-2]}x{a.shape[-1]} are smaller than the {params.window}-pixel SSIM window"
        )
    w = gaussian_window(params, dtype=a.dtype).to(a.device)
    x = a.mean(dim=1, keepdim=True)
    y = b.mean(dim=1, keepdim=True)

    mu_x = F.conv2d(x, w)
    mu_y = F.conv2d(y, w)
    sigma_xx = F.conv2d(x * x, w) - mu_x * mu_x
    sigma_yy = F.conv2d(y * y, w) - mu_y * mu_y
    sigma_xy = F.conv2d(x * y, w) - mu_x * mu_y

    c1 = (params.k1 * params.L) ** 2
    c2 = (params.k2 * params.L) ** 2
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_xx + sigma_yy + c2)
    return numerator / denominator


def ssim_tensor(a: torch.Tensor, b: torch.Tensor, params: Optional[SsimParams] = None) -> torch.Tensor:
    """Mean SSIM over every window of every batch item (differentiable)."""
    return ssim_map(a, b, params or SsimParams()).mean()


def _check_pair(a: Image, b: Image):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")


def psnr(a: Image, b: Image, L: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical images."""
    _check_pair(a, b)
    if not L > 0.0:
        raise InvalidParameterError(f"dynamic range must be positive, got {L}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(L * L / mse)


def ssim(a: Image, b: Image, params: Optional[SsimParams] = None) -> float:
    _check_pair(a, b)
    value = ssim_tensor(image_to_tensor(a, torch.float64), image_to_tensor(b, torch.float64), params)
    return float(value)


class PairQuality(BaseModel):
    index: int
    psnr_db: float
    ssim: float

    @property
    def identical(self) -> bool:
        return math.isinf(self.psnr_db)


class QualityReport(BaseModel):
    pairs: List[PairQuality]
    psnr_mean_db: Optional[float]
    psnr_std_db: Optional[float]
    psnr_identical_count: int
    ssim_mean: float
    ssim_std: float

    def to_text(self) -> str:
        """Plain key-value summary."""

        def fmt(value: Optional[float]) -> str:
            return PSNR_IDENTICAL_TAG if value is None else f"{value:.4f}"

        lines = [
            f"pairs: {len(self.pairs)}",
            f"psnr_mean_db: {fmt(self.psnr_mean_db)}",
            f"psnr_std_db: {fmt(self.psnr_std_db)}",
            f"psnr_identical_count: {self.psnr_identical_count}",
            f"ssim_mean: {self.ssim_mean:.6f}",
            f"ssim_std: {self.ssim_std:.6f}",
        ]
        return "\n".join(lines) + "\n"

    def to_frame(self) -> pd.DataFrame:
        """One row per pair; identical pairs carry a null PSNR and the identical tag."""
        return pd.DataFrame(
            {
                "index": [p.index for p in self.pairs],
                "psnr_db": [None if p.identical else p.psnr_db for p in self.pairs],
                "psnr_tag": [PSNR_IDENTICAL_TAG if p.identical else "finite" for p in self.pairs],
                "ssim": [p.ssim for p in self.pairs],
            }
        )

    def to_jsonl(self) -> str:
        return self.to_frame().to_json(orient="records", lines=True)

    def write(self, path: Union[str, Path]) -> None:
        """Write the JSON-lines records to ``path`` and the summary next to it."""
        path = Path(path)
        path.write_text(self.to_jsonl())
        path.with_suffix(".txt").write_text(self.to_text())


def _score_pair(item: Tuple[int, Tuple[Image, Image], SsimParams]) -> PairQuality:
    index, (output, truth), params = item
    return PairQuality(index=index, psnr_db=psnr(output, truth, params.L), ssim=ssim(output, truth, params))


def evaluate_pairs(
    pairs: Sequence[Tuple[Image, Image]],
    params: Optional[SsimParams] = None,
    workers: Optional[int] = None,
) -> QualityReport:
    """Score (output, truth) pairs; aggregation order is the input order."""
    if not pairs:
        raise InvalidParameterError("evaluate_pairs needs at least one pair")
    params = params or SsimParams()
    items = [(i, pair, params) for i, pair in enumerate(pairs)]

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(_score_pair, items))
    else:
        scored = [_score_pair(item) for item in items]

    finite = [p.psnr_db for p in scored if not p.identical]
    ssims = [p.ssim for p in scored]
    return QualityReport(
        pairs=scored,
        psnr_mean_db=float(np.mean(finite)) if finite else None,
        psnr_std_db=float(np.std(finite)) if finite else None,
        psnr_identical_count=len(scored) - len(finite),
        ssim_mean=float(np.mean(ssims)),
        ssim_std=float(np.std(ssims)),
    )
