"""
Image quality metrics

PSNR, Gaussian-windowed SSIM and per-dataset quality reports.
"""

from .quality import (
    PSNR_IDENTICAL_TAG,
    PairQuality,
    QualityReport,
    SsimParams,
    evaluate_pairs,
    gaussian_window,
    psnr,
    ssim,
    ssim_map,
    ssim_tensor,
)

__all__ = [
    'PSNR_IDENTICAL_TAG',
    'PairQuality',
    'QualityReport',
    'SsimParams',
    'evaluate_pairs',
    'gaussian_window',
    'psnr',
    'ssim',
    'ssim_map',
    'ssim_tensor',
]
