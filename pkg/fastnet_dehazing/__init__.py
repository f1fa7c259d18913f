"""
FastNet Dehazing

Single-image dehazing with lightweight encoder-decoder networks:
- FastNet, a LinkNet-style encoder-decoder with a pyramid-pooling refinement head
- DualFastNet, which estimates transmission and airlight and inverts the
  scattering model before refining

Includes haze synthesis, PSNR/SSIM scoring, training, and throughput benchmarks.
"""

__version__ = "0.1.0"
