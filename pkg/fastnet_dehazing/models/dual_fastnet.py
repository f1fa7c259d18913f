import copy
from typing import Dict

import torch
from torch import nn

from fastnet_dehazing.models.blocks import EncoderDecoder, RefinementHead
from fastnet_dehazing.models.config import FastNetConfig
from fastnet_dehazing.nn import functional as fn
from fastnet_dehazing.physics.scattering import recover_scene_tensor


class EstimatorBranch(nn.Module):
    """Encoder-decoder trunk with a 3x3 projection to a sigmoid map."""

    def __init__(self, cfg: FastNetConfig, out_channels: int):
        super().__init__()
        self.trunk = EncoderDecoder(cfg)
        self.projection = nn.Conv2d(cfg.feature_channels, out_channels, 3, 1, 1, bias=True)
        self.activation = nn.Sigmoid()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.activation(self.projection(self.trunk(x)))


class DualFastNet(nn.Module):
    """Two encoder-decoders estimate transmission and airlight; the scattering model
    forms a dehazed image, which is refined together with the hazy input."""

    architecture = "dual_fastnet"

    def __init__(self, cfg: FastNetConfig):
        super().__init__()
        self.cfg = cfg
        self.transmission = EstimatorBranch(cfg, 1)
        self.airlight = EstimatorBranch(cfg, 3)
        self.refinement = RefinementHead(6, cfg.feature_channels, cfg.refinement_scales)

    def form_image(self, hazy: torch.Tensor, t: torch.Tensor, A: torch.Tensor) -> torch.Tensor:
        return recover_scene_tensor(hazy, t, A, self.cfg.t_min)

    def forward(self, hazy: torch.Tensor) -> Dict[str, torch.Tensor]:
        t = self.transmission(hazy)
        A = self.airlight(hazy)
        dehazed = self.form_image(hazy, t, A)
        refined = self.refinement(fn.concat([dehazed, hazy]))
        return {"refined": refined, "dehazed": dehazed, "transmission": t, "airlight": A}

    def feature_extractor(self) -> nn.Module:
        """Frozen copy of the transmission encoder through stage 2."""
        extractor = copy.deepcopy(self.transmission.trunk.feature_extractor())
        extractor.requires_grad_(False)
        return extractor.eval()
