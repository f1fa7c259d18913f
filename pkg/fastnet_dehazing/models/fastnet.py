import copy
from typing import Dict

import torch
from torch import nn

from fastnet_dehazing.models.blocks import EncoderDecoder, RefinementHead
from fastnet_dehazing.models.config import FastNetConfig


class FastNet(nn.Module):
    """Single encoder-decoder whose features feed the pyramid refinement head directly."""

    architecture = "fastnet"

    def __init__(self, cfg: FastNetConfig):
        super().__init__()
        self.cfg = cfg
        self.trunk = EncoderDecoder(cfg)
        self.refinement = RefinementHead(cfg.feature_channels, cfg.feature_channels, cfg.refinement_scales)

    def forward(self, hazy: torch.Tensor) -> Dict[str, torch.Tensor]:
        return {"refined": self.refinement(self.trunk(hazy))}

    def feature_extractor(self) -> nn.Module:
        """Frozen copy of the encoder through stage 2."""
        extractor = copy.deepcopy(self.trunk.feature_extractor())
        extractor.requires_grad_(False)
        return extractor.eval()
