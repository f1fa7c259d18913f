"""Residual encoder, LinkNet decoder, full-resolution head and pyramid refinement."""

from typing import List, Sequence

import torch
from torch import nn

from fastnet_dehazing.models.config import FastNetConfig
from fastnet_dehazing.nn import functional as fn
from fastnet_dehazing.nn.layers import conv_bn_relu, deconv_bn_relu


class BasicBlock(nn.Module):
    def __init__(self, in_channels: int, width: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, width, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(width)
        self.conv2 = nn.Conv2d(width, width, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(width)
        self.relu = nn.ReLU(inplace=False)
        self.shortcut = _projection(in_channels, width, stride)
        self.out_channels = width

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return self.relu(fn.add_skip(y, self.shortcut(x)))


class Bottleneck(nn.Module):
    expansion = 4

    def __init__(self, in_channels: int, width: int, stride: int = 1):
        super().__init__()
        out_channels = width * self.expansion
        self.conv1 = nn.Conv2d(in_channels, width, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(width)
        self.conv2 = nn.Conv2d(width, width, 3, stride, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(width)
        self.conv3 = nn.Conv2d(width, out_channels, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(out_channels)
        self.relu = nn.ReLU(inplace=False)
        self.shortcut = _projection(in_channels, out_channels, stride)
        self.out_channels = out_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.relu(self.bn1(self.conv1(x)))
        y = self.relu(self.bn2(self.conv2(y)))
        y = self.bn3(self.conv3(y))
        return self.relu(fn.add_skip(y, self.shortcut(x)))


def _projection(in_channels: int, out_channels: int, stride: int) -> nn.Module:
    if stride == 1 and in_channels == out_channels:
        return nn.Identity()
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, 1, stride, bias=False),
        nn.BatchNorm2d(out_channels),
    )


class ResidualEncoder(nn.Module):
    """Stem (7x7/2 conv, 3x3/2 max pool) followed by four residual stages."""

    def __init__(self, cfg: FastNetConfig):
        super().__init__()
        block = Bottleneck if cfg.encoder_kind == "bottleneck" else BasicBlock
        self.stem = nn.Sequential(
            nn.Conv2d(3, cfg.base_width, 7, 2, 3, bias=False),
            nn.BatchNorm2d(cfg.base_width),
            nn.ReLU(inplace=False),
            nn.MaxPool2d(3, 2, 1),
        )
        stages = []
        in_channels = cfg.base_width
        for index, count in enumerate(cfg.blocks_per_stage):
            width = cfg.base_width * (2 ** index)
            blocks = []
            for b in range(count):
                stride = 2 if (index > 0 and b == 0) else 1
                unit = block(in_channels, width, stride)
                blocks.append(unit)
                in_channels = unit.out_channels
            stages.append(nn.Sequential(*blocks))
        self.stages = nn.ModuleList(stages)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        """Stem output followed by the four stage outputs (strides 4, 4, 8, 16, 32)."""
        features = [self.stem(x)]
        for stage in self.stages:
            features.append(stage(features[-1]))
        return features


class DecoderBlock(nn.Module):
    """1x1 reduce to in/4, 3x3 transposed conv, 1x1 expand; norm and relu after each."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 2):
        super().__init__()
        mid = max(1, in_channels // 4)
        self.reduce = conv_bn_relu(in_channels, mid, 1)
        self.upsample = deconv_bn_relu(mid, mid, 3, stride)
        self.expand = conv_bn_relu(mid, out_channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.expand(self.upsample(self.reduce(x)))


class LinkNetDecoder(nn.Module):
    """Four decoder blocks, each output forwarded onto the matching encoder output."""

    def __init__(self, cfg: FastNetConfig):
        super().__init__()
        c1, c2, c3, c4 = cfg.stage_widths
        self.blocks = nn.ModuleList(
            [
                DecoderBlock(c1, cfg.base_width, stride=1),
                DecoderBlock(c2, c1),
                DecoderBlock(c3, c2),
                DecoderBlock(c4, c3),
            ]
        )

    def forward(self, features: Sequence[torch.Tensor]) -> torch.Tensor:
        x = features[4]
        for k in (4, 3, 2, 1):
            x = fn.add_skip(self.blocks[k - 1](x), features[k - 1])
        return x


class FullResolutionHead(nn.Module):
    """Lifts decoder output from stride 4 back to input resolution."""

    def __init__(self, in_channels: int, feature_channels: int):
        super().__init__()
        self.up1 = deconv_bn_relu(in_channels, feature_channels, 3, 2)
        self.conv = conv_bn_relu(feature_channels, feature_channels, 3, 1, 1)
        self.up2 = nn.ConvTranspose2d(feature_channels, feature_channels, 3, 2, 1, 1, bias=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.up2(self.conv(self.up1(x)))


class EncoderDecoder(nn.Module):
    """One encoder-decoder trunk producing full-resolution features."""

    def __init__(self, cfg: FastNetConfig):
        super().__init__()
        self.encoder = ResidualEncoder(cfg)
        self.decoder = LinkNetDecoder(cfg)
        self.head = FullResolutionHead(cfg.base_width, cfg.feature_channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.decoder(self.encoder(x)))

    def feature_extractor(self) -> nn.Module:
        """Stem through stage 2 of the encoder (shares parameters; callers copy)."""
        return nn.Sequential(self.encoder.stem, self.encoder.stages[0], self.encoder.stages[1])


class RefinementHead(nn.Module):
    """Pyramid pooling refinement.

    Each grid size g pools the input to g x g, projects to feature_channels/4
    with a 1x1 conv and is resized back; all branches are concatenated with the
    unpooled input and fused by a 3x3 conv into a sigmoid RGB image.
    """

    def __init__(self, in_channels: int, feature_channels: int, scales: Sequence[int]):
        super().__init__()
        branch_channels = max(1, feature_channels // 4)
        self.branches = nn.ModuleList(
            [
                nn.Sequential(nn.AdaptiveAvgPool2d(g), nn.Conv2d(in_channels, branch_channels, 1, bias=True))
                for g in scales
            ]
        )
        self.fuse = nn.Conv2d(in_channels + branch_channels * len(scales), 3, 3, 1, 1, bias=True)
        self.activation = nn.Sigmoid()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        size = x.shape[-2:]
        pyramid = [x] + [fn.upsample_bilinear(branch(x), size) for branch in self.branches]
        return self.activation(self.fuse(fn.concat(pyramid)))
