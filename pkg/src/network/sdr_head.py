"""
Sparse-to-dense regression head.

Three downsampling blocks produce b1, b2, b3 at 1/2, 1/4 and 1/8 of the BEV grid. Cross-scale
inputs concat(b1, up(b2)), concat(b2, up(b3)) and b3 each pass through a convolution branch
upsampled to the b1 resolution; every branch output F_i is summed with a channel-aligned copy
of b_i, the three sums are concatenated and fused by a 3x3 convolution, and 1x1 convolutions
give per-anchor logits and residuals.

Variants: ``sdr`` (full), ``dr`` (no b_i addition), ``sr`` (no cross-scale concatenation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError, DimensionError
from src.tensor import functional as F
from src.tensor.layers import Conv2d, ConvBnRelu, Module
from src.tensor.tensor import Tensor

HEAD_VARIANTS = ("sdr", "dr", "sr")
BOX_CODE_SIZE = 7


@dataclass
class HeadOutput:
    """cls_map [B x A x H1 x W1] logits and reg_map [B x 7A x H1 x W1] residuals (channel a*7 + component)."""

    cls_map: Tensor
    reg_map: Tensor

    @property
    def anchors_per_cell(self) -> int:
        return self.cls_map.shape[1]

    def flatten(self) -> Tuple[Tensor, Tensor]:
        """
        Anchor-major views matching the anchor grid layout.

        Returns:
            (logits [B x H1*W1*A], residuals [B x H1*W1*A x 7])
        """
        batch, n_anchors, height, width = self.cls_map.shape
        logits = self.cls_map.transpose(0, 2, 3, 1).reshape(batch, height * width * n_anchors)
        residuals = (
            self.reg_map.reshape(batch, n_anchors, BOX_CODE_SIZE, height, width)
            .transpose(0, 3, 4, 1, 2)
            .reshape(batch, height * width * n_anchors, BOX_CODE_SIZE)
        )
        return logits, residuals


class SdrHead(Module):
    """Blocks, cross-scale branches, sparse/dense fusion and detection heads."""

    def __init__(
        self,
        in_channels: int,
        n_anchors: int,
        rng: np.random.Generator,
        block_channels: Sequence[int] = (64, 128, 256),
        convs_per_block: int = 4,
        branch_channels: int = 128,
        branch_convs: int = 2,
        fused_channels: int = 128,
        variant: str = "sdr",
    ):
        super().__init__()
        if variant not in HEAD_VARIANTS:
            raise ConfigurationError(f"head variant must be one of {HEAD_VARIANTS}, got '{variant}'")
        if len(block_channels) != 3:
            raise ConfigurationError(f"three block widths are required, got {tuple(block_channels)}")
        self.variant = variant
        self.in_channels = in_channels
        c1, c2, c3 = block_channels

        self.blocks: List[List[ConvBnRelu]] = []
        previous = in_channels
        for channels in block_channels:
            block = [ConvBnRelu(previous, channels, rng, stride=2)]
            block += [ConvBnRelu(channels, channels, rng) for _ in range(convs_per_block - 1)]
            self.blocks.append(block)
            previous = channels

        if variant == "sr":
            branch_inputs = (c1, c2, c3)
        else:
            branch_inputs = (c1 + c2, c2 + c3, c3)
        self.branches: List[List[ConvBnRelu]] = []
        for width in branch_inputs:
            branch = [ConvBnRelu(width, branch_channels, rng)]
            branch += [ConvBnRelu(branch_channels, branch_channels, rng) for _ in range(branch_convs - 1)]
            self.branches.append(branch)

        self.align = (
            [Conv2d(channels, branch_channels, 1, rng, bias=False) for channels in block_channels]
            if variant != "dr"
            else []
        )
        self.fuse = ConvBnRelu(3 * branch_channels, fused_channels, rng)
        self.cls_head = Conv2d(fused_channels, n_anchors, 1, rng)
        self.reg_head = Conv2d(fused_channels, BOX_CODE_SIZE * n_anchors, 1, rng)

    # ------------------------------------------------------------------ stages

    def blocks_forward(self, x: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
        outputs = []
        for block in self.blocks:
            for layer in block:
                x = layer(x)
            outputs.append(x)
        return outputs[0], outputs[1], outputs[2]

    def cross_scale_fuse(self, b1: Tensor, b2: Tensor, b3: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
        if self.variant == "sr":
            inputs = (b1, b2, b3)
        else:
            inputs = (F.concat([b1, F.upsample2x(b2)], axis=1), F.concat([b2, F.upsample2x(b3)], axis=1), b3)
        target = b1.shape[-2:]
        outputs = []
        for index, (x, branch) in enumerate(zip(inputs, self.branches)):
            for layer in branch:
                x = layer(x)
            x = F.upsample_nearest(x, 2 ** index)
            if x.shape[-2:] != target:
                raise DimensionError(f"branch {index + 1} output {x.shape[-2:]} does not match b1 {target}")
            outputs.append(x)
        return outputs[0], outputs[1], outputs[2]

    def sparse_dense_merge(self, blocks: Sequence[Tensor], branches: Sequence[Tensor]) -> Tensor:
        merged = []
        for index, feature in enumerate(branches):
            if self.align:
                aligned = F.upsample_nearest(self.align[index](blocks[index]), 2 ** index)
                if aligned.shape != feature.shape:
                    raise DimensionError(f"aligned b{index + 1} {aligned.shape} does not match F{index + 1} {feature.shape}")
                feature = feature + aligned
            merged.append(feature)
        return self.fuse(F.concat(merged, axis=1))

    def detection_heads(self, fused: Tensor) -> HeadOutput:
        return HeadOutput(cls_map=self.cls_head(fused), reg_map=self.reg_head(fused))

    def forward(self, x: Tensor) -> HeadOutput:
        """
        Args:
            x: BEV features [B x C x H x W] (or a single [C x H x W] map), H and W divisible by 8
        """
        if x.ndim == 3:
            x = x.reshape((1,) + x.shape)
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise DimensionError(f"expected B x {self.in_channels} x H x W input, got {x.shape}")
        if x.shape[2] % 8 or x.shape[3] % 8:
            raise ConfigurationError(f"BEV extent {x.shape[2]}x{x.shape[3]} is not divisible by 8")
        b1, b2, b3 = self.blocks_forward(x)
        f1, f2, f3 = self.cross_scale_fuse(b1, b2, b3)
        fused = self.sparse_dense_merge((b1, b2, b3), (f1, f2, f3))
        return self.detection_heads(fused)
