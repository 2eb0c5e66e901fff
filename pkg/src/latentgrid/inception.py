"""Multi-scale temporal feature extraction per node.

Stacked blocks, each holding parallel dilated convolutions at different
rates (same kernel, output channels split evenly), whose outputs are
concatenated, linearly mixed, passed through ELU, and max-pooled. Branch
inputs are zero-padded symmetrically so every branch keeps the input
length; the pools own all length reduction, realizing the default chain
60 -> 30 -> 7 -> 1. Nodes share weights: the node axis is folded into the
batch axis, so a (B, N, C, T) input runs as (B*N, C, T).

A plain convolution stack of the same interface (three convolutions, two
pools) serves as the single-scale comparison arm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, ParameterError
from .nn import Module, Parameter, glorot_uniform
from .tensor import Tensor


class Conv1d(Module):
    """Dilated 1-D convolution with bias; valid (no implicit padding)."""

    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 dilation: int = 1, stride: int = 1):
        super().__init__()
        fan_in, fan_out = c_in * kernel, c_out * kernel
        self.w = Parameter(glorot_uniform(rng, fan_in, fan_out, (c_out, c_in, kernel)))
        self.b = Parameter(np.zeros((c_out, 1), dtype=T.default_dtype()))
        self.dilation = dilation
        self.stride = stride

    def forward(self, x: Tensor) -> Tensor:
        return T.dilated_conv1d(x, self.w, self.dilation, self.stride) + self.b


@dataclass
class InceptionConfig:
    in_channels: int = 2
    input_length: int = 60
    n_blocks: int = 3
    dilations: tuple = (1, 2, 4, 8)
    kernel: int = 3
    channels: int = 32
    pools: tuple = ((2, 2), (4, 4), (7, 7))

    def __post_init__(self):
        if self.kernel % 2 != 1:
            raise ConfigError(f"kernel must be odd for same-length padding, got {self.kernel}")
        if self.channels % len(self.dilations) != 0:
            raise ConfigError(
                f"channels={self.channels} not divisible by "
                f"{len(self.dilations)} branches"
            )
        if len(self.pools) != self.n_blocks:
            raise ConfigError(
                f"need one pool per block: {self.n_blocks} blocks, "
                f"{len(self.pools)} pools"
            )
        if any(d < 1 for d in self.dilations):
            raise ConfigError(f"dilations must be >= 1, got {self.dilations}")

    def length_chain(self) -> list:
        """Per-block output lengths; raises ConfigError when a pool cannot fit."""
        length = self.input_length
        chain = []
        for window, stride in self.pools:
            if window > length:
                raise ConfigError(
                    f"pool window {window} exceeds current length {length} "
                    f"(chain so far {[self.input_length] + chain})"
                )
            length = (length - window) // stride + 1
            chain.append(length)
        return chain

    @property
    def out_features(self) -> int:
        return self.channels * self.length_chain()[-1]


class InceptionBlock(Module):
    def __init__(self, c_in: int, cfg: InceptionConfig, pool, rng: np.random.Generator):
        super().__init__()
        per_branch = cfg.channels // len(cfg.dilations)
        self.branches = [
            Conv1d(c_in, per_branch, cfg.kernel, rng, dilation=d)
            for d in cfg.dilations
        ]
        self.dilations = cfg.dilations
        self.kernel = cfg.kernel
        self.mix = Conv1d(cfg.channels, cfg.channels, 1, rng)
        self.pool = pool

    def forward(self, x: Tensor) -> Tensor:
        outs = []
        for conv, d in zip(self.branches, self.dilations):
            pad = d * (self.kernel - 1) // 2
            outs.append(conv(T.pad_last(x, pad, pad)))
        mixed = T.elu(self.mix(T.concat(outs, axis=1)))
        return T.max_pool1d(mixed, *self.pool)


class DilatedInception(Module):
    def __init__(self, config: InceptionConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        config.length_chain()  # validate at construction
        self.blocks = [
            InceptionBlock(
                config.in_channels if i == 0 else config.channels,
                config,
                config.pools[i],
                rng,
            )
            for i in range(config.n_blocks)
        ]

    @property
    def out_features(self) -> int:
        return self.config.out_features

    def forward(self, x: Tensor, trace: dict = None) -> Tensor:
        """(B, N, C, T) -> per-node features (B, N, F)."""
        b, n, c, t = x.shape
        if c != self.config.in_channels or t != self.config.input_length:
            raise ConfigError(
                f"input (C, T)={(c, t)} does not match configured "
                f"({self.config.in_channels}, {self.config.input_length})"
            )
        h = x.reshape(b * n, c, t)
        for i, block in enumerate(self.blocks):
            h = block(h)
            if trace is not None:
                trace[f"extractor.block{i + 1}"] = h.shape
        return h.reshape(b, n, h.shape[1] * h.shape[2])

    extract = forward


@dataclass
class BaselineCnnConfig:
    in_channels: int = 2
    input_length: int = 60
    channels: int = 32
    kernel: int = 3
    pools: tuple = ((2, 2), (5, 5))

    def __post_init__(self):
        if self.kernel % 2 != 1:
            raise ConfigError(f"kernel must be odd, got {self.kernel}")

    def final_conv_kernel(self) -> int:
        length = self.input_length
        for window, stride in self.pools:
            if window > length:
                raise ConfigError(f"pool window {window} exceeds length {length}")
            length = (length - window) // stride + 1
        return length

    @property
    def out_features(self) -> int:
        self.final_conv_kernel()
        return self.channels


class BaselineCnn(Module):
    """Three convolutions and two max-pools, dilation 1 throughout."""

    def __init__(self, config: BaselineCnnConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        k = config.kernel
        self.conv1 = Conv1d(config.in_channels, config.channels, k, rng)
        self.conv2 = Conv1d(config.channels, config.channels, k, rng)
        # Final convolution consumes the remaining length entirely.
        self.conv3 = Conv1d(config.channels, config.channels, config.final_conv_kernel(), rng)
        self.pools = config.pools
        self.kernel = k

    @property
    def out_features(self) -> int:
        return self.config.out_features

    def forward(self, x: Tensor, trace: dict = None) -> Tensor:
        b, n, c, t = x.shape
        if c != self.config.in_channels or t != self.config.input_length:
            raise ConfigError(
                f"input (C, T)={(c, t)} does not match configured "
                f"({self.config.in_channels}, {self.config.input_length})"
            )
        pad = (self.kernel - 1) // 2
        h = x.reshape(b * n, c, t)
        h = T.max_pool1d(T.elu(self.conv1(T.pad_last(h, pad, pad))), *self.pools[0])
        h = T.max_pool1d(T.elu(self.conv2(T.pad_last(h, pad, pad))), *self.pools[1])
        h = T.elu(self.conv3(h))
        if trace is not None:
            trace["extractor.final"] = h.shape
        return h.reshape(b, n, h.shape[1] * h.shape[2])

    extract = forward
