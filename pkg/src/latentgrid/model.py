"""End-to-end event identifier.

Pipeline per batch (B, N, C, T):

1. encoder: flattened per-node windows -> edge-type logits (B, E, L)
2. sampler: logits -> multi-layer graph z (B, E, L)
3. extractor: multi-scale temporal features per node (B, N, F)
4. classifier: features gated by z -> class probabilities (B, K)

Training defaults to the reparameterized relaxed sampler so gradients
reach the encoder; evaluation defaults to hard thresholding at r. The
"nograph" variant drops the encoder and sampler entirely and classifies
with all-ones gates, which is the structure-free ablation.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .classifier import ClassifierConfig, GatedClassifier
from .encoder import EncoderConfig, RelationEncoder
from .errors import ConfigError, ParameterError
from .inception import BaselineCnn, BaselineCnnConfig, DilatedInception, InceptionConfig
from .nn import Module
from .sampler import SampledGraph, draw
from .tensor import Tensor

VARIANTS = ("full", "nograph")
EXTRACTORS = ("inception", "baseline_cnn")


@dataclass
class ModelConfig:
    n_nodes: int
    n_channels: int = 2
    window: int = 60
    n_classes: int = 4
    n_edge_types: int = 3
    encoder_hidden: int = 256
    classifier_hidden: int = 256
    variant: str = "full"
    extractor: str = "inception"
    dilations: tuple = (1, 2, 4, 8)
    kernel: int = 3
    feat_channels: int = 32
    pools: tuple = ((2, 2), (4, 4), (7, 7))
    baseline_pools: tuple = ((2, 2), (5, 5))
    dropout: float = 0.3
    batch_norm: bool = True
    sampler_mode: str = "gumbel_softmax"
    eval_mode_sampler: str = "deterministic_threshold"
    tau: float = 0.5
    r_threshold: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.extractor not in EXTRACTORS:
            raise ConfigError(
                f"extractor must be one of {EXTRACTORS}, got {self.extractor!r}"
            )
        self.dilations = tuple(self.dilations)
        self.pools = tuple(tuple(p) for p in self.pools)
        self.baseline_pools = tuple(tuple(p) for p in self.baseline_pools)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dilations"] = list(self.dilations)
        out["pools"] = [list(p) for p in self.pools]
        out["baseline_pools"] = [list(p) for p in self.baseline_pools]
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**payload)


@dataclass
class ModelOutput:
    probs: Tensor  # (B, K) softmax rows
    logits: Tensor  # (B, K) pre-softmax, for the loss
    edge_logits: Tensor = None  # (B, E, L)
    graph: SampledGraph = None


class EventIdentifier(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        if config.extractor == "inception":
            ext_cfg = InceptionConfig(
                in_channels=config.n_channels,
                input_length=config.window,
                dilations=config.dilations,
                kernel=config.kernel,
                channels=config.feat_channels,
                pools=config.pools,
                n_blocks=len(config.pools),
            )
            self.extractor = DilatedInception(ext_cfg, rng)
        else:
            ext_cfg = BaselineCnnConfig(
                in_channels=config.n_channels,
                input_length=config.window,
                channels=config.feat_channels,
                kernel=config.kernel,
                pools=config.baseline_pools,
            )
            self.extractor = BaselineCnn(ext_cfg, rng)

        if config.variant == "full":
            self.encoder = RelationEncoder(
                EncoderConfig(
                    n_nodes=config.n_nodes,
                    in_features=config.n_channels * config.window,
                    hidden=config.encoder_hidden,
                    n_edge_types=config.n_edge_types,
                    batch_norm=config.batch_norm,
                ),
                rng,
            )
        else:
            self.encoder = None

        self.classifier = GatedClassifier(
            ClassifierConfig(
                n_nodes=config.n_nodes,
                in_features=self.extractor.out_features,
                hidden=config.classifier_hidden,
                n_classes=config.n_classes,
                n_layers=config.n_edge_types,
                dropout=config.dropout,
                batch_norm=config.batch_norm,
            ),
            rng,
        )

    def forward(self, x, mode: str = None, tau: float = None, r: float = None,
                rng: np.random.Generator = None, trace: dict = None) -> ModelOutput:
        if not isinstance(x, Tensor):
            x = Tensor(x)
        if x.ndim != 4:
            raise ParameterError(f"expected (B, N, C, T) input, got shape {x.shape}")
        b, n, c, t = x.shape
        cfg = self.config
        if (n, c, t) != (cfg.n_nodes, cfg.n_channels, cfg.window):
            raise ParameterError(
                f"input (N, C, T)={(n, c, t)} does not match model "
                f"({cfg.n_nodes}, {cfg.n_channels}, {cfg.window})"
            )

        feats = self.extractor(x, trace=trace)

        if self.encoder is None:
            probs, logits = self.classifier.forward_nograph(feats, rng=rng, trace=trace)
            return ModelOutput(probs, logits)

        edge_logits = self.encoder(x.reshape(b, n, c * t), trace=trace)
        if mode is None:
            mode = cfg.sampler_mode if self.training else cfg.eval_mode_sampler
        graph = draw(
            edge_logits,
            mode,
            tau=cfg.tau if tau is None else tau,
            r=cfg.r_threshold if r is None else r,
            seed=rng if rng is not None else 0,
            straight_through=self.training,
        )
        probs, logits = self.classifier(feats, graph, rng=rng, trace=trace)
        return ModelOutput(probs, logits, edge_logits, graph)


def build_model(config: ModelConfig, seed: int = 0) -> EventIdentifier:
    return EventIdentifier(config, np.random.default_rng(seed))
