"""Relation encoder: per-event edge-type logits over all ordered pairs.

Four message-passing steps with shared 2-layer MLPs, alternating between
node and edge representations:

    node embed    v1 = f1(x_i)
    edge hidden   h1_{ij} = fe1(concat(v1_i, v1_j))
    node update   v2_j = fn1(sum_i h1_{ij})
    edge hidden   h2_{ij} = fe2(concat(v2_i, v2_j))

followed by a linear map from h2 to one logit per edge type. Weight
sharing across nodes and pairs makes the whole map permutation
equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError
from .nn import Linear, MLP2, Module
from .pairs import PairIndex
from .tensor import Tensor


@dataclass
class EncoderConfig:
    n_nodes: int
    in_features: int
    hidden: int = 256
    n_edge_types: int = 3
    batch_norm: bool = True

    def __post_init__(self):
        if self.n_edge_types < 1:
            raise ParameterError(f"n_edge_types must be >= 1, got {self.n_edge_types}")
        if self.hidden < 1:
            raise ParameterError(f"hidden must be >= 1, got {self.hidden}")
        if self.n_nodes < 2:
            raise ParameterError(f"n_nodes must be >= 2, got {self.n_nodes}")


class RelationEncoder(Module):
    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.pairs = PairIndex(config.n_nodes)
        h, bn = config.hidden, config.batch_norm
        self.f1 = MLP2(config.in_features, h, h, rng, batch_norm=bn)
        self.fe1 = MLP2(2 * h, h, h, rng, batch_norm=bn)
        self.fn1 = MLP2(h, h, h, rng, batch_norm=bn)
        self.fe2 = MLP2(2 * h, h, h, rng, batch_norm=bn)
        self.out = Linear(h, config.n_edge_types, rng)

    def forward(self, x: Tensor, trace: dict = None) -> Tensor:
        """(B, N, in_features) -> edge-type logits (B, E, n_edge_types)."""
        if np.isnan(x.data).any():
            raise ContractError("encoder input contains NaN")
        v1 = self.f1(x)
        h1 = self.fe1(self.pairs.node_to_edge(v1))
        v2 = self.fn1(self.pairs.edge_to_node(h1))
        h2 = self.fe2(self.pairs.node_to_edge(v2))
        logits = self.out(h2)
        if trace is not None:
            trace["encoder.node_embed"] = v1.shape
            trace["encoder.edge_hidden"] = h1.shape
            trace["encoder.node_update"] = v2.shape
            trace["encoder.edge_hidden2"] = h2.shape
            trace["encoder.logits"] = logits.shape
        return logits
