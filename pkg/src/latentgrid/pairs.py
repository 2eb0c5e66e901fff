"""Ordered node-pair indexing shared by the encoder and classifier.

All N(N-1) ordered pairs (i, j), i != j, in lexicographic order. The
node-to-edge operation concatenates the endpoint features of every pair;
the edge-to-node operation sums, for each node j, the rows of all incoming
pairs (i, j). Gather indices and their scatter inverses are precomputed
once so both directions stay O(B*E*H) with vectorized numpy.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .tensor import Tensor


class PairIndex:
    def __init__(self, n_nodes: int):
        if n_nodes < 2:
            raise ShapeError(f"need at least 2 nodes for pairs, got {n_nodes}")
        self.n_nodes = n_nodes
        pairs = [(i, j) for i in range(n_nodes) for j in range(n_nodes) if i != j]
        self.pairs = pairs
        self.n_pairs = len(pairs)
        self.src = np.array([p[0] for p in pairs], dtype=np.int64)
        self.dst = np.array([p[1] for p in pairs], dtype=np.int64)
        # Row positions feeding each node, used as scatter inverses.
        self.src_groups = np.stack(
            [np.flatnonzero(self.src == i) for i in range(n_nodes)]
        )
        self.dst_groups = np.stack(
            [np.flatnonzero(self.dst == j) for j in range(n_nodes)]
        )
        # Rows sorted by destination form a permutation of range(E).
        self.dst_order = self.dst_groups.reshape(-1)
        self.dst_order_inv = np.argsort(self.dst_order)

    def row_of(self, i: int, j: int) -> int:
        """Row index of ordered pair (i, j)."""
        if i == j or not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
            raise ShapeError(f"invalid ordered pair ({i}, {j})")
        return i * (self.n_nodes - 1) + (j if j < i else j - 1)

    def induced_row_permutation(self, node_perm: np.ndarray) -> np.ndarray:
        """Row map under a node relabeling: out[row(i,j)] = row(p[i], p[j])."""
        p = np.asarray(node_perm)
        return np.array(
            [self.row_of(int(p[i]), int(p[j])) for i, j in self.pairs], dtype=np.int64
        )

    def node_to_edge(self, node_feats: Tensor) -> Tensor:
        """(B, N, H) -> (B, E, 2H); row for pair (i, j) = concat(feat_i, feat_j)."""
        if node_feats.shape[1] != self.n_nodes:
            raise ShapeError(
                f"expected {self.n_nodes} nodes on axis 1, got {node_feats.shape}"
            )
        head = T.gather_rows(node_feats, self.src, inverse=("groups", self.src_groups))
        tail = T.gather_rows(node_feats, self.dst, inverse=("groups", self.dst_groups))
        return T.concat([head, tail], axis=-1)

    def edge_to_node(self, edge_feats: Tensor) -> Tensor:
        """(B, E, H) -> (B, N, H); node j's row = sum over incoming pairs (i, j)."""
        b = edge_feats.shape[0]
        if edge_feats.shape[1] != self.n_pairs:
            raise ShapeError(
                f"expected {self.n_pairs} pair rows on axis 1, got {edge_feats.shape}"
            )
        ordered = T.gather_rows(edge_feats, self.dst_order, inverse=("perm", self.dst_order_inv))
        grouped = ordered.reshape(b, self.n_nodes, self.n_nodes - 1, *edge_feats.shape[2:])
        return grouped.sum(axis=2)
