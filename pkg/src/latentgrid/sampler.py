"""Turn edge-type logits into a (relaxed or discrete) multi-layer graph.

Four strategies, all emitting z of shape (B, E, L) in [0, 1]:

- deterministic_threshold: per entry, 1 where sigmoid(logit) > r else 0,
  applied independently per layer channel. Optionally straight-through
  (hard forward, sigmoid backward) so it can sit inside training.
- gumbel_softmax: z = softmax((logits + g) / tau) with Gumbel(0,1) noise
  g = -log(-log(u)); a relaxed L-way one-hot per edge, reparameterized so
  gradients reach the logits.
- continuous: noise-free softmax(logits / tau).
- stochastic_hard: exact Gumbel-Max one-hot draw with straight-through
  gradients from the relaxed sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ParameterError
from .tensor import Tensor

MODES = ("deterministic_threshold", "gumbel_softmax", "continuous", "stochastic_hard")


@dataclass
class SampledGraph:
    z: Tensor  # (B, E, L), entries in [0, 1]
    mode: str
    tau: float = 0.5
    r_threshold: float = 0.5
    seed: int = None


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _seed_repr(seed):
    return None if isinstance(seed, np.random.Generator) else seed


def threshold_sample(logits: Tensor, r: float = 0.5, straight_through: bool = False) -> SampledGraph:
    """Hard 0/1 per entry: 1 iff sigmoid(logit) > r (strict)."""
    if not 0.0 < r < 1.0:
        raise ParameterError(f"threshold r must be in (0, 1), got {r}")
    sig = T.sigmoid(logits)
    hard = (sig.data > r).astype(sig.dtype)
    if straight_through:
        z = sig + Tensor(hard - sig.data)
    else:
        z = Tensor(hard)
    return SampledGraph(z, "deterministic_threshold", r_threshold=r)


def gumbel_softmax_sample(logits: Tensor, tau: float = 0.5, seed=0) -> SampledGraph:
    """Relaxed one-hot over the trailing layer axis, differentiable in logits."""
    if tau <= 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    rng = _as_rng(seed)
    g = rng.gumbel(size=logits.shape).astype(logits.dtype)
    z = T.softmax((logits + Tensor(g)) * (1.0 / tau), axis=-1)
    return SampledGraph(z, "gumbel_softmax", tau=tau, seed=_seed_repr(seed))


def continuous_sample(logits: Tensor, tau: float = 0.5) -> SampledGraph:
    """Noise-free relaxation: softmax(logits / tau)."""
    if tau <= 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    z = T.softmax(logits * (1.0 / tau), axis=-1)
    return SampledGraph(z, "continuous", tau=tau)


def stochastic_hard_sample(logits: Tensor, tau: float = 0.5, seed=0) -> SampledGraph:
    """Exact Gumbel-Max one-hot forward, relaxed straight-through backward."""
    if tau <= 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    rng = _as_rng(seed)
    g = rng.gumbel(size=logits.shape).astype(logits.dtype)
    soft = T.softmax((logits + Tensor(g)) * (1.0 / tau), axis=-1)
    winners = np.argmax(logits.data + g, axis=-1)
    hard = np.zeros_like(soft.data)
    np.put_along_axis(hard, winners[..., None], 1.0, axis=-1)
    z = soft + Tensor(hard - soft.data)
    return SampledGraph(z, "stochastic_hard", tau=tau, seed=_seed_repr(seed))


def draw(logits: Tensor, mode: str, tau: float = 0.5, r: float = 0.5,
         seed=0, straight_through: bool = False) -> SampledGraph:
    """Dispatch by mode name."""
    if mode == "deterministic_threshold":
        return threshold_sample(logits, r, straight_through=straight_through)
    if mode == "gumbel_softmax":
        return gumbel_softmax_sample(logits, tau, seed)
    if mode == "continuous":
        return continuous_sample(logits, tau)
    if mode == "stochastic_hard":
        return stochastic_hard_sample(logits, tau, seed)
    raise ParameterError(f"unknown sampler mode {mode!r}; choose from {MODES}")


def edge_rows(z_values: np.ndarray, pair_index) -> list:
    """Flatten one sample's (E, L) weights to (src, dst, layer, weight) rows."""
    e, l = z_values.shape
    if e != pair_index.n_pairs:
        raise ParameterError(
            f"z has {e} edge rows but the index expects {pair_index.n_pairs}"
        )
    rows = []
    for row in range(e):
        i, j = pair_index.pairs[row]
        for layer in range(l):
            rows.append((i, j, layer, float(z_values[row, layer])))
    return rows
