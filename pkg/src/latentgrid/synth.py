"""Synthetic multi-sensor event windows over a known interaction graph.

Each sample is an N x C x T window: C=2 channels per node (voltage magnitude
in per-unit and rate of change of frequency in Hz/s), T samples at a fixed
frame rate. An event starts at an epicenter node and propagates over the
graph: signature amplitude decays geometrically with shortest-path distance,
and frequency events additionally arrive later at distant nodes. That ties
class evidence to the graph so structure-aware models have something to find.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import ParameterError

CLASSES = ("frequency_event", "line_outage", "normal", "xfmr_outage")

GRAPH_GENERATORS = ("random_sparse", "ring_lattice_rewired")


def class_to_index() -> dict:
    """Canonical label -> integer mapping (alphabetical)."""
    return {label: i for i, label in enumerate(CLASSES)}


@dataclass(frozen=True)
class GroundTruthGraph:
    """Connected undirected simple graph the generator propagates events on."""

    n_nodes: int
    edges: frozenset
    generator: str
    seed: int

    def edge_list(self) -> list:
        return sorted(self.edges)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges)
        return g

    def distances_from(self, node: int) -> np.ndarray:
        """Shortest-path hop count from `node` to every node."""
        lengths = nx.single_source_shortest_path_length(self.to_networkx(), node)
        out = np.zeros(self.n_nodes, dtype=np.int64)
        for j, d in lengths.items():
            out[j] = d
        return out


@dataclass
class EventSample:
    """One labeled window: values (N, C, T), per-node/time quality flags."""

    values: np.ndarray
    label: str
    epicenter: int
    quality_flags: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        self.quality_flags = np.asarray(self.quality_flags, dtype=bool)
        if self.values.ndim != 3:
            raise ParameterError(f"values must be (N, C, T), got {self.values.shape}")
        n, _, t = self.values.shape
        if self.quality_flags.shape != (n, t):
            raise ParameterError(
                f"quality_flags must be (N, T)={n, t}, got {self.quality_flags.shape}"
            )
        if self.label not in CLASSES:
            raise ParameterError(f"unknown label {self.label!r}")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("values contain non-finite entries")


@dataclass
class SynthConfig:
    """Generator knobs. Signature magnitudes are in channel units."""

    window: int = 60
    fps: float = 30.0
    step_drop: float = 0.05
    osc_freq_hz: float = 1.5
    osc_damp_s: float = 0.4
    sag_depth: float = 0.08
    sag_duration_s: float = 0.5
    ramp_duration_s: float = 0.5
    rocof_peak: float = 0.02
    rocof_rise_s: float = 0.3
    rocof_fall_s: float = 0.5
    decay: float = 0.6
    delay_per_hop: int = 1
    onset_min_s: float = 0.25
    onset_max_s: float = 1.0
    noise_std: float = 0.02
    rocof_noise_scale: float = 0.25
    flag_rate: float = 0.0
    flag_run_max: int = 3


def generate_graph(
    n_nodes: int, target_edges: int, seed: int, generator: str = "random_sparse"
) -> GroundTruthGraph:
    """Connected undirected graph with exactly `target_edges` edges."""
    max_edges = n_nodes * (n_nodes - 1) // 2
    if not n_nodes - 1 <= target_edges <= max_edges:
        raise ParameterError(
            f"target_edges={target_edges} infeasible for n_nodes={n_nodes} "
            f"(need {n_nodes - 1}..{max_edges})"
        )
    if generator not in GRAPH_GENERATORS:
        raise ParameterError(f"unknown generator {generator!r}")
    rng = np.random.default_rng(seed)
    while True:
        if generator == "random_sparse":
            edges = _random_sparse(n_nodes, target_edges, rng)
        else:
            edges = _ring_lattice_rewired(n_nodes, target_edges, rng)
        g = nx.Graph(sorted(edges))
        g.add_nodes_from(range(n_nodes))
        if nx.is_connected(g):
            return GroundTruthGraph(n_nodes, frozenset(edges), generator, seed)


def _random_sparse(n: int, target: int, rng: np.random.Generator) -> set:
    """Uniform random spanning tree plus uniformly chosen extra edges."""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        other = order[rng.integers(0, k)]
        a, b = int(order[k]), int(other)
        edges.add((min(a, b), max(a, b)))
    spares = [
        (i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges
    ]
    picks = rng.choice(len(spares), size=target - len(edges), replace=False)
    for p in picks:
        edges.add(spares[int(p)])
    return edges


def _ring_lattice_rewired(n: int, target: int, rng: np.random.Generator) -> set:
    """Ring lattice with increasing chord offsets, then 10% random rewiring."""
    edges = set()
    offset = 1
    while len(edges) < target:
        added_any = False
        for i in range(n):
            a, b = i, (i + offset) % n
            if a == b:
                continue
            e = (min(a, b), max(a, b))
            if e not in edges:
                edges.add(e)
                added_any = True
                if len(edges) == target:
                    break
        if len(edges) == target:
            break
        if not added_any and offset > n:
            raise ParameterError("ring lattice cannot reach target edge count")
        offset += 1
    edge_list = sorted(edges)
    for e in edge_list:
        if rng.uniform() >= 0.1:
            continue
        candidates = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if (i, j) not in edges
        ]
        if not candidates:
            continue
        edges.discard(e)
        edges.add(candidates[int(rng.integers(0, len(candidates)))])
    return edges


def _time_axis(cfg: SynthConfig) -> np.ndarray:
    return np.arange(cfg.window) / cfg.fps


def _signature(
    label: str,
    distances: np.ndarray,
    onset_s: float,
    cfg: SynthConfig,
) -> np.ndarray:
    """Noise-free (N, 2, T) deviation from baseline for one event."""
    n = distances.shape[0]
    tsec = _time_axis(cfg)
    dev = np.zeros((n, 2, cfg.window))
    scale = cfg.decay ** distances.astype(np.float64)

    if label == "normal":
        return dev

    if label == "line_outage":
        rel = np.maximum(tsec - onset_s, 0.0)
        active = tsec >= onset_s
        osc = 0.5 * np.exp(-rel / cfg.osc_damp_s) * np.sin(
            2.0 * np.pi * cfg.osc_freq_hz * rel
        )
        profile = np.where(active, 1.0 + osc, 0.0)
        dev[:, 0, :] = -cfg.step_drop * scale[:, None] * profile[None, :]
        return dev

    if label == "xfmr_outage":
        rel = tsec - onset_s
        recovery = 1.0 - (rel - cfg.sag_duration_s) / cfg.ramp_duration_s
        profile = np.where(
            rel < 0.0,
            0.0,
            np.where(rel <= cfg.sag_duration_s, 1.0, np.clip(recovery, 0.0, 1.0)),
        )
        dev[:, 0, :] = -cfg.sag_depth * scale[:, None] * profile[None, :]
        return dev

    if label == "frequency_event":
        onset_per_node = onset_s + distances * cfg.delay_per_hop / cfg.fps
        rel = tsec[None, :] - onset_per_node[:, None]
        rising = rel / cfg.rocof_rise_s
        falling = 1.0 - (rel - cfg.rocof_rise_s) / cfg.rocof_fall_s
        profile = np.where(
            rel < 0.0,
            0.0,
            np.where(rel <= cfg.rocof_rise_s, rising, np.clip(falling, 0.0, 1.0)),
        )
        dev[:, 1, :] = cfg.rocof_peak * scale[:, None] * profile
        return dev

    raise ParameterError(f"unknown label {label!r}")


def generate_event(
    graph: GroundTruthGraph,
    label: str,
    seed: int,
    noise_std: float = None,
    config: SynthConfig = None,
) -> EventSample:
    """One labeled window; bit-identical under a fixed seed."""
    cfg = config if config is not None else SynthConfig()
    if noise_std is None:
        noise_std = cfg.noise_std
    if label not in CLASSES:
        raise ParameterError(f"unknown label {label!r}")
    rng = np.random.default_rng(seed)
    n, t = graph.n_nodes, cfg.window

    epicenter = int(rng.integers(0, n))
    onset_s = float(rng.uniform(cfg.onset_min_s, cfg.onset_max_s))
    distances = graph.distances_from(epicenter)

    values = np.zeros((n, 2, t))
    values[:, 0, :] = 1.0
    values += _signature(label, distances, onset_s, cfg)
    if noise_std > 0:
        noise = rng.normal(0.0, noise_std, size=(n, 2, t))
        # the channels are different instruments in different units, so
        # their noise floors differ by a configurable ratio
        noise[:, 1, :] *= cfg.rocof_noise_scale
        values += noise

    flags = np.zeros((n, t), dtype=bool)
    if cfg.flag_rate > 0:
        for i in range(n):
            if rng.uniform() >= cfg.flag_rate:
                continue
            run = int(rng.integers(1, cfg.flag_run_max + 1))
            start = int(rng.integers(0, t - run + 1))
            flags[i, start : start + run] = True
            values[i, :, start : start + run] = 0.0

    return EventSample(values.astype(np.float32), label, epicenter, flags)


def generate_dataset(
    graph: GroundTruthGraph,
    counts: dict,
    seed: int,
    noise_std: float = None,
    config: SynthConfig = None,
) -> list:
    """Samples in label-sorted blocks, each from its own derived seed."""
    for label, count in counts.items():
        if label not in CLASSES:
            raise ParameterError(f"unknown label {label!r}")
        if count < 0:
            raise ParameterError(f"negative count for {label!r}")
    order = [label for label in sorted(counts) for _ in range(counts[label])]
    child_seeds = np.random.SeedSequence(seed).generate_state(
        max(len(order), 1), dtype=np.uint64
    )
    return [
        generate_event(graph, label, int(child_seeds[i]), noise_std, config)
        for i, label in enumerate(order)
    ]
