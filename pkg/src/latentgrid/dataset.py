"""Directory-based dataset storage.

A dataset is one directory containing:

- ``manifest.json``: schema version, dimensions, class map, ground-truth
  graph edge list, and generation seeds.
- ``sample_%06d.bin``: one file per sample, little-endian 32-bit floats,
  N x C x T row-major.
- ``labels.csv``: ``sample_id,label,epicenter`` rows.
- ``flags_%06d.bin``: per-sample quality flags (uint8, N x T row-major),
  present only when the manifest says so.

Preprocessing later adds ``splits.json`` and ``standardization.json``
alongside; this module only reads and writes the raw records.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError
from .synth import CLASSES, EventSample, GroundTruthGraph, class_to_index

SCHEMA_VERSION = 1
DATASET_KIND = "latentgrid-dataset"
SAMPLE_PATTERN = "sample_%06d.bin"
FLAGS_PATTERN = "flags_%06d.bin"


@dataclass
class Dataset:
    """In-memory view of a dataset directory."""

    values: np.ndarray  # (S, N, C, T) float32
    labels: np.ndarray  # (S,) int64, indices into class_map
    epicenters: np.ndarray  # (S,) int64
    flags: np.ndarray  # (S, N, T) bool
    class_map: dict
    manifest: dict

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    @property
    def window(self) -> int:
        return self.values.shape[3]

    def label_names(self) -> list:
        inverse = {i: name for name, i in self.class_map.items()}
        return [inverse[i] for i in sorted(inverse)]


def graph_from_manifest(manifest: dict) -> GroundTruthGraph:
    g = manifest["graph"]
    edges = frozenset((int(a), int(b)) for a, b in g["edges"])
    return GroundTruthGraph(int(g["n_nodes"]), edges, g["generator"], int(g["seed"]))


def save_dataset(
    path,
    samples: list,
    graph: GroundTruthGraph,
    seed: int,
    noise_std: float,
    extra_meta: dict = None,
) -> dict:
    """Write samples plus manifest to `path`; returns the manifest."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not samples:
        raise ConfigError("refusing to save an empty dataset")
    n, c, t = samples[0].values.shape
    has_flags = any(s.quality_flags.any() for s in samples)
    counts = {label: 0 for label in CLASSES}
    for s in samples:
        counts[s.label] += 1

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": DATASET_KIND,
        "n_samples": len(samples),
        "n_nodes": n,
        "n_channels": c,
        "window": t,
        "classes": class_to_index(),
        "counts": {k: v for k, v in counts.items() if v},
        "graph": {
            "n_nodes": graph.n_nodes,
            "generator": graph.generator,
            "seed": graph.seed,
            "edges": [list(e) for e in graph.edge_list()],
        },
        "seed": seed,
        "noise_std": noise_std,
        "has_flags": has_flags,
    }
    if extra_meta:
        manifest.update(extra_meta)

    with open(path / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(path / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "label", "epicenter"])
        for i, s in enumerate(samples):
            writer.writerow([i, s.label, s.epicenter])
    for i, s in enumerate(samples):
        if s.values.shape != (n, c, t):
            raise ShapeError(f"sample {i} has shape {s.values.shape}, expected {(n, c, t)}")
        with open(path / (SAMPLE_PATTERN % i), "wb") as fh:
            fh.write(np.ascontiguousarray(s.values, dtype="<f4").tobytes())
        if has_flags:
            with open(path / (FLAGS_PATTERN % i), "wb") as fh:
                fh.write(np.ascontiguousarray(s.quality_flags, dtype=np.uint8).tobytes())
    return manifest


def load_manifest(path) -> dict:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json in {path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != DATASET_KIND:
        raise ConfigError(f"{manifest_path} is not a dataset manifest")
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported dataset schema_version {manifest.get('schema_version')!r}"
        )
    return manifest


def load_dataset(path) -> Dataset:
    """Read a dataset directory back into memory."""
    path = Path(path)
    manifest = load_manifest(path)
    s = int(manifest["n_samples"])
    n, c, t = int(manifest["n_nodes"]), int(manifest["n_channels"]), int(manifest["window"])
    class_map = {k: int(v) for k, v in manifest["classes"].items()}

    labels = np.zeros(s, dtype=np.int64)
    epicenters = np.zeros(s, dtype=np.int64)
    seen = np.zeros(s, dtype=bool)
    with open(path / "labels.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            i = int(row["sample_id"])
            if not 0 <= i < s:
                raise ConfigError(f"labels.csv sample_id {i} out of range")
            if row["label"] not in class_map:
                raise ConfigError(f"labels.csv has unknown label {row['label']!r}")
            labels[i] = class_map[row["label"]]
            epicenters[i] = int(row["epicenter"])
            seen[i] = True
    if not seen.all():
        raise ConfigError("labels.csv does not cover every sample")

    values = np.zeros((s, n, c, t), dtype=np.float32)
    flags = np.zeros((s, n, t), dtype=bool)
    expected_bytes = n * c * t * 4
    for i in range(s):
        raw = (path / (SAMPLE_PATTERN % i)).read_bytes()
        if len(raw) != expected_bytes:
            raise ShapeError(
                f"{SAMPLE_PATTERN % i}: {len(raw)} bytes, expected {expected_bytes}"
            )
        values[i] = np.frombuffer(raw, dtype="<f4").reshape(n, c, t)
        if manifest.get("has_flags"):
            fraw = (path / (FLAGS_PATTERN % i)).read_bytes()
            if len(fraw) != n * t:
                raise ShapeError(f"{FLAGS_PATTERN % i}: {len(fraw)} bytes, expected {n * t}")
            flags[i] = np.frombuffer(fraw, dtype=np.uint8).reshape(n, t).astype(bool)

    return Dataset(values, labels, epicenters, flags, class_map, manifest)


def sample_at(ds: Dataset, i: int) -> EventSample:
    """Materialize one row of a Dataset as an EventSample."""
    inverse = {v: k for k, v in ds.class_map.items()}
    return EventSample(
        ds.values[i], inverse[int(ds.labels[i])], int(ds.epicenters[i]), ds.flags[i]
    )
