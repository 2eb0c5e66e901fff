"""Cleaning, standardization, and split assignment for event datasets.

Cleaning interpolates short flagged runs and rejects samples with longer
ones. Standardization is a per-channel affine map whose statistics come
from the training split only. Both are pure functions; `run_preprocess`
persists the split assignment and statistics next to the raw records so
that training and evaluation reconstruct identical inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, load_dataset
from .errors import ConfigError, ParameterError
from .synth import EventSample

SPLITS_SCHEMA_VERSION = 1
STATS_SCHEMA_VERSION = 1
DEFAULT_MAX_GAP = 5
DEFAULT_RATIOS = (0.70, 0.15, 0.15)


@dataclass
class Excluded:
    """Verdict for a sample rejected by cleaning."""

    node: int
    run_length: int
    sample_id: int = -1


@dataclass
class Standardization:
    """Per-channel affine transform fitted on the training split."""

    mean: np.ndarray  # (C,)
    std: np.ndarray  # (C,)

    def apply(self, values: np.ndarray) -> np.ndarray:
        shape = self._broadcast_shape(values)
        return (values - self.mean.reshape(shape)) / self.std.reshape(shape)

    def invert(self, values: np.ndarray) -> np.ndarray:
        shape = self._broadcast_shape(values)
        return values * self.std.reshape(shape) + self.mean.reshape(shape)

    def _broadcast_shape(self, values: np.ndarray) -> tuple:
        # Channel axis is the second-to-last: (..., C, T).
        if values.ndim < 2 or values.shape[-2] != self.mean.shape[0]:
            raise ParameterError(
                f"expected channel axis of size {self.mean.shape[0]} "
                f"second-to-last, got shape {values.shape}"
            )
        return (1,) * (values.ndim - 2) + (self.mean.shape[0], 1)

    def to_json(self) -> dict:
        return {
            "schema_version": STATS_SCHEMA_VERSION,
            "mean": [float(m) for m in self.mean],
            "std": [float(s) for s in self.std],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "Standardization":
        if payload.get("schema_version") != STATS_SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported standardization schema_version "
                f"{payload.get('schema_version')!r}"
            )
        return cls(np.asarray(payload["mean"], float), np.asarray(payload["std"], float))


def _flag_runs(flags_row: np.ndarray) -> list:
    """(start, length) for each maximal run of True in a 1-D bool array."""
    runs = []
    start = None
    for i, f in enumerate(flags_row):
        if f and start is None:
            start = i
        elif not f and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, len(flags_row) - start))
    return runs


def clean_values(values: np.ndarray, flags: np.ndarray, max_gap: int):
    """Interpolate short flagged runs; (cleaned, None) or (None, Excluded).

    Flagged runs of length <= max_gap are linearly interpolated per node and
    channel; runs at either window edge are held at the nearest valid value.
    A longer run, or a node with every point flagged, yields an Excluded
    verdict naming the node and run length. Unflagged points never change.
    """
    if max_gap < 0:
        raise ParameterError(f"max_gap must be >= 0, got {max_gap}")
    n, _, t = values.shape
    if flags.shape != (n, t):
        raise ParameterError(f"flags must be (N, T)={n, t}, got {flags.shape}")
    if not flags.any():
        return values, None

    out = values.astype(np.float64, copy=True)
    for node in range(n):
        row = flags[node]
        if not row.any():
            continue
        if row.all():
            return None, Excluded(node=node, run_length=t)
        runs = _flag_runs(row)
        worst = max(length for _, length in runs)
        if worst > max_gap:
            return None, Excluded(node=node, run_length=worst)
        valid = np.flatnonzero(~row)
        bad = np.flatnonzero(row)
        for ch in range(values.shape[1]):
            out[node, ch, bad] = np.interp(bad, valid, out[node, ch, valid])
    return out.astype(values.dtype), None


def clean(sample: EventSample, max_gap: int = DEFAULT_MAX_GAP):
    """EventSample form of clean_values; returns EventSample or Excluded."""
    cleaned, verdict = clean_values(sample.values, sample.quality_flags, max_gap)
    if verdict is not None:
        return verdict
    return EventSample(
        cleaned,
        sample.label,
        sample.epicenter,
        np.zeros_like(sample.quality_flags),
    )


def fit_standardization(train_values: np.ndarray) -> Standardization:
    """Per-channel mean/std over a (S, N, C, T) training array."""
    if train_values.ndim != 4:
        raise ParameterError(f"expected (S, N, C, T), got {train_values.shape}")
    axes = (0, 1, 3)
    mean = train_values.mean(axis=axes, dtype=np.float64)
    std = train_values.std(axis=axes, dtype=np.float64)
    if np.any(std < 1e-12):
        bad = int(np.argmin(std))
        raise ParameterError(f"channel {bad} has zero variance on the training set")
    return Standardization(mean, std)


def standardize(values: np.ndarray, stats: Standardization = None):
    """(standardized values, stats); fits stats on `values` when not given."""
    if stats is None:
        stats = fit_standardization(values)
    return stats.apply(values), stats


def split_indices(labels: np.ndarray, seed: int, ratios=DEFAULT_RATIOS):
    """Stratified disjoint (train, val, test) index arrays."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ParameterError(f"ratios must be three values summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for cls in np.unique(labels):
        ids = np.flatnonzero(labels == cls)
        rng.shuffle(ids)
        n = len(ids)
        n_val = int(round(ratios[1] * n))
        n_test = int(round(ratios[2] * n))
        n_train = n - n_val - n_test
        if min(n_train, n_val, n_test) < 1:
            raise ParameterError(f"class {cls} has too few samples ({n}) to split")
        train.extend(ids[:n_train])
        val.extend(ids[n_train : n_train + n_val])
        test.extend(ids[n_train + n_val :])
    return (
        np.sort(np.asarray(train, dtype=np.int64)),
        np.sort(np.asarray(val, dtype=np.int64)),
        np.sort(np.asarray(test, dtype=np.int64)),
    )


def run_preprocess(
    path,
    max_gap: int = DEFAULT_MAX_GAP,
    seed: int = 0,
    ratios=DEFAULT_RATIOS,
) -> dict:
    """Clean, split, and fit statistics; writes splits.json and
    standardization.json into the dataset directory. Returns a summary."""
    path = Path(path)
    ds = load_dataset(path)

    excluded = []
    kept = []
    for i in range(len(ds)):
        cleaned, verdict = clean_values(ds.values[i], ds.flags[i], max_gap)
        if verdict is not None:
            verdict.sample_id = i
            excluded.append(verdict)
        else:
            ds.values[i] = cleaned
            kept.append(i)
    kept = np.asarray(kept, dtype=np.int64)
    if kept.size == 0:
        raise ConfigError("every sample was excluded by cleaning")

    tr, va, te = split_indices(ds.labels[kept], seed, ratios)
    train_ids, val_ids, test_ids = kept[tr], kept[va], kept[te]
    stats = fit_standardization(ds.values[train_ids])

    splits = {
        "schema_version": SPLITS_SCHEMA_VERSION,
        "seed": seed,
        "max_gap": max_gap,
        "ratios": list(ratios),
        "train": [int(i) for i in train_ids],
        "val": [int(i) for i in val_ids],
        "test": [int(i) for i in test_ids],
        "excluded": [
            {"sample_id": e.sample_id, "node": e.node, "run_length": e.run_length}
            for e in excluded
        ],
    }
    with open(path / "splits.json", "w") as fh:
        json.dump(splits, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(path / "standardization.json", "w") as fh:
        json.dump(stats.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {
        "n_excluded": len(excluded),
        "n_train": len(train_ids),
        "n_val": len(val_ids),
        "n_test": len(test_ids),
        "mean": stats.mean.tolist(),
        "std": stats.std.tolist(),
    }


@dataclass
class PreparedData:
    """Cleaned, standardized arrays keyed by split, ready for training."""

    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    stats: Standardization
    class_map: dict
    splits: dict
    dataset: Dataset

    def split(self, name: str):
        return {
            "train": (self.train_x, self.train_y),
            "val": (self.val_x, self.val_y),
            "test": (self.test_x, self.test_y),
        }[name]


def load_prepared(path) -> PreparedData:
    """Reconstruct the exact training inputs from a preprocessed directory."""
    path = Path(path)
    splits_path = path / "splits.json"
    stats_path = path / "standardization.json"
    if not splits_path.exists() or not stats_path.exists():
        raise ConfigError(
            f"{path} is not preprocessed (missing splits.json or standardization.json)"
        )
    with open(splits_path) as fh:
        splits = json.load(fh)
    if splits.get("schema_version") != SPLITS_SCHEMA_VERSION:
        raise ConfigError(f"unsupported splits schema_version {splits.get('schema_version')!r}")
    with open(stats_path) as fh:
        stats = Standardization.from_json(json.load(fh))

    ds = load_dataset(path)
    max_gap = int(splits["max_gap"])
    arrays = {}
    for name in ("train", "val", "test"):
        ids = np.asarray(splits[name], dtype=np.int64)
        block = np.zeros((len(ids),) + ds.values.shape[1:], dtype=np.float64)
        for k, i in enumerate(ids):
            cleaned, verdict = clean_values(ds.values[i], ds.flags[i], max_gap)
            if verdict is not None:
                raise ConfigError(
                    f"sample {i} in split {name!r} fails cleaning; splits.json is stale"
                )
            block[k] = cleaned
        arrays[name] = (stats.apply(block).astype(np.float32), ds.labels[ids])
    return PreparedData(
        arrays["train"][0],
        arrays["train"][1],
        arrays["val"][0],
        arrays["val"][1],
        arrays["test"][0],
        arrays["test"][1],
        stats,
        ds.class_map,
        splits,
        ds,
    )
