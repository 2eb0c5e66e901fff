"""JSON experiment configuration: schemas, validation, defaults.

Every config document carries a `schema_version` field and rejects unknown
keys, so typos fail fast instead of silently running with defaults. The
only environment variable honored anywhere is LATENTGRID_SEED, which
overrides the seeds read from config files (useful for seed sweeps without
editing documents).

Document kinds:

- synth config: ground-truth graph + per-class sample counts + generator
  signature knobs. Consumed by `latentgrid synth` and `mc-dissim`.
- experiment config: model + trainer sections. Consumed by `train`,
  `mc-dissim`, and `hpsearch` (as the base the searched keys override).
- search space: mapping of searchable keys to distributions. Consumed by
  `hpsearch`.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .synth import CLASSES, GRAPH_GENERATORS, SynthConfig
from .train import TrainConfig

SCHEMA_VERSION = 1
SEED_ENV_VAR = "LATENTGRID_SEED"


def seed_override(seed: int) -> int:
    """Apply the LATENTGRID_SEED environment override, if set."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return seed
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")


def _check_schema_version(payload: dict, where: str) -> None:
    if "schema_version" not in payload:
        raise ConfigError(f"{where}: missing schema_version")
    version = payload["schema_version"]
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{where}: schema-version mismatch (file has {version!r}, "
            f"this build reads {SCHEMA_VERSION})"
        )


def _check_keys(payload: dict, allowed: set, where: str) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return payload


# ---------------------------------------------------------------------------
# synth config


def default_synth_config() -> dict:
    """Desk-scale dataset: 24 sensors, 4 classes, 400 windows per class."""
    return {
        "schema_version": SCHEMA_VERSION,
        "graph": {
            "n_nodes": 24,
            "target_edges": 36,
            "seed": 7,
            "generator": "random_sparse",
        },
        "counts": {label: 400 for label in CLASSES},
        "seed": 11,
        "signature": {},
    }


def parse_synth_config(payload: dict, where: str = "synth config") -> dict:
    """Validate and normalize; returns {graph kwargs, counts, seed, SynthConfig}."""
    _check_schema_version(payload, where)
    _check_keys(
        payload, {"schema_version", "graph", "counts", "seed", "signature"}, where
    )
    merged = default_synth_config()
    graph = dict(merged["graph"])
    graph.update(payload.get("graph", {}))
    _check_keys(
        graph, {"n_nodes", "target_edges", "seed", "generator"}, f"{where}.graph"
    )
    if graph["generator"] not in GRAPH_GENERATORS:
        raise ConfigError(
            f"{where}.graph.generator must be one of {GRAPH_GENERATORS}, "
            f"got {graph['generator']!r}"
        )

    counts = payload.get("counts", merged["counts"])
    if not isinstance(counts, dict) or not counts:
        raise ConfigError(f"{where}.counts must be a non-empty object")
    for label, count in counts.items():
        if label not in CLASSES:
            raise ConfigError(f"{where}.counts: unknown class {label!r}")
        if not isinstance(count, int) or count < 0:
            raise ConfigError(f"{where}.counts[{label}]: need a count >= 0")

    signature = payload.get("signature", {})
    known = set(SynthConfig.__dataclass_fields__)
    _check_keys(signature, known, f"{where}.signature")
    synth = SynthConfig(**signature)

    seed = payload.get("seed", merged["seed"])
    if not isinstance(seed, int):
        raise ConfigError(f"{where}.seed must be an integer")

    return {
        "graph": graph,
        "counts": dict(counts),
        "seed": seed_override(seed),
        "synth": synth,
    }


# ---------------------------------------------------------------------------
# experiment config (model + trainer)


def default_experiment_config() -> dict:
    """Desk-scale widths: trains to the acceptance bar in minutes on a CPU.

    The class defaults of ModelConfig keep the published architecture
    widths (hidden 256) for shape fidelity; experiments default to the
    smaller widths here so the end-to-end task fits a commodity-CPU budget.
    """
    return {
        "schema_version": SCHEMA_VERSION,
        "model": {
            "n_nodes": 24,
            "encoder_hidden": 32,
            "classifier_hidden": 32,
            "feat_channels": 16,
            "variant": "full",
        },
        "train": {},
    }


def parse_experiment_config(payload: dict, where: str = "experiment config"):
    """Validate; returns (ModelConfig, TrainConfig)."""
    _check_schema_version(payload, where)
    _check_keys(payload, {"schema_version", "model", "train"}, where)
    model_section = payload.get("model", {})
    if "n_nodes" not in model_section:
        raise ConfigError(f"{where}.model: n_nodes is required")
    model = ModelConfig.from_dict(model_section)
    train = TrainConfig.from_dict(payload.get("train", {}))
    train.seed = seed_override(train.seed)
    return model, train


# ---------------------------------------------------------------------------
# hyperparameter search space


def parse_search_space(payload: dict, where: str = "search space"):
    """Validate; returns (space dict, budget, seed)."""
    _check_schema_version(payload, where)
    _check_keys(payload, {"schema_version", "space", "budget", "seed"}, where)
    space = payload.get("space")
    if not isinstance(space, dict) or not space:
        raise ConfigError(f"{where}.space must be a non-empty object")
    budget = payload.get("budget", 10)
    if not isinstance(budget, int) or budget < 1:
        raise ConfigError(f"{where}.budget must be a positive integer")
    seed = payload.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"{where}.seed must be an integer")
    return space, budget, seed_override(seed)


def write_config(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
