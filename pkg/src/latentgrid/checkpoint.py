"""Parameter checkpoint format: JSON manifest + little-endian raw values.

File layout (documented in README):

    bytes 0..3    magic b"LGC1"
    bytes 4..7    uint32 little-endian, manifest length in bytes
    manifest      UTF-8 JSON: {"schema_version": 1,
                               "meta": {...caller-provided...},
                               "params": [{"name", "shape", "dtype",
                                           "offset", "nbytes"}, ...]}
    data blob     raw little-endian values, offsets relative to blob start

Round-trips values bit-exactly at their stored precision.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError
from .nn import Module

MAGIC = b"LGC1"
SCHEMA_VERSION = 1

_DTYPES = {"float32": "<f4", "float64": "<f8"}


def save_checkpoint(path, model: Module, meta: dict | None = None) -> None:
    """Write the model's full state: parameters and batch norm statistics."""
    entries = []
    blobs = []
    offset = 0
    for name, arr in sorted(model.state_arrays().items()):
        dtype = arr.dtype.name
        raw = arr.astype(_DTYPES[dtype]).tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": dtype,
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    manifest = {"schema_version": SCHEMA_VERSION, "meta": meta or {}, "params": entries}
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(manifest_bytes)))
        f.write(manifest_bytes)
        for raw in blobs:
            f.write(raw)


def read_checkpoint(path):
    """Return (meta, {name: ndarray}) without needing a model."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ConfigError(f"{path}: not a checkpoint file (bad magic)")
    (mlen,) = struct.unpack("<I", data[4:8])
    manifest = json.loads(data[8:8 + mlen].decode("utf-8"))
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint schema_version "
                          f"{manifest.get('schema_version')}")
    blob = data[8 + mlen:]
    params = {}
    for e in manifest["params"]:
        raw = blob[e["offset"]:e["offset"] + e["nbytes"]]
        arr = np.frombuffer(raw, dtype=_DTYPES[e["dtype"]]).reshape(e["shape"])
        params[e["name"]] = arr.astype(e["dtype"])
    return manifest["meta"], params


def load_checkpoint(path, model: Module) -> dict:
    """Load values into an existing model; returns the manifest meta."""
    meta, params = read_checkpoint(path)
    expected = model.state_arrays()
    missing = sorted(set(expected) - set(params))
    if missing:
        raise ConfigError(f"checkpoint missing entries {missing}")
    for name, arr in params.items():
        if name in expected and tuple(arr.shape) != tuple(expected[name].shape):
            raise ShapeError(
                f"entry {name}: checkpoint shape {arr.shape} != model "
                f"{expected[name].shape}"
            )
    model.load_state_arrays({k: params[k] for k in expected})
    return meta


def save_model(path, model, model_config, meta: dict | None = None) -> None:
    """Checkpoint with the model configuration embedded for later rebuild."""
    full_meta = dict(meta or {})
    full_meta["model_config"] = model_config.to_dict()
    save_checkpoint(path, model, full_meta)


def load_model(path):
    """Rebuild the model a checkpoint was saved from; returns (model, meta)."""
    from .model import ModelConfig, build_model

    meta, params = read_checkpoint(path)
    if "model_config" not in meta:
        raise ConfigError(f"{path}: checkpoint meta lacks model_config")
    config = ModelConfig.from_dict(meta["model_config"])
    model = build_model(config, seed=0)
    expected = model.state_arrays()
    missing = sorted(set(expected) - set(params))
    if missing:
        raise ConfigError(f"checkpoint missing entries {missing}")
    model.load_state_arrays({k: params[k] for k in expected})
    model.eval_mode()
    return model, meta
