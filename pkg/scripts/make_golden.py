"""Regenerate the frozen CLI regression fixtures under tests/fixtures/golden.

Run from the repository root:

    python3 scripts/make_golden.py

The fixtures are the CLI's own deterministic outputs on a miniature task:
a dataset, a trained checkpoint, an eval report, and one zero-noise
normal-class sample. Tests compare fresh CLI runs byte-for-byte against
these files, so regenerate them only when an intentional change to file
formats or numerics invalidates the old ones, and commit the result.
"""

import json
import shutil
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from latentgrid.checkpoint import load_model  # noqa: E402
from latentgrid.cli import main  # noqa: E402
from latentgrid.config import SCHEMA_VERSION, write_config  # noqa: E402
from latentgrid.dataset import graph_from_manifest, load_manifest  # noqa: E402
from latentgrid.synth import CLASSES, SynthConfig, generate_event  # noqa: E402
from latentgrid.tensor import Tensor, no_grad  # noqa: E402

GOLDEN = ROOT / "tests" / "fixtures" / "golden"

N_NODES = 6
PER_CLASS = 32


def run(argv) -> None:
    code = main(argv)
    if code != 0:
        raise SystemExit(f"command failed ({code}): {argv}")


def build() -> None:
    if GOLDEN.exists():
        shutil.rmtree(GOLDEN)
    GOLDEN.mkdir(parents=True)

    synth_cfg = GOLDEN / "synth.json"
    write_config(synth_cfg, {
        "schema_version": SCHEMA_VERSION,
        "graph": {"n_nodes": N_NODES, "target_edges": 7, "seed": 3,
                  "generator": "random_sparse"},
        "counts": {label: PER_CLASS for label in CLASSES},
        "seed": 9,
        "signature": {"noise_std": 0.005},
    })
    exp_cfg = GOLDEN / "experiment.json"
    write_config(exp_cfg, {
        "schema_version": SCHEMA_VERSION,
        "model": {"n_nodes": N_NODES, "encoder_hidden": 16,
                  "classifier_hidden": 16, "feat_channels": 8,
                  "variant": "full"},
        "train": {"epochs": 40, "batch_size": 8, "lr": 3e-3, "seed": 0,
                  "patience": 12},
    })

    data = GOLDEN / "data"
    run(["synth", "--config", str(synth_cfg), "--out", str(data)])
    run(["preprocess", "--in", str(data), "--out", str(data), "--seed", "1"])
    run(["train", "--data", str(data), "--config", str(exp_cfg),
         "--out", str(GOLDEN / "run")])
    run(["eval", "--model", str(GOLDEN / "run" / "model.ckpt"),
         "--data", str(data), "--report", str(GOLDEN / "report.json")])

    # one zero-noise normal sample in the raw on-disk format
    graph = graph_from_manifest(load_manifest(data))
    sample = generate_event(graph, "normal", seed=77, noise_std=0.0,
                            config=SynthConfig(noise_std=0.0))
    raw = np.ascontiguousarray(sample.values, dtype="<f4")
    (GOLDEN / "normal_sample.bin").write_bytes(raw.tobytes())

    # the golden model must actually get it right, or the fixture is useless
    model, meta = load_model(GOLDEN / "run" / "model.ckpt")
    from latentgrid.preprocess import Standardization

    stats = Standardization.from_json(meta["standardization"])
    x = stats.apply(sample.values[None].astype(np.float64)).astype(np.float32)
    with no_grad():
        out = model(Tensor(x))
    index_to_class = {v: k for k, v in meta["class_map"].items()}
    label = index_to_class[int(out.probs.data[0].argmax())]
    report = json.loads((GOLDEN / "report.json").read_text())
    print(f"golden: eval accuracy {report['accuracy']:.4f}, "
          f"zero-noise normal classified as {label!r}")
    if label != "normal":
        raise SystemExit("golden model misclassifies the zero-noise normal "
                         "sample; adjust the miniature task before freezing")


if __name__ == "__main__":
    build()
